"""Benchmark problems: black-box functions returning objective plus features.

Every problem evaluates a configuration to m values: the objective (maximized)
first, then the m-1 feature values that position the solution in behavior
space. Four evaluator families live here: analytic synthetic problems with
known per-niche optima, an inverse-distance interpolator over a sample table,
a line-JSON wire protocol to an external evaluator process, and the registry
of the twelve surrogate-backed benchmark problems (which bind one of the
latter two at run time).
"""
from __future__ import annotations

import json
import math
import queue
import re
import shlex
import subprocess
import threading
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .archive import ArchiveSpec
from .errors import EvaluationFault, ProtocolError, UsageError
from .search_space import (
    Configuration,
    SearchSpace,
    identity_space,
    ranger_space,
    xgboost_space,
)


@dataclass(frozen=True)
class EvaluationResult:
    """Objective value plus feature vector for one configuration."""

    objective: float
    features: np.ndarray

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=float)
        object.__setattr__(self, "features", feats)
        if not (math.isfinite(self.objective) and np.isfinite(feats).all()):
            raise EvaluationFault(
                f"non-finite evaluation result ({self.objective}, {feats})"
            )


@dataclass(frozen=True)
class ProblemDef:
    """A problem instance: search space, archive geometry and evaluator binding.

    ``evaluator`` maps a configuration dict to an ``EvaluationResult``; it may
    be None for registry entries whose evaluator is bound later (external
    process or sample table). ``batch_evaluator``, when present, maps an (n, d)
    array of original-scale values to an (n, m) output array and is used by the
    run loop as a fast path.
    """

    id: str
    search_space: SearchSpace
    m: int
    archive_spec: ArchiveSpec
    feature_names: tuple[str, ...]
    evaluator: Callable[[Configuration], EvaluationResult] | None = None
    batch_evaluator: Callable[[np.ndarray], np.ndarray] | None = field(
        default=None, compare=False
    )

    def __post_init__(self):
        if self.m < 2:
            raise UsageError(f"problem {self.id}: m must be >= 2, got {self.m}")
        if self.archive_spec.ndim != self.m - 1:
            raise UsageError(
                f"problem {self.id}: archive has {self.archive_spec.ndim} dims, "
                f"expected m-1 = {self.m - 1}"
            )
        if len(self.feature_names) != self.m - 1:
            raise UsageError(f"problem {self.id}: need {self.m - 1} feature names")

    def bound(self, evaluator, batch_evaluator=None) -> "ProblemDef":
        """Return a copy with the evaluator(s) bound."""
        return replace(self, evaluator=evaluator, batch_evaluator=batch_evaluator)


# -- synthetic problems --------------------------------------------------------


def grid_sphere_values(x: np.ndarray, d: int) -> np.ndarray:
    """Vectorized evaluator: features are the first two coordinates; the
    objective penalizes the remaining coordinates' squared distance to the
    mean of those two, scaled so the objective spans [0, 1] with per-niche
    optimum exactly 1."""
    x = np.atleast_2d(x)
    target = (x[:, 0] + x[:, 1]) / 2
    penalty = np.sum((x[:, 2:] - target[:, None]) ** 2, axis=1)
    obj = np.maximum(0.0, 1.0 - (4.0 / (d - 2)) * penalty)
    return np.column_stack([obj, x[:, 0], x[:, 1]])


def peaks_values(x: np.ndarray) -> np.ndarray:
    """Vectorized evaluator: a 3x3 grid of sine peaks over the first two
    coordinates, with a quadratic penalty on the rest, clamped to [0, 1]."""
    x = np.atleast_2d(x)
    ridge = 0.5 + 0.5 * np.sin(3 * np.pi * x[:, 0]) * np.sin(3 * np.pi * x[:, 1])
    penalty = np.sum((x[:, 2:] - 0.5) ** 2, axis=1)
    obj = np.clip(ridge - penalty, 0.0, 1.0)
    return np.column_stack([obj, x[:, 0], x[:, 1]])


def _synthetic(problem_id: str, d: int, batch_fn) -> ProblemDef:
    space = identity_space(d)

    def evaluate(config: Configuration) -> EvaluationResult:
        x = np.array([config[name] for name in space.names])
        row = batch_fn(x[None, :])[0]
        return EvaluationResult(float(row[0]), row[1:])

    return ProblemDef(
        id=problem_id,
        search_space=space,
        m=3,
        archive_spec=ArchiveSpec.of((0.0, 1.0, 10), (0.0, 1.0, 10)),
        feature_names=("b1", "b2"),
        evaluator=evaluate,
        batch_evaluator=batch_fn,
    )


def grid_sphere_problem(d: int) -> ProblemDef:
    if d < 3:
        raise UsageError(f"grid_sphere needs d >= 3, got {d}")
    return _synthetic(f"grid_sphere_d{d}", d, lambda x: grid_sphere_values(x, d))


def peaks_problem(d: int) -> ProblemDef:
    if d < 2:
        raise UsageError(f"peaks needs d >= 2, got {d}")
    return _synthetic(f"peaks_d{d}", d, peaks_values)


def peaks_niche_optima(bins: tuple[int, int] = (10, 10),
                       resolution: int = 200) -> np.ndarray:
    """Brute-force per-niche optima of the peaks objective on a 2-d grid.

    Scans a (resolution+1)^2 lattice over the two behavior coordinates with the
    inner coordinates held at their analytic optimum, and keeps the best value
    per niche. Used by tests and the oracle CLI command.
    """
    g = np.linspace(0.0, 1.0, resolution + 1)
    g1, g2 = np.meshgrid(g, g, indexing="ij")
    vals = 0.5 + 0.5 * np.sin(3 * np.pi * g1) * np.sin(3 * np.pi * g2)
    vals = np.clip(vals, 0.0, 1.0)
    out = np.zeros(bins)
    b1 = np.minimum((g1 * bins[0]).astype(int), bins[0] - 1)
    b2 = np.minimum((g2 * bins[1]).astype(int), bins[1] - 1)
    np.maximum.at(out, (b1, b2), vals)
    return out


def grid_sphere_niche_optima(bins: tuple[int, int] = (10, 10)) -> np.ndarray:
    """Per-niche optimum of grid_sphere is 1 everywhere (attained when the
    inner coordinates equal the mean of the two behavior coordinates)."""
    return np.ones(bins)


# -- tabular interpolator ------------------------------------------------------


@dataclass(frozen=True)
class SampleTable:
    """Rows of (genotype, outputs) pairs backing an interpolated evaluator."""

    genotypes: np.ndarray  # (N, d)
    outputs: np.ndarray  # (N, m)

    def __post_init__(self):
        if self.genotypes.ndim != 2 or self.outputs.ndim != 2:
            raise UsageError("sample table arrays must be 2-d")
        if len(self.genotypes) != len(self.outputs):
            raise UsageError("sample table genotype/output row counts differ")
        if len(self.genotypes) < 1:
            raise UsageError("sample table must contain at least one row")

    @property
    def n(self) -> int:
        return len(self.genotypes)

    @property
    def d(self) -> int:
        return self.genotypes.shape[1]

    @property
    def m(self) -> int:
        return self.outputs.shape[1]


def tabular_load(path) -> SampleTable:
    """Parse a CSV with header g_0,..,g_{d-1},y_1,..,y_m."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header:
            raise UsageError(f"empty sample table {path}")
        cols = header.split(",")
        d = sum(1 for c in cols if c.startswith("g_"))
        m = sum(1 for c in cols if c.startswith("y_"))
        if d < 1 or m < 2 or d + m != len(cols):
            raise UsageError(f"bad sample-table header {header!r} in {path}")
        genos, outs = [], []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != d + m:
                raise UsageError(f"{path}:{lineno}: expected {d + m} fields, got {len(parts)}")
            try:
                row = [float(v) for v in parts]
            except ValueError as exc:
                raise UsageError(f"{path}:{lineno}: {exc}") from exc
            genos.append(row[:d])
            outs.append(row[d:])
        if not genos:
            raise UsageError(f"sample table {path} has a header but no rows")
    return SampleTable(np.array(genos), np.array(outs))


def tabular_predict(table: SampleTable, genotype: np.ndarray,
                    neighbors: int = 5) -> EvaluationResult:
    """Exact-match lookup, else inverse-squared-distance weighting over the
    nearest rows (Euclidean in genotype space)."""
    g = np.asarray(genotype, dtype=float)
    if g.shape != (table.d,):
        raise UsageError(f"genotype has shape {g.shape}, table dimension is {table.d}")
    diff = table.genotypes - g
    dist_sq = np.einsum("ij,ij->i", diff, diff)
    nearest = int(np.argmin(dist_sq))
    if np.abs(diff[nearest]).max() <= 1e-12:
        out = table.outputs[nearest]
        return EvaluationResult(float(out[0]), out[1:].copy())
    k = min(neighbors, table.n)
    # Stable ordering keeps equidistant-ties deterministic across runs.
    order = np.argsort(dist_sq, kind="stable")[:k]
    weights = 1.0 / (dist_sq[order] + 1e-12)
    weights /= weights.sum()
    out = weights @ table.outputs[order]
    return EvaluationResult(float(out[0]), out[1:])


def tabular_evaluator(table: SampleTable, space: SearchSpace):
    """Bindable per-configuration evaluator over a sample table.

    Table genotypes live in the unit cube, so configurations are normalized
    back before the distance query.
    """

    def evaluate(config: Configuration) -> EvaluationResult:
        return tabular_predict(table, space.normalize(config))

    return evaluate


# -- external evaluator (qdo-eval/1) -------------------------------------------

PROTOCOL_NAME = "qdo-eval/1"


class ExternalEvaluator:
    """Synchronous line-JSON bridge to an evaluator child process.

    The child prints a handshake {"protocol": "qdo-eval/1", "m": <int>} on
    start, then answers each request line {"id":.., "config":{..}} with one
    response line {"id":.., "objective":.., "features":[..]}. One request is
    in flight at a time; a lock serializes concurrent callers. Closing the
    child's stdin asks it to shut down.
    """

    def __init__(self, cmd: list[str] | str, timeout: float = 10.0):
        if isinstance(cmd, str):
            cmd = shlex.split(cmd)
        self.cmd = cmd
        self.timeout = timeout
        self._lock = threading.Lock()
        self._next_id = 0
        self._proc = subprocess.Popen(
            cmd,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )
        self._lines: queue.Queue[str | None] = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()
        handshake = self._read_json(what="handshake")
        if handshake.get("protocol") != PROTOCOL_NAME:
            self.close()
            raise ProtocolError(
                f"bad handshake {handshake!r}, expected protocol {PROTOCOL_NAME!r}"
            )
        try:
            self.m = int(handshake["m"])
        except (KeyError, TypeError, ValueError):
            self.close()
            raise ProtocolError(f"handshake missing integer 'm': {handshake!r}")
        if self.m < 2:
            self.close()
            raise ProtocolError(f"handshake arity m must be >= 2, got {self.m}")

    def _pump(self):
        assert self._proc.stdout is not None
        for line in self._proc.stdout:
            self._lines.put(line)
        self._lines.put(None)  # EOF marker

    def _read_json(self, what: str) -> dict:
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            raise EvaluationFault(
                f"evaluator timed out after {self.timeout}s waiting for {what}"
            )
        if line is None:
            raise EvaluationFault(f"evaluator exited while waiting for {what}")
        try:
            data = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"malformed JSON in {what}: {line!r} ({exc})")
        if not isinstance(data, dict):
            raise ProtocolError(f"{what} is not a JSON object: {line!r}")
        return data

    def evaluate(self, config: Configuration) -> EvaluationResult:
        with self._lock:
            request_id = self._next_id
            self._next_id += 1
            line = json.dumps({"id": request_id, "config": config})
            try:
                assert self._proc.stdin is not None
                self._proc.stdin.write(line + "\n")
                self._proc.stdin.flush()
            except (BrokenPipeError, OSError) as exc:
                raise EvaluationFault(
                    f"evaluator process is gone (request id {request_id}): {exc}"
                )
            response = self._read_json(what=f"response to id {request_id}")
        if response.get("id") != request_id:
            raise ProtocolError(
                f"response id {response.get('id')!r} does not match request id {request_id}"
            )
        try:
            objective = float(response["objective"])
            features = np.array([float(v) for v in response["features"]], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"malformed response {response!r}: {exc}")
        if len(features) != self.m - 1:
            raise ProtocolError(
                f"response carries {len(features)} features, handshake promised {self.m - 1}"
            )
        return EvaluationResult(objective, features)

    def close(self):
        proc = self._proc
        if proc.stdin is not None:
            try:
                proc.stdin.close()
            except OSError:
                pass
        try:
            proc.wait(timeout=2)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def bind_external(problem: ProblemDef, evaluator: ExternalEvaluator) -> ProblemDef:
    """Attach a running external evaluator, checking output arity up front."""
    if evaluator.m != problem.m:
        raise UsageError(
            f"evaluator arity m={evaluator.m} does not match problem "
            f"{problem.id} (m={problem.m})"
        )
    return problem.bound(evaluator.evaluate)


# -- registry -------------------------------------------------------------------

INTERPRETABILITY = "interpretability"
RESOURCE_USAGE = "resource_usage"

# Dataset id -> (feature count p, resource-usage archive ranges).
_DATASETS = {
    "41146": (20, ((1.0, 200.0), (0.19, 4.5))),
    "40981": (14, ((1.0, 40.0), (0.10, 0.65))),
    "1489": (5, ((1.0, 200.0), (0.19, 4.5))),
    "1067": (21, ((1.0, 78.0), (0.13, 1.55))),
}
_LEARNERS = {"ranger": ranger_space, "xgboost": xgboost_space}
_RESOURCE_BINS = 33


def _paper_registry() -> dict[str, ProblemDef]:
    registry: dict[str, ProblemDef] = {}
    for learner, space_fn in _LEARNERS.items():
        for dataset, (p, _) in _DATASETS.items():
            pid = f"iaml_{learner}_{dataset}"
            registry[f"{pid}/{INTERPRETABILITY}"] = ProblemDef(
                id=f"{pid}/{INTERPRETABILITY}",
                search_space=space_fn(),
                m=3,
                archive_spec=ArchiveSpec.of((0.0, float(p), p + 1), (0.0, 1.0, 100)),
                feature_names=("NF", "IAS"),
            )
    for dataset, (_, (rm_range, tp_range)) in _DATASETS.items():
        pid = f"iaml_ranger_{dataset}"
        registry[f"{pid}/{RESOURCE_USAGE}"] = ProblemDef(
            id=f"{pid}/{RESOURCE_USAGE}",
            search_space=ranger_space(),
            m=3,
            archive_spec=ArchiveSpec.of(
                (rm_range[0], rm_range[1], _RESOURCE_BINS),
                (tp_range[0], tp_range[1], _RESOURCE_BINS),
            ),
            feature_names=("rammodel", "timepredict"),
        )
    return registry


_PAPER_PROBLEMS = _paper_registry()
_SYNTHETIC_PATTERN = re.compile(r"^(grid_sphere|peaks)_d(\d+)$")


def paper_problem_ids() -> list[str]:
    return sorted(_PAPER_PROBLEMS.keys())


def paper_problem(problem_id: str) -> ProblemDef:
    """Look up one of the twelve benchmark problems by "<id>/<context>".

    The context suffix is interpretability or resource_usage (a space works
    too); interpretability is assumed when omitted and unambiguous.
    """
    key = problem_id.strip().replace(" ", "_")
    if "/" not in key:
        key = f"{key}/{INTERPRETABILITY}"
    if key not in _PAPER_PROBLEMS:
        known = ", ".join(paper_problem_ids())
        raise UsageError(f"unknown problem {problem_id!r}; registry: {known}")
    return _PAPER_PROBLEMS[key]


def synthetic_problem(problem_id: str) -> ProblemDef:
    match = _SYNTHETIC_PATTERN.match(problem_id.strip())
    if not match:
        raise UsageError(
            f"unknown synthetic problem {problem_id!r} "
            "(expected grid_sphere_d<N> or peaks_d<N>)"
        )
    family, d = match.group(1), int(match.group(2))
    return grid_sphere_problem(d) if family == "grid_sphere" else peaks_problem(d)


def get_problem(problem_id: str) -> ProblemDef:
    """Resolve either a synthetic id or a registry id."""
    if _SYNTHETIC_PATTERN.match(problem_id.strip()):
        return synthetic_problem(problem_id)
    return paper_problem(problem_id)


def list_problem_ids() -> list[str]:
    """Registry ids plus the canonical synthetic instances."""
    return paper_problem_ids() + ["grid_sphere_d6", "peaks_d6"]
