"""Candidate generators over the unit cube with an ask/tell contract.

Three kinds: Gaussian (perturb a random elite), Random (uniform sampling) and
Improvement (a CMA-ES instance whose selection is driven by archive insert
outcomes: non-improving offspring are filtered out, new cells rank ahead of
improvements).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .archive import GridArchive, InsertOutcome, InsertStatus
from .cma import CmaEs
from .errors import UsageError
from .search_space import clip_unit


@dataclass(frozen=True)
class GaussianEmitterCfg:
    """Isotropic perturbation scale in genotype space."""

    sigma: float = 0.1

    def __post_init__(self):
        if self.sigma <= 0:
            raise UsageError(f"gaussian emitter sigma must be positive, got {self.sigma}")


@dataclass(frozen=True)
class ImprovementEmitterCfg:
    """Initial CMA step size; selection rule is fixed to filter."""

    sigma0: float = 0.1

    def __post_init__(self):
        if self.sigma0 <= 0:
            raise UsageError(f"improvement emitter sigma0 must be positive, got {self.sigma0}")


@dataclass(frozen=True)
class RandomEmitterCfg:
    """Uniform sampling over the cube; no state."""


EmitterCfg = GaussianEmitterCfg | ImprovementEmitterCfg | RandomEmitterCfg


@dataclass
class EvaluatedSolution:
    """One evaluated candidate plus the archive outcome of its insertion."""

    genotype: np.ndarray
    objective: float
    features: np.ndarray
    insert_outcome: InsertOutcome


class GaussianEmitter:
    """MAP-Elites variation: elite parent plus isotropic Gaussian noise."""

    def __init__(self, cfg: GaussianEmitterCfg, archive: GridArchive, d: int,
                 rng: np.random.Generator):
        self.cfg = cfg
        self.archive = archive
        self.d = d
        self.rng = rng

    def ask(self, n: int) -> np.ndarray:
        if len(self.archive) == 0:
            return self.rng.random((n, self.d))
        parents_pool = self.archive.elite_genotypes()
        idx = self.rng.integers(len(parents_pool), size=n)
        offspring = parents_pool[idx] + self.rng.normal(0.0, self.cfg.sigma, (n, self.d))
        return clip_unit(offspring)

    def tell(self, solutions: list[EvaluatedSolution]) -> None:
        pass  # stateless: selection pressure lives entirely in the archive


class RandomEmitter:
    """Uniform random search over the cube."""

    def __init__(self, cfg: RandomEmitterCfg, archive: GridArchive, d: int,
                 rng: np.random.Generator):
        self.archive = archive
        self.d = d
        self.rng = rng

    def ask(self, n: int) -> np.ndarray:
        return self.rng.random((n, self.d))

    def tell(self, solutions: list[EvaluatedSolution]) -> None:
        pass


def rank_survivors(solutions: list[EvaluatedSolution]) -> list[EvaluatedSolution]:
    """Filter rule: drop rejected solutions, then rank the survivors.

    New cells come before improvements; new cells sort by objective descending,
    improvements by improvement delta descending. Ties keep batch order.
    """
    new = [s for s in solutions if s.insert_outcome.status is InsertStatus.NEW]
    improved = [s for s in solutions if s.insert_outcome.status is InsertStatus.IMPROVED]
    new.sort(key=lambda s: -s.objective)
    improved.sort(key=lambda s: -s.insert_outcome.delta)
    return new + improved


class ImprovementEmitter:
    """CMA-ES adapted by archive improvement instead of raw objective.

    Each generation's offspring are inserted into the archive by the run loop;
    ``tell`` then selects the survivors per the filter rule and feeds them to
    the CMA update as parents. A generation with no survivors, or a degenerate
    CMA state, restarts the strategy from a uniformly random elite.
    """

    def __init__(self, cfg: ImprovementEmitterCfg, archive: GridArchive, d: int,
                 rng: np.random.Generator, batch: int):
        self.cfg = cfg
        self.archive = archive
        self.d = d
        self.rng = rng
        self.batch = batch
        self.cma = CmaEs(d=d, sigma0=cfg.sigma0, lam=batch, rng=rng)
        self.cma.reset(rng.random(d))
        self.restarts = 0

    def ask(self, n: int) -> np.ndarray:
        return self.cma.ask(n, lower=0.0, upper=1.0)

    def tell(self, solutions: list[EvaluatedSolution]) -> bool:
        """Update the CMA state; returns True when a restart happened."""
        for s in solutions:
            if len(s.genotype) != self.d:
                raise UsageError(
                    f"solution genotype has dimension {len(s.genotype)}, expected {self.d}"
                )
        survivors = rank_survivors(solutions)
        if not survivors:
            self._restart()
            return True
        mu = min((self.batch + 1) // 2, len(survivors))
        parents = np.stack([s.genotype for s in survivors[:mu]])
        self.cma.tell(parents)
        if self.cma.needs_restart():
            self._restart()
            return True
        return False

    def _restart(self) -> None:
        if len(self.archive) > 0:
            mean = self.archive.random_elite(self.rng).genotype
        else:
            mean = self.rng.random(self.d)
        self.cma.reset(mean)
        self.restarts += 1


Emitter = GaussianEmitter | RandomEmitter | ImprovementEmitter


def build_emitter(cfg: EmitterCfg, archive: GridArchive, d: int,
                  rng: np.random.Generator, batch: int) -> Emitter:
    if isinstance(cfg, GaussianEmitterCfg):
        return GaussianEmitter(cfg, archive, d, rng)
    if isinstance(cfg, RandomEmitterCfg):
        return RandomEmitter(cfg, archive, d, rng)
    if isinstance(cfg, ImprovementEmitterCfg):
        return ImprovementEmitter(cfg, archive, d, rng, batch)
    raise UsageError(f"unknown emitter config {cfg!r}")


def emitter_cfg_from_json(obj: dict) -> EmitterCfg:
    """Parse {"kind": "gaussian"|"improvement"|"random", ...} emitter configs."""
    if not isinstance(obj, dict) or "kind" not in obj:
        raise UsageError(f"emitter config must be an object with a 'kind': {obj!r}")
    kind = obj["kind"]
    if kind == "gaussian":
        return GaussianEmitterCfg(sigma=float(obj.get("sigma", 0.1)))
    if kind == "improvement":
        return ImprovementEmitterCfg(sigma0=float(obj.get("sigma0", 0.1)))
    if kind == "random":
        return RandomEmitterCfg()
    raise UsageError(f"unknown emitter kind {kind!r} (expected gaussian|improvement|random)")


def emitter_cfg_to_json(cfg: EmitterCfg) -> dict:
    if isinstance(cfg, GaussianEmitterCfg):
        return {"kind": "gaussian", "sigma": cfg.sigma}
    if isinstance(cfg, ImprovementEmitterCfg):
        return {"kind": "improvement", "sigma0": cfg.sigma0}
    if isinstance(cfg, RandomEmitterCfg):
        return {"kind": "random"}
    raise UsageError(f"unknown emitter config {cfg!r}")
