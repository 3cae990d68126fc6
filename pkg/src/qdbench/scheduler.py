"""The optimize loop: allocate a batch across emitters, evaluate, insert, tell.

Each iteration asks every emitter for its allocation, evaluates the
concatenated batch, inserts the results into the archive strictly in batch
order (emitter order, then ask order), hands each emitter back exactly its own
slice with insert outcomes, and appends an anytime metrics record. Evaluation
may fan out to worker threads; insertion order, and therefore every result,
stays independent of the worker count.
"""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .archive import ArchiveSpec, Elite, GridArchive
from .emitters import (
    EmitterCfg,
    EvaluatedSolution,
    GaussianEmitterCfg,
    ImprovementEmitterCfg,
    RandomEmitterCfg,
    build_emitter,
    emitter_cfg_from_json,
)
from .errors import EvaluationFault, UsageError
from .problems import ProblemDef
from .reporting import IterationRecord, RunReport


@dataclass(frozen=True)
class OptimizerSpec:
    """Ordered emitter portfolio with per-iteration allocation counts."""

    emitters: tuple[tuple[EmitterCfg, int], ...]

    def __post_init__(self):
        if not self.emitters:
            raise UsageError("optimizer needs at least one emitter")
        for cfg, count in self.emitters:
            if count < 1:
                raise UsageError(f"emitter allocation must be >= 1, got {count}")
        object.__setattr__(self, "emitters", tuple(self.emitters))

    @property
    def batch(self) -> int:
        return sum(count for _, count in self.emitters)


@dataclass(frozen=True)
class RunSpec:
    """Everything one run needs: problem, portfolio, budget and seed."""

    problem: ProblemDef
    optimizer: OptimizerSpec
    iterations: int
    seed: int
    archive_spec: ArchiveSpec | None = None  # defaults to the problem's grid

    def __post_init__(self):
        if self.iterations < 1:
            raise UsageError(f"iterations must be >= 1, got {self.iterations}")

    def resolved_archive_spec(self) -> ArchiveSpec:
        return self.archive_spec if self.archive_spec is not None else self.problem.archive_spec


def split_allocations(batch: int, parts: int) -> list[int]:
    """Divide a batch over ``parts`` emitters, earlier emitters taking extras."""
    if parts < 1 or batch < parts:
        raise UsageError(f"cannot split batch {batch} over {parts} emitters")
    base, extra = divmod(batch, parts)
    return [base + (1 if i < extra else 0) for i in range(parts)]


PRESET_NAMES = ("map_elites", "cma_me", "gauss_imp", "random", "illuminate")


def preset(name: str, batch: int = 100) -> OptimizerSpec:
    """Named emitter portfolios; batch defaults to 100 evaluations."""
    if name == "map_elites":
        cfgs = [GaussianEmitterCfg(0.1)]
    elif name == "cma_me":
        cfgs = [ImprovementEmitterCfg(0.1)]
    elif name == "gauss_imp":
        cfgs = [GaussianEmitterCfg(0.1), ImprovementEmitterCfg(0.1)]
    elif name == "random":
        cfgs = [RandomEmitterCfg()]
    elif name == "illuminate":
        cfgs = [
            GaussianEmitterCfg(0.1),
            GaussianEmitterCfg(0.2),
            GaussianEmitterCfg(0.3),
            RandomEmitterCfg(),
        ]
    else:
        raise UsageError(f"unknown preset {name!r}; available: {', '.join(PRESET_NAMES)}")
    counts = split_allocations(batch, len(cfgs))
    return OptimizerSpec(tuple(zip(cfgs, counts)))


def optimizer_spec_from_json(obj: dict, batch: int = 100) -> OptimizerSpec:
    """Parse {"preset": name} or {"emitters": [{"kind":.., "count":..}, ..]}."""
    if "preset" in obj:
        return preset(obj["preset"], batch=obj.get("batch", batch))
    if "emitters" not in obj:
        raise UsageError(f"optimizer config needs 'preset' or 'emitters': {obj!r}")
    entries = obj["emitters"]
    if not entries:
        raise UsageError("optimizer config has an empty emitter list")
    cfgs = [emitter_cfg_from_json(e) for e in entries]
    counts = [e.get("count") for e in entries]
    if all(c is None for c in counts):
        counts = split_allocations(obj.get("batch", batch), len(cfgs))
    elif any(c is None for c in counts):
        raise UsageError("either give every emitter a 'count' or none of them")
    else:
        counts = [int(c) for c in counts]
        if "batch" in obj and sum(counts) != obj["batch"]:
            raise UsageError(
                f"emitter counts sum to {sum(counts)} but 'batch' says {obj['batch']}"
            )
    return OptimizerSpec(tuple(zip(cfgs, counts)))


def emitter_rng(master_seed: int, ordinal: int) -> np.random.Generator:
    """Independent per-emitter stream keyed by (seed, position in the list)."""
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(master_seed, spawn_key=(ordinal,)))
    )


def run(spec: RunSpec, workers: int = 1) -> RunReport:
    """Execute the optimize loop and return the anytime report with the archive.

    ``workers`` > 1 fans evaluation out to a thread pool; results are re-applied
    in batch order so reports are bit-identical regardless of the worker count.
    """
    problem = spec.problem
    archive_spec = spec.resolved_archive_spec()
    if archive_spec.ndim != problem.m - 1:
        raise UsageError(
            f"problem {problem.id} returns {problem.m - 1} features but the "
            f"archive has {archive_spec.ndim} dimensions"
        )
    if problem.evaluator is None and problem.batch_evaluator is None:
        raise UsageError(f"problem {problem.id} has no evaluator bound")
    space = problem.search_space
    archive = GridArchive(archive_spec)
    batch = spec.optimizer.batch
    emitters = [
        build_emitter(cfg, archive, space.d, emitter_rng(spec.seed, i), count)
        for i, (cfg, count) in enumerate(spec.optimizer.emitters)
    ]
    counts = [count for _, count in spec.optimizer.emitters]

    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    records: list[IterationRecord] = []
    eval_index = 0
    started = time.perf_counter()
    try:
        for iteration in range(1, spec.iterations + 1):
            asked = [em.ask(count) for em, count in zip(emitters, counts)]
            genotypes = np.concatenate(asked, axis=0)
            values = space.denormalize_array(genotypes)
            outputs = _evaluate_batch(problem, space, values, pool)

            solutions: list[EvaluatedSolution] = []
            for i in range(batch):
                objective = float(outputs[i, 0])
                features = outputs[i, 1:]
                if not np.isfinite(outputs[i]).all():
                    raise EvaluationFault(
                        f"evaluator returned non-finite values {outputs[i]!r} for "
                        f"configuration {space.to_configuration(values[i])!r} "
                        f"(evaluation {eval_index})"
                    )
                candidate = Elite(
                    genotype=genotypes[i].copy(),
                    configuration=space.to_configuration(values[i]),
                    objective=objective,
                    features=features.copy(),
                    eval_index=eval_index,
                )
                outcome = archive.insert(candidate)
                solutions.append(
                    EvaluatedSolution(candidate.genotype, objective,
                                      candidate.features, outcome)
                )
                eval_index += 1

            offset = 0
            for em, count in zip(emitters, counts):
                em.tell(solutions[offset : offset + count])
                offset += count

            coverage, qd_score, max_objective = archive.summary()
            records.append(
                IterationRecord(
                    iteration=iteration,
                    evaluations=iteration * batch,
                    coverage=coverage,
                    qd_score=qd_score,
                    max_objective=max_objective,
                )
            )
    finally:
        if pool is not None:
            pool.shutdown()

    return RunReport(
        problem_id=problem.id,
        optimizer=spec.optimizer,
        iterations=spec.iterations,
        batch=batch,
        seed=spec.seed,
        records=records,
        archive=archive,
        wall_time=time.perf_counter() - started,
    )


def _evaluate_batch(problem: ProblemDef, space, values: np.ndarray, pool) -> np.ndarray:
    """Evaluate original-scale rows, preferring the vectorized path."""
    if problem.batch_evaluator is not None:
        return np.asarray(problem.batch_evaluator(values), dtype=float)
    evaluator = problem.evaluator

    def evaluate_named(config):
        try:
            return evaluator(config)
        except EvaluationFault as exc:
            raise EvaluationFault(f"{exc} (configuration {config!r})") from exc

    configs = [space.to_configuration(row) for row in values]
    if pool is not None:
        results = list(pool.map(evaluate_named, configs))
    else:
        results = [evaluate_named(c) for c in configs]
    return np.column_stack(
        [
            np.array([r.objective for r in results]),
            np.stack([r.features for r in results]),
        ]
    )
