"""Run records, CSV persistence, multi-seed aggregation and heatmap rendering.

Coverage is stored as a fraction at full float precision; the percent rendering
the summary tables use happens only at the presentation edge. Every file
writer here is deterministic byte-for-byte for identical inputs (wall time is
kept in memory only and never written).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .archive import GridArchive
from .errors import UsageError


@dataclass(frozen=True)
class IterationRecord:
    """Anytime metrics after one iteration of the optimize loop."""

    iteration: int
    evaluations: int
    coverage: float
    qd_score: float
    max_objective: float


@dataclass
class RunReport:
    """One run's spec echo, per-iteration records and final archive."""

    problem_id: str
    optimizer: object  # OptimizerSpec; compared structurally in aggregate()
    iterations: int
    batch: int
    seed: int
    records: list[IterationRecord]
    archive: GridArchive | None
    wall_time: float = 0.0

    def final(self) -> IterationRecord:
        return self.records[-1]


@dataclass(frozen=True)
class MetricStats:
    """Per-iteration mean and standard error over replications."""

    mean: np.ndarray
    stderr: np.ndarray


@dataclass
class AggregateReport:
    """Replication statistics for one (problem, optimizer) pair."""

    problem_id: str
    optimizer: object
    iterations: int
    batch: int
    seeds: list[int]
    evaluations: np.ndarray
    coverage: MetricStats
    qd_score: MetricStats
    max_objective: MetricStats

    @property
    def replications(self) -> int:
        return len(self.seeds)

    def summary_row(self) -> dict:
        """Final-iteration summary in the benchmark-table format."""
        return {
            "replications": self.replications,
            "coverage_pct": 100.0 * float(self.coverage.mean[-1]),
            "coverage_pct_stderr": 100.0 * float(self.coverage.stderr[-1]),
            "qd_score": float(self.qd_score.mean[-1]),
            "qd_score_stderr": float(self.qd_score.stderr[-1]),
            "max_objective": float(self.max_objective.mean[-1]),
            "max_objective_stderr": float(self.max_objective.stderr[-1]),
        }


METRICS_HEADER = ["iteration", "evaluations", "coverage", "qd_score", "max_objective"]


def _fmt(x: float) -> str:
    return repr(float(x))


def write_metrics_csv(report: RunReport, path) -> None:
    """One row per iteration, floats at full round-trip precision."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METRICS_HEADER)
        for r in report.records:
            writer.writerow(
                [r.iteration, r.evaluations, _fmt(r.coverage), _fmt(r.qd_score),
                 _fmt(r.max_objective)]
            )


def read_metrics_csv(path) -> list[IterationRecord]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != METRICS_HEADER:
            raise UsageError(f"unexpected metrics header {header!r} in {path}")
        return [
            IterationRecord(
                iteration=int(row[0]),
                evaluations=int(row[1]),
                coverage=float(row[2]),
                qd_score=float(row[3]),
                max_objective=float(row[4]),
            )
            for row in reader
        ]


def aggregate(reports: list[RunReport]) -> AggregateReport:
    """Elementwise mean and standard error over replications of one spec.

    Reports must agree on everything except the seed; at least two are needed
    for standard errors (stderr = sample sd / sqrt(R)).
    """
    if len(reports) < 2:
        raise UsageError(f"aggregation needs >= 2 replications, got {len(reports)}")
    first = reports[0]
    for other in reports[1:]:
        same = (
            other.problem_id == first.problem_id
            and other.optimizer == first.optimizer
            and other.iterations == first.iterations
            and other.batch == first.batch
        )
        if not same:
            raise UsageError(
                "cannot aggregate heterogeneous runs "
                f"({first.problem_id}/{first.iterations}it vs "
                f"{other.problem_id}/{other.iterations}it)"
            )
    seeds = [r.seed for r in reports]

    def stats(attr: str) -> MetricStats:
        data = np.array([[getattr(rec, attr) for rec in r.records] for r in reports])
        mean = data.mean(axis=0)
        stderr = data.std(axis=0, ddof=1) / math.sqrt(len(reports))
        return MetricStats(mean, stderr)

    return AggregateReport(
        problem_id=first.problem_id,
        optimizer=first.optimizer,
        iterations=first.iterations,
        batch=first.batch,
        seeds=seeds,
        evaluations=np.array([rec.evaluations for rec in first.records]),
        coverage=stats("coverage"),
        qd_score=stats("qd_score"),
        max_objective=stats("max_objective"),
    )


AGGREGATE_HEADER = [
    "iteration", "evaluations",
    "coverage_mean", "coverage_stderr",
    "qd_score_mean", "qd_score_stderr",
    "max_objective_mean", "max_objective_stderr",
]


def write_aggregate_csv(agg: AggregateReport, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(AGGREGATE_HEADER)
        for i in range(agg.iterations):
            writer.writerow(
                [
                    i + 1,
                    int(agg.evaluations[i]),
                    _fmt(agg.coverage.mean[i]), _fmt(agg.coverage.stderr[i]),
                    _fmt(agg.qd_score.mean[i]), _fmt(agg.qd_score.stderr[i]),
                    _fmt(agg.max_objective.mean[i]), _fmt(agg.max_objective.stderr[i]),
                ]
            )


# -- heatmaps -------------------------------------------------------------------

# Black through purple and orange to bright yellow/white; linear interpolation
# between stops gives the familiar dark-to-incandescent objective ramp.
_RAMP = (
    (0.000, (0, 0, 4)),
    (0.125, (40, 11, 84)),
    (0.250, (101, 21, 110)),
    (0.375, (159, 42, 99)),
    (0.500, (212, 72, 66)),
    (0.625, (245, 125, 21)),
    (0.750, (250, 193, 39)),
    (0.875, (252, 255, 164)),
    (1.000, (255, 255, 255)),
)


def ramp_color(t: float) -> str:
    """Map t in [0, 1] to an #rrggbb color on the black-to-yellow/white ramp."""
    t = min(1.0, max(0.0, t))
    for (t0, c0), (t1, c1) in zip(_RAMP, _RAMP[1:]):
        if t <= t1:
            frac = 0.0 if t1 == t0 else (t - t0) / (t1 - t0)
            rgb = tuple(round(a + frac * (b - a)) for a, b in zip(c0, c1))
            return "#%02x%02x%02x" % rgb
    return "#ffffff"


def heatmap_matrix(cells: dict[tuple[int, ...], float],
                   bins: tuple[int, int]) -> list[list[float | None]]:
    """Objective matrix with rows = second dimension descending, cols = first
    dimension ascending; None marks empty niches."""
    rows = []
    for j in range(bins[1] - 1, -1, -1):
        rows.append([cells.get((i, j)) for i in range(bins[0])])
    return rows


def write_heatmap_csv(matrix: list[list[float | None]], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for row in matrix:
            writer.writerow(["" if v is None else _fmt(v) for v in row])


def render_heatmap_svg(cells: dict[tuple[int, ...], float], bins: tuple[int, int],
                       path, value_range: tuple[float, float] | None = None,
                       cell_px: int = 12) -> None:
    """Write the archive as an SVG grid, empty niches in the background color.

    Colors are normalized to the present objectives' [min, max] unless
    ``value_range`` overrides it for cross-run comparability.
    """
    width, height = bins[0] * cell_px, bins[1] * cell_px
    values = list(cells.values())
    if value_range is not None:
        lo, hi = value_range
    elif values:
        lo, hi = min(values), max(values)
    else:
        lo, hi = 0.0, 1.0
    span = hi - lo
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="#d9d9d9"/>',
    ]
    for (i, j), value in sorted(cells.items()):
        t = 1.0 if span <= 0 else (value - lo) / span
        x = i * cell_px
        y = (bins[1] - 1 - j) * cell_px  # feature axis points up
        parts.append(
            f'<rect x="{x}" y="{y}" width="{cell_px}" height="{cell_px}" '
            f'fill="{ramp_color(t)}"/>'
        )
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(parts) + "\n")


def render_heatmap(archive_cells: dict[tuple[int, ...], float],
                   bins: tuple[int, ...], svg_path, csv_path=None,
                   value_range: tuple[float, float] | None = None) -> None:
    """Render a 2-d archive snapshot to SVG plus a companion matrix CSV."""
    if len(bins) != 2:
        raise UsageError(f"heatmaps need a 2-d behavior space, got {len(bins)} dims")
    for (i, j) in archive_cells:
        if not (0 <= i < bins[0] and 0 <= j < bins[1]):
            raise UsageError(f"cell ({i}, {j}) outside a {bins[0]}x{bins[1]} grid")
    render_heatmap_svg(archive_cells, bins, svg_path, value_range)
    if csv_path is not None:
        write_heatmap_csv(heatmap_matrix(archive_cells, bins), csv_path)


def archive_objective_cells(archive: GridArchive) -> dict[tuple[int, ...], float]:
    return {key: elite.objective for key, elite in archive.cells.items()}
