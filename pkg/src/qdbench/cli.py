"""Command-line entry points for runs, heatmaps and the problem registry.

Exit codes: 0 on success, 1 for usage errors, 2 for runtime faults (evaluator
crashes, protocol violations, I/O failures). Diagnostics go to stderr.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .archive import read_archive_csv, write_archive_csv
from .errors import EvaluationFault, UsageError
from .problems import (
    ExternalEvaluator,
    bind_external,
    get_problem,
    grid_sphere_niche_optima,
    list_problem_ids,
    paper_problem_ids,
    peaks_niche_optima,
    synthetic_problem,
    tabular_evaluator,
    tabular_load,
)
from .reporting import (
    aggregate,
    archive_objective_cells,
    render_heatmap,
    write_aggregate_csv,
    write_metrics_csv,
)
from .scheduler import RunSpec, optimizer_spec_from_json, preset, run

EVALUATOR_ENV = "QDO_EVALUATOR_CMD"


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on bad flags; the CLI contract reserves 2 for faults."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qdbench", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_run = sub.add_parser("run", help="execute replicated optimization runs")
    p_run.add_argument("--problem", required=True,
                       help="problem id (see list-problems)")
    p_run.add_argument("--optimizer", default="map_elites",
                       help="preset name or path to an optimizer config JSON")
    p_run.add_argument("--iterations", type=int, default=1000)
    p_run.add_argument("--batch", type=int, default=100)
    p_run.add_argument("--seed", type=int, default=0, help="seed of the first replication")
    p_run.add_argument("--replications", type=int, default=1)
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--workers", type=int, default=1,
                       help="evaluation worker threads (results are identical)")
    p_run.add_argument("--table", default=None,
                       help="sample-table CSV to bind as the evaluator")

    p_heat = sub.add_parser("heatmap", help="render an archive CSV as SVG + matrix CSV")
    p_heat.add_argument("--archive", required=True, help="archive CSV from a run")
    p_heat.add_argument("--out", required=True, help="output SVG path")
    p_heat.add_argument("--csv", default=None,
                        help="companion matrix CSV path (default: <out>.csv)")
    p_heat.add_argument("--bins", default=None,
                        help="grid size as BX,BY (default: inferred from bin indices)")
    p_heat.add_argument("--range", dest="value_range", default=None,
                        help="color normalization as LO:HI (default: archive min/max)")

    sub.add_parser("list-problems", help="print the problem registry")

    p_oracle = sub.add_parser("oracle", help="brute-force per-niche optima of a synthetic problem")
    p_oracle.add_argument("--problem", required=True, help="grid_sphere_d<N> or peaks_d<N>")
    p_oracle.add_argument("--resolution", type=int, default=200,
                          help="scan resolution per behavior dimension")
    p_oracle.add_argument("--out", default=None, help="output CSV (default: stdout)")
    return parser


def _load_optimizer(name_or_path: str, batch: int):
    if name_or_path.endswith(".json") or os.sep in name_or_path:
        with open(name_or_path, encoding="utf-8") as fh:
            return optimizer_spec_from_json(json.load(fh), batch=batch)
    return preset(name_or_path, batch=batch)


def _bind_problem(args):
    """Resolve the problem id and attach an evaluator when needed.

    Returns (problem, closer) where closer shuts down an external evaluator.
    """
    problem = get_problem(args.problem)
    if problem.evaluator is not None or problem.batch_evaluator is not None:
        return problem, lambda: None
    if args.table:
        table = tabular_load(args.table)
        if table.m != problem.m:
            raise UsageError(
                f"table {args.table} has m={table.m}, problem needs m={problem.m}"
            )
        if table.d != problem.search_space.d:
            raise UsageError(
                f"table {args.table} has d={table.d}, problem needs d={problem.search_space.d}"
            )
        return problem.bound(tabular_evaluator(table, problem.search_space)), lambda: None
    cmd = os.environ.get(EVALUATOR_ENV)
    if not cmd:
        raise UsageError(
            f"problem {problem.id} needs an evaluator: pass --table or set {EVALUATOR_ENV}"
        )
    evaluator = ExternalEvaluator(cmd)
    return bind_external(problem, evaluator), evaluator.close


def cmd_run(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.replications < 1:
        raise UsageError("--replications must be >= 1")
    problem, closer = _bind_problem(args)
    try:
        optimizer = _load_optimizer(args.optimizer, args.batch)
        reports = []
        for r in range(args.replications):
            seed = args.seed + r
            spec = RunSpec(problem=problem, optimizer=optimizer,
                           iterations=args.iterations, seed=seed)
            report = run(spec, workers=args.workers)
            write_metrics_csv(report, out_dir / f"metrics_seed{seed}.csv")
            write_archive_csv(report.archive, problem.search_space.names,
                              out_dir / f"archive_seed{seed}.csv")
            final = report.final()
            print(
                f"seed {seed}: coverage {100 * final.coverage:.2f}% "
                f"qd_score {final.qd_score:.4f} max {final.max_objective:.4f} "
                f"({report.wall_time:.1f}s)"
            )
            reports.append(report)
        if len(reports) >= 2:
            agg = aggregate(reports)
            write_aggregate_csv(agg, out_dir / "aggregate.csv")
            row = agg.summary_row()
            print(
                f"mean over {row['replications']} seeds: "
                f"coverage {row['coverage_pct']:.2f}% "
                f"qd_score {row['qd_score']:.4f} max {row['max_objective']:.4f}"
            )
    finally:
        closer()
    return 0


def cmd_heatmap(args) -> int:
    rows = read_archive_csv(args.archive)
    cells = {}
    for row in rows:
        if len(row["bins"]) != 2:
            raise UsageError("heatmaps need a 2-d behavior space")
        cells[row["bins"]] = row["objective"]
    if args.bins:
        try:
            bx, by = (int(v) for v in args.bins.split(","))
        except ValueError:
            raise UsageError(f"--bins expects BX,BY, got {args.bins!r}")
    elif cells:
        bx = max(i for i, _ in cells) + 1
        by = max(j for _, j in cells) + 1
    else:
        raise UsageError("archive CSV has no rows; pass --bins to size the grid")
    value_range = None
    if args.value_range:
        try:
            lo, hi = (float(v) for v in args.value_range.split(":"))
        except ValueError:
            raise UsageError(f"--range expects LO:HI, got {args.value_range!r}")
        value_range = (lo, hi)
    csv_path = args.csv if args.csv else str(args.out) + ".csv"
    render_heatmap(cells, (bx, by), args.out, csv_path, value_range)
    print(f"wrote {args.out} and {csv_path}")
    return 0


def cmd_list_problems(args) -> int:
    for pid in paper_problem_ids():
        print(pid)
    print("grid_sphere_d<N>  (N >= 3; e.g. grid_sphere_d6)")
    print("peaks_d<N>        (N >= 2; e.g. peaks_d6)")
    return 0


def cmd_oracle(args) -> int:
    problem = synthetic_problem(args.problem)
    bins = tuple(dim.bins for dim in problem.archive_spec.dims)
    if problem.id.startswith("grid_sphere"):
        table = grid_sphere_niche_optima(bins)
    else:
        table = peaks_niche_optima(bins, resolution=args.resolution)
    lines = ["bin_0,bin_1,objective"]
    for i in range(bins[0]):
        for j in range(bins[1]):
            lines.append(f"{i},{j},{float(table[i, j])!r}")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


_COMMANDS = {
    "run": cmd_run,
    "heatmap": cmd_heatmap,
    "list-problems": cmd_list_problems,
    "oracle": cmd_oracle,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"qdbench: error: {exc}", file=sys.stderr)
        return 1
    except (EvaluationFault, OSError) as exc:
        print(f"qdbench: fault: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
