"""Command-line frontend: solve scenarios, run benchmarks, emit plot data.

Exit codes: 0 on success (solve: converged), 2 when a solve completed
without converging (the document is still written, flagged), 1 on usage or
definition errors.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import bench as bench_mod
from .document import document_from_result, read_document, write_document, \
    write_plot_data, write_svg
from .errors import DocumentFormatError, GameDefinitionError, NumericalError
from .scenarios import BUILTIN_SCENARIOS, load_scenario
from .solver import solve

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 2


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on usage errors; the CLI contract
    # reserves 2 for completed-but-not-converged solves, so remap to 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_ERROR)


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="ilqnash",
        description="Define and solve N-player differential games to "
                    "approximate feedback-Nash equilibria.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    ps = sub.add_parser(
        "solve", help="solve a scenario and write a trajectory document",
        description=f"Scenario may be a built-in name {list(BUILTIN_SCENARIOS)} "
                    "or a path to a YAML scenario config.")
    ps.add_argument("scenario", help="built-in scenario name or config path")
    ps.add_argument("--horizon", type=int, default=None, help="override horizon (steps)")
    ps.add_argument("--dt", type=float, default=None, help="override timestep (s)")
    ps.add_argument("--mode", choices=("md", "ad"), default=None,
                    help="derivative mode: manual (md) or automatic (ad)")
    ps.add_argument("--max-iters", type=int, default=None, help="iteration cap")
    ps.add_argument("--tol", type=float, default=None,
                    help="convergence tolerance (max-norm state change)")
    ps.add_argument("--output", default=None,
                    help="document path (default <scenario>_trajectory.json)")
    ps.add_argument("--verbose", action="store_true",
                    help="print per-iteration diagnostics")

    pb = sub.add_parser("bench", help="run the timing/convergence benchmark harness")
    pb.add_argument("--problems", default=",".join(bench_mod.BENCH_PROBLEMS),
                    help="comma-separated subset of "
                         f"{list(bench_mod.BENCH_PROBLEMS)}")
    pb.add_argument("--mode", choices=("md", "ad", "both"), default="both")
    pb.add_argument("--reps", type=int, default=5, help="timed repetitions")
    pb.add_argument("--samples", type=int, default=10,
                    help="jittered initial conditions per convergence fraction")
    pb.add_argument("--seed", type=int, default=0, help="jitter RNG seed")
    pb.add_argument("--output", default="benchmark.csv", help="CSV output path")

    pp = sub.add_parser("plotdata", help="emit plot-ready data from a document")
    pp.add_argument("document", help="trajectory document path")
    pp.add_argument("--output", default=None,
                    help="CSV output path (default <document>_plot.csv)")
    pp.add_argument("--svg", default=None,
                    help="optionally also write an SVG of the planar paths")
    return parser


def _iteration_printer(diag):
    scale = "rejected" if diag.step_scale is None else f"{diag.step_scale:g}"
    costs = " ".join(f"{c:.4f}" for c in diag.player_costs)
    print(f"iter {diag.iteration:3d}  step {scale:>8}  "
          f"change {diag.trajectory_change:9.3e}  costs [{costs}]")


def _cmd_solve(args) -> int:
    scenario = load_scenario(args.scenario, horizon=args.horizon, dt=args.dt)
    config = scenario.solver
    if args.mode is not None:
        config = replace(config, mode=args.mode)
    if args.max_iters is not None:
        config = replace(config, max_iterations=args.max_iters)
    if args.tol is not None:
        config = replace(config, convergence_tolerance=args.tol)

    result = solve(
        scenario.problem, x0=scenario.initial_state, config=config,
        on_iteration=_iteration_printer if args.verbose else None,
    )
    output = args.output or f"{scenario.name}_trajectory.json"
    doc = document_from_result(scenario, result, config.mode)
    write_document(doc, output)

    status = "converged" if result.converged else f"NOT converged ({result.termination})"
    print(f"{scenario.name}: {status} after {result.iterations} iterations "
          f"({result.wall_time_ms:.1f} ms); document written to {output}")
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def _cmd_bench(args) -> int:
    problems = [p.strip() for p in args.problems.split(",") if p.strip()]
    modes = ("md", "ad") if args.mode == "both" else (args.mode,)
    records = bench_mod.run_benchmark(
        problems=problems, modes=modes, reps=args.reps, samples=args.samples,
        seed=args.seed,
    )
    bench_mod.write_csv(records, args.output)
    print(bench_mod.records_to_csv(records), end="")
    print(f"benchmark CSV written to {args.output}")
    return EXIT_OK


def _cmd_plotdata(args) -> int:
    doc = read_document(args.document)
    output = args.output or f"{Path(args.document).stem}_plot.csv"
    write_plot_data(doc, output)
    print(f"plot data written to {output}")
    if args.svg:
        write_svg(doc, args.svg)
        print(f"SVG written to {args.svg}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "solve":
            return _cmd_solve(args)
        if args.command == "bench":
            return _cmd_bench(args)
        return _cmd_plotdata(args)
    except (GameDefinitionError, DocumentFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
