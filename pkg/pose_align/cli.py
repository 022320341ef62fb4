"""Command line interface: ``align run|bench|plot|validate``."""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from .config import BENCH_DIR, CONTROLLER_LABELS, DEFAULT_SEEDS, RESULTS_DIR
from .errors import AlignmentError
from .harness import run_bench, run_trial
from .plotting import emit_plots
from .records import read_log, write_log
from .scenario import load_scenario
from .utils import setup_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 2


def cmd_run(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    seed = args.seed if args.seed is not None else scenario.seeds[0]
    record = run_trial(scenario, seed)
    out_dir = Path(args.out)
    path = write_log(record, out_dir / f"{record.stem}.csv")
    if args.plots:
        emit_plots([record], out_dir)

    s = record.summary
    status = f"converged in {s.duration_s:.2f} s" if s.converged else "NOT converged"
    print(f"{scenario.name} ({CONTROLLER_LABELS[scenario.controller]}, seed {seed}): {status}; "
          f"final Δd {s.final_dd_mm:.2f} mm, Δθ {s.final_dtheta_deg:.2f} deg, "
          f"path {s.path_length_mm:.0f} mm -> {path}")
    if args.strict and not s.converged:
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    seeds = list(range(args.seeds)) if args.seeds is not None else None
    result = run_bench(args.scenario_dir, seeds, args.out, jobs=args.jobs)
    if args.plots:
        emit_plots(result.records, Path(args.out) / "plots")
    print(result.report_text, end="")
    return EXIT_OK


def cmd_plot(args: argparse.Namespace) -> int:
    records = [read_log(path) for path in args.records]
    for path in emit_plots(records, args.out):
        print(path)
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    print(f"{args.scenario}: OK ({scenario.name}: {scenario.controller}/"
          f"{scenario.resolved_controller_profile}, plant {scenario.plant_profile}, "
          f"{len(scenario.seeds)} seeds, condition {scenario.condition_key()[:12]})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="align",
        description="Simulated end-effector alignment trials for the step-and-settle "
                    "and hypersphere-clamp controllers.",
    )
    parser.add_argument("--log-level", default=None,
                        help="logging level (default: ALIGN_LOG_LEVEL or INFO)")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one trial of a scenario")
    run.add_argument("scenario", type=Path, help="scenario YAML file")
    run.add_argument("--seed", type=int, default=None, help="trial seed (default: first scenario seed)")
    run.add_argument("--out", type=Path, default=RESULTS_DIR, help="output directory")
    run.add_argument("--strict", action="store_true", help="exit with status 2 when the trial does not converge")
    run.add_argument("--plots", action="store_true", help="also write error/velocity/trajectory plots")
    run.set_defaults(func=cmd_run)

    bench = sub.add_parser("bench", help="run every scenario in a directory and compare controllers")
    bench.add_argument("scenario_dir", type=Path, nargs="?", default=BENCH_DIR,
                       help="directory of scenario files (default: the shipped bench set)")
    bench.add_argument("--seeds", type=int, default=len(DEFAULT_SEEDS),
                       help="number of seeds per scenario, 0..K-1 (default: %(default)s)")
    bench.add_argument("--out", type=Path, default=RESULTS_DIR / "bench")
    bench.add_argument("--jobs", type=int, default=1, help="worker processes (default: 1)")
    bench.add_argument("--plots", action="store_true")
    bench.set_defaults(func=cmd_bench)

    plot = sub.add_parser("plot", help="plot existing trial logs")
    plot.add_argument("records", type=Path, nargs="+", help="trial CSV logs")
    plot.add_argument("--out", type=Path, required=True)
    plot.set_defaults(func=cmd_plot)

    validate = sub.add_parser("validate", help="check a scenario file")
    validate.add_argument("scenario", type=Path)
    validate.set_defaults(func=cmd_validate)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    try:
        return args.func(args)
    except (AlignmentError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
