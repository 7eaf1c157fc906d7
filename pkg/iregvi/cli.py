"""Command-line interface: ``iregvi run``, ``iregvi grid`` and ``iregvi verify``."""

from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Sequence
from typing import Any

from .acceptance import CRITERIA, run_acceptance_suite
from .config import (
    build_experiment_spec,
    default_grid,
    load_config_file,
    load_grid_file,
    parse_overrides,
)
from .const import (
    EXIT_ACCEPTANCE,
    EXIT_DIVERGENCE,
    EXIT_OK,
    EXIT_USAGE,
    EXPERIMENTS,
    SOLVERS,
)
from .diagnostics import format_summary
from .errors import ConfigValidationError, IregviError
from .harness import grid_specs, run_experiments
from .models import RunSummary

_LOGGER = logging.getLogger(__name__)

SUBOPTIMALITY_HELP = (
    "suboptimality is ||z_k - z_(k-1)|| for the reported sequence z_k: the "
    "averaged iterate for ireg_mm and ireg_sm, the outer iterate for ipr_eg "
    "and isr_cvx"
)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", help="key = value file, overridden by flags")
    parser.add_argument("--iters", type=int, help="iterations (outer for two-loop)")
    parser.add_argument("--budget", type=int, help="projection budget for iters")
    parser.add_argument("--out", dest="output_dir", help="output directory")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--jobs", type=int, default=1, help="parallel runs")
    parser.add_argument("--metrics", help="comma-separated metric names")
    parser.add_argument("--log-mode", choices=("every", "log", "final"))
    parser.add_argument("--csv-only", action="store_true", help="skip SVG plots")
    parser.add_argument(
        "--no-timing", action="store_true", help="write wall_nanos = 0"
    )
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="solver option, e.g. --set eta0=0.01",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="iregvi",
        description="Iteratively regularized solvers for bilevel VIs.",
        epilog=SUBOPTIMALITY_HELP,
    )
    parser.add_argument(
        "--log-level",
        default="WARNING",
        choices=("DEBUG", "INFO", "WARNING", "ERROR"),
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="run solvers on one experiment")
    _add_common(run)
    run.add_argument(
        "--solver",
        dest="solvers",
        action="append",
        choices=SOLVERS,
        help="repeat to compare solvers",
    )

    grid = commands.add_parser("grid", help="sweep solver options")
    _add_common(grid)
    grid.add_argument("--solver", dest="solvers", action="append", choices=SOLVERS)
    grid.add_argument("--grid", help="key = v1, v2 file; eta0 x b by default")

    verify = commands.add_parser("verify", help="run the acceptance suite")
    verify.add_argument(
        "--only",
        action="append",
        default=[],
        help="run only checks whose name contains this text",
    )
    return parser


def _layers(args: argparse.Namespace) -> tuple[dict[str, Any], ...]:
    file_values = load_config_file(args.config) if args.config else {}
    flags: dict[str, Any] = {
        "experiment": args.experiment,
        "iters": args.iters,
        "budget": args.budget,
        "output_dir": args.output_dir,
        "seed": args.seed,
        "metrics": args.metrics,
        "log_mode": args.log_mode,
        "csv_only": True if args.csv_only else None,
        "record_timing": False if args.no_timing else None,
    }
    return file_values, parse_overrides(args.overrides), flags


def _solvers(
    args: argparse.Namespace, layers: Sequence[dict[str, Any]]
) -> list[str]:
    if args.solvers:
        return list(args.solvers)
    for layer in reversed(layers):
        if layer.get("solver"):
            return [layer["solver"]]
    raise ConfigValidationError("Missing required key: solver")


def _report(summaries: Sequence[RunSummary]) -> int:
    code = EXIT_OK
    for summary in summaries:
        print(format_summary(summary))
        if summary["diverged"]:
            code = EXIT_DIVERGENCE
    return code


def _run(args: argparse.Namespace) -> int:
    layers = _layers(args)
    specs = [
        build_experiment_spec(*layers, solver=solver)
        for solver in _solvers(args, layers)
    ]
    return _report(run_experiments(specs, args.jobs))


def _grid(args: argparse.Namespace) -> int:
    layers = _layers(args)
    specs = []
    for solver in _solvers(args, layers):
        grid = load_grid_file(args.grid) if args.grid else default_grid(solver)
        base: dict[str, Any] = {}
        for layer in layers:
            base.update({k: v for k, v in layer.items() if v is not None})
        base["solver"] = solver
        specs.extend(grid_specs(base, grid))
    return _report(run_experiments(specs, args.jobs))


def _verify(args: argparse.Namespace) -> int:
    criteria = tuple(
        check
        for check in CRITERIA
        if not args.only or any(text in check.__name__ for text in args.only)
    )
    results = run_acceptance_suite(criteria)
    for result in results:
        status = "PASS" if result.passed else "FAIL"
        print(f"{status}  {result.name}: {result.detail}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_ACCEPTANCE


def main(argv: Sequence[str] | None = None) -> int:
    """Entry point; returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=args.log_level, format="%(asctime)s %(levelname)s %(name)s: %(message)s"
    )
    handlers = {"run": _run, "grid": _grid, "verify": _verify}
    try:
        return handlers[args.command](args)
    except ConfigValidationError as err:
        print(f"iregvi: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except IregviError as err:
        _LOGGER.error("%s", err)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
