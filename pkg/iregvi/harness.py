"""Experiment runner: problem construction, solver dispatch and output files."""

from __future__ import annotations

import csv
import logging
import math
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any

import numpy as np
import numpy.typing as npt

from .baseline_isr import IsrCvxConfig, outer_iters_for_budget, run_isr_cvx
from .config import build_experiment_spec, check_compatibility, expand_grid
from .const import (
    BASE_CSV_COLUMNS,
    DEFAULT_ALPHA_TILDE,
    DEFAULT_B,
    DEFAULT_ETA0,
    LOG_EXPERIMENT_DONE,
    LOG_EXPERIMENT_START,
)
from .coordinator import MetricObserver
from .diagnostics import build_run_summary, spec_payload, write_summary
from .errors import ConfigValidationError, ContractViolationError, DivergenceError
from .instances import (
    build_traffic,
    build_zero_sum,
    random_selection_qp,
    zero_sum_instance,
)
from .linops import Point
from .metrics import build_observers
from .models import ExperimentSpec, IterateTrace, RunSummary
from .plotting import plot_trace
from .problems import BilevelVIProblem
from .solver_ipreg import (
    Adaptive,
    IprEgConfig,
    KnownThreshold,
    inner_iterations,
    run_ipr_eg,
)
from .solver_iregmm import IregMmConfig, run_ireg_mm
from .solver_iregsm import (
    Constant,
    Diminishing,
    IregSmConfig,
    LogConstant,
    Regime,
    ThresholdConstant,
    run_ireg_sm,
)
from .utils import LogSchedule, config_hash, format_cell

_LOGGER = logging.getLogger(__name__)

SolverConfig = IregMmConfig | IregSmConfig | IprEgConfig | IsrCvxConfig


@dataclass(frozen=True)
class ExperimentSetup:
    """Problem of an experiment and its recommended stepsize, if any."""

    problem: BilevelVIProblem
    recommended_gamma: float | None = None


def build_experiment(experiment: str, seed: int) -> ExperimentSetup:
    """Construct the problem behind an experiment name.

    Raises:
        ConfigValidationError: If the experiment is unknown.
    """
    match experiment:
        case "zs_best" | "zs_worst":
            gamma = zero_sum_instance().recommended_gamma
            return ExperimentSetup(build_zero_sum(best=experiment == "zs_best"), gamma)
        case "e1":
            return ExperimentSetup(build_traffic(1.0)[0])
        case "e2":
            return ExperimentSetup(build_traffic(1.2)[0])
        case "e3":
            return ExperimentSetup(build_traffic(1.2, negate_objective=True)[0])
        case "custom":
            return ExperimentSetup(random_selection_qp(seed).build())
    raise ConfigValidationError(f"Unknown experiment: {experiment}")


# =============================================================================
# Solver configuration
# =============================================================================


def _extragradient_gamma(problem: BilevelVIProblem, eta: float) -> float:
    """Stepsize with gamma^2 (L_F^2 + eta^2 L_H^2) = 0.25."""
    l_f = problem.inner_map.lipschitz_or(0.0)
    l_h = problem.outer_map.lipschitz_or(0.0)
    scale = math.hypot(l_f, eta * l_h)
    return 0.5 / scale if scale > 0 else 1.0


def _half_inverse_lipschitz(problem: BilevelVIProblem) -> float:
    l_f = problem.inner_map.lipschitz_or(0.0)
    return 1.0 / (2.0 * l_f) if l_f > 0 else 1.0


def _regime(options: dict[str, Any]) -> Regime:
    name = options.get("regime", "diminishing")
    if name == "diminishing":
        return Diminishing(options.get("eta0_u"), options.get("eta0_l"))
    if name == "log_constant":
        return LogConstant(options.get("p", 1.0))
    if "eta" not in options:
        raise ConfigValidationError(f"Regime {name} needs eta")
    if name == "threshold":
        return ThresholdConstant(options["eta"])
    return Constant(options["eta"])


def iterations_for_budget(solver: str, budget: int, config: SolverConfig) -> int:
    """Iteration count of a solver that spends at most budget projections.

    Raises:
        ConfigValidationError: If the budget does not cover the minimum run.
    """
    if solver in ("ireg_mm", "ireg_sm"):
        count = budget // 2
    elif solver == "isr_cvx":
        count = outer_iters_for_budget(budget)
    elif isinstance(config, IprEgConfig):
        count, spent = 0, 0
        while spent + 2 * inner_iterations(config, count) <= budget:
            spent += 2 * inner_iterations(config, count)
            count += 1
    else:
        raise ConfigValidationError(f"Unknown solver: {solver}")
    minimum = 2 if solver == "ipr_eg" else 1
    if count < minimum:
        raise ConfigValidationError(f"Budget {budget} is too small for {solver}")
    return count


def _with_iterations(config: SolverConfig, count: int) -> SolverConfig:
    if isinstance(config, IregMmConfig | IregSmConfig):
        return replace(config, max_iters=count)
    return replace(config, outer_iters=count)


def make_solver_config(spec: ExperimentSpec, setup: ExperimentSetup) -> SolverConfig:
    """Solver configuration from the spec's options and the experiment defaults.

    Raises:
        ConfigValidationError: On missing or invalid options.
    """
    options = dict(spec.options)
    problem = setup.problem
    placeholder = spec.iters if spec.iters is not None else 2
    enforce = options.get("enforce_stepsize", True)
    config: SolverConfig
    match spec.solver:
        case "ireg_mm":
            eta0 = options.get("eta0", DEFAULT_ETA0)
            constant = options.get("constant_eta")
            gamma = options.get("gamma") or setup.recommended_gamma
            config = IregMmConfig(
                gamma=gamma or _extragradient_gamma(problem, constant or eta0),
                eta0=eta0,
                b=options.get("b", DEFAULT_B),
                max_iters=placeholder,
                constant_eta=constant,
                enforce_stepsize=enforce,
            )
        case "ireg_sm":
            gamma = options.get("gamma") or setup.recommended_gamma
            config = IregSmConfig(
                gamma=gamma or _half_inverse_lipschitz(problem),
                regime=_regime(options),
                max_iters=placeholder,
                objective_mode=options.get(
                    "objective_mode", problem.objective is not None
                ),
                enforce_stepsize=enforce,
            )
        case "ipr_eg":
            if options.get("mode") == "known_threshold":
                if "eta" not in options:
                    raise ConfigValidationError("known_threshold mode needs eta")
                mode: Adaptive | KnownThreshold = KnownThreshold(
                    options["eta"], options.get("tau")
                )
            else:
                mode = Adaptive(options.get("M", 1.0))
            gamma = options.get("gamma_inner") or setup.recommended_gamma
            config = IprEgConfig(
                outer_iters=placeholder,
                gamma_inner=gamma or _half_inverse_lipschitz(problem),
                gamma_hat=options.get("gamma_hat"),
                mode=mode,
                enforce_stepsize=enforce,
            )
        case "isr_cvx":
            config = IsrCvxConfig(
                outer_iters=placeholder,
                eta0=options.get("eta0", DEFAULT_ETA0),
                b_tilde=options.get("b_tilde", DEFAULT_B),
                alpha_tilde=options.get("alpha_tilde", DEFAULT_ALPHA_TILDE),
                inner_step=options.get("inner_step"),
            )
        case _:
            raise ConfigValidationError(f"Unknown solver: {spec.solver}")

    if spec.iters is None:
        if spec.budget is None:
            raise ConfigValidationError("Either iters or budget is required")
        count = iterations_for_budget(spec.solver, spec.budget, config)
        config = _with_iterations(config, count)
    if isinstance(config, IprEgConfig) and config.gamma_hat is None:
        config = _clamp_outer_step(problem, config)
    return config


def _clamp_outer_step(problem: BilevelVIProblem, config: IprEgConfig) -> IprEgConfig:
    """Replace 1/sqrt(K) by 1/(2 L) when the default breaks gamma_hat <= 1/(2 L)."""
    objective = problem.objective
    if objective is None:
        return config
    ceiling = 1.0 / (2.0 * objective.smoothness_L)
    if config.outer_step > ceiling:
        _LOGGER.info("Using gamma_hat = 1/(2 L) = %.6g on %s", ceiling, problem.name)
        return replace(config, gamma_hat=ceiling)
    return config


def execute(
    solver: str,
    problem: BilevelVIProblem,
    config: SolverConfig,
    observers: Sequence[MetricObserver] = (),
    schedule: LogSchedule | None = None,
    record_timing: bool = True,
) -> tuple[IterateTrace, Point | None]:
    """Run a configured solver; the window-best iterate is returned for ipr_eg."""
    if isinstance(config, IregMmConfig):
        return run_ireg_mm(problem, config, observers, schedule, record_timing), None
    if isinstance(config, IregSmConfig):
        return run_ireg_sm(problem, config, observers, schedule, record_timing), None
    if isinstance(config, IprEgConfig):
        return run_ipr_eg(problem, config, observers, schedule, record_timing)
    if isinstance(config, IsrCvxConfig):
        return run_isr_cvx(problem, config, observers, schedule, record_timing), None
    raise ConfigValidationError(f"Unknown solver: {solver}")


# =============================================================================
# Output
# =============================================================================


def write_trace_csv(trace: IterateTrace, metrics: Sequence[str], path: Path) -> Path:
    """Write one row per stored record with round-trip exact floats."""
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow([*BASE_CSV_COLUMNS, *metrics])
        for record in trace.records:
            row: list[Any] = [
                record.k,
                record.eta,
                record.projections,
                record.wall_nanos,
            ]
            row.extend(record.metrics.get(name, math.nan) for name in metrics)
            writer.writerow([format_cell(value) for value in row])
    return path


def run_experiment(spec: ExperimentSpec) -> RunSummary:
    """Run one experiment and write its CSV, summary and plot.

    A diverged run keeps its partial trace and is flagged in the summary.

    Raises:
        ConfigValidationError: If the spec or the solver configuration is
            invalid.
    """
    check_compatibility(spec.experiment, spec.solver)
    digest = config_hash(spec_payload(spec))
    _LOGGER.info(LOG_EXPERIMENT_START, spec.experiment, spec.solver, digest)
    setup = build_experiment(spec.experiment, spec.seed)
    config = make_solver_config(spec, setup)
    observers = build_observers(setup.problem, spec.metrics, seed=spec.seed)
    schedule = LogSchedule(mode=spec.log_mode)  # type: ignore[arg-type]

    best: Point | None = None
    try:
        trace, best = execute(
            spec.solver,
            setup.problem,
            config,
            observers,
            schedule,
            spec.record_timing,
        )
    except DivergenceError as err:
        trace = err.trace or IterateTrace(
            solver=spec.solver, diverged=True, message=str(err)
        )

    spec.output_dir.mkdir(parents=True, exist_ok=True)
    stem = spec.output_dir / f"{spec.experiment}_{spec.solver}"
    summary = build_run_summary(spec, trace, best)
    summary["csv_path"] = str(
        write_trace_csv(trace, spec.metrics, stem.with_suffix(".csv"))
    )
    if not spec.csv_only:
        svg = plot_trace(
            trace,
            spec.metrics,
            stem.with_suffix(".svg"),
            title=f"{spec.experiment} / {spec.solver}",
        )
        if svg is not None:
            summary["svg_path"] = str(svg)
    write_summary(summary, stem.with_suffix(".summary.json"))
    _LOGGER.info(LOG_EXPERIMENT_DONE, spec.experiment, spec.solver, summary["csv_path"])
    return summary


def run_experiments(specs: Sequence[ExperimentSpec], jobs: int = 1) -> list[RunSummary]:
    """Run specs, concurrently in worker processes when jobs > 1."""
    if jobs <= 1 or len(specs) <= 1:
        return [run_experiment(spec) for spec in specs]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(run_experiment, specs))


def grid_specs(
    base: dict[str, Any], grid: dict[str, Sequence[str]]
) -> list[ExperimentSpec]:
    """One spec per grid cell, each writing under its own hashed subdirectory."""
    specs = []
    for cell in expand_grid(grid):
        spec = build_experiment_spec(base, cell)
        cell_dir = spec.output_dir / config_hash(spec_payload(spec))[:8]
        specs.append(replace(spec, output_dir=cell_dir))
    _LOGGER.info("Expanded grid into %d runs", len(specs))
    return specs


# =============================================================================
# Rate fitting
# =============================================================================


def fit_slope(
    ks: npt.ArrayLike, values: npt.ArrayLike, geometric: bool = False
) -> float:
    """Least-squares slope of log(value) against log(k), or against k.

    Raises:
        ContractViolationError: On fewer than two points or non-positive values.
    """
    k = np.asarray(ks, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    if k.size < 2 or k.size != v.size:
        raise ContractViolationError("Need at least two matching points")
    if not np.all(np.isfinite(v)) or np.any(v <= 0):
        raise ContractViolationError("Metric must be positive over the window")
    x = k if geometric else np.log(k)
    slope, _ = np.polyfit(x, np.log(v), 1)
    return float(slope)


def fit_rate_slope(
    trace: IterateTrace,
    metric: str,
    window: tuple[int, int],
    geometric: bool = False,
) -> float:
    """Empirical rate of a logged metric over window = (k_lo, k_hi)."""
    ks, values = trace.metric_series(metric)
    lo, hi = window
    mask = (ks >= lo) & (ks <= hi)
    return fit_slope(ks[mask], values[mask], geometric)

