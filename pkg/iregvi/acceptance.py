"""Acceptance checks run by ``iregvi verify``.

Each check runs a small experiment and compares it against a closed-form
envelope or an independent oracle. Checks return a CriterionResult and
never raise; an unexpected error fails the check with its message.
"""

from __future__ import annotations

import logging
import math
import tempfile
import time
from collections.abc import Callable
from functools import cache
from pathlib import Path

import numpy as np

from .config import build_experiment_spec
from .const import DEFAULT_GAP_SAMPLES, RESOLVABLE_DISTANCE
from .errors import IregviError
from .harness import (
    build_experiment,
    execute,
    fit_slope,
    make_solver_config,
    run_experiment,
)
from .instances import (
    build_traffic,
    build_zero_sum,
    random_selection_qp,
    selection_sampling_box,
    zero_sum_instance,
)
from .linops import Box
from .metrics import (
    InfeasibilityMetric,
    InnerDistanceMetric,
    InnerGapMetric,
    ObjectiveGapMetric,
    OuterDistanceMetric,
    OuterGapMetric,
)
from .models import CriterionResult, IterateTrace
from .problems import VectorMapping, hessian_quadratic_form, monotonicity_witness
from .solver_ipreg import Adaptive, IprEgConfig, run_ipr_eg
from .solver_iregmm import IregMmConfig, run_ireg_mm
from .solver_iregsm import (
    Diminishing,
    IregSmConfig,
    ThresholdConstant,
    WeightedAverageState,
    direct_weighted_average,
    run_ireg_sm,
)
from .theory import (
    geometric_distance_envelope,
    geometric_rate,
    iregmm_inner_gap_bound,
    iregmm_outer_gap_bound,
    iregsm_diminishing_objective_bound,
    ipr_adaptive_infeasibility_envelope,
)
from .utils import LogSchedule

_LOGGER = logging.getLogger(__name__)

IREGMM_ITERS = 100_000
IREGSM_ITERS = 10_000
THRESHOLD_ITERS = 2_000
THRESHOLD_ETA = 0.03
IPR_OUTER_ITERS = 60
BUDGET = 100_000


def _dist0_sq(problem_start: np.ndarray, solution: np.ndarray) -> float:
    diff = problem_start - solution
    return float(diff @ diff)


def _violations(
    trace: IterateTrace, metric: str, bound: Callable[[int], float], k_min: int = 1
) -> list[tuple[int, float, float]]:
    ks, values = trace.metric_series(metric)
    return [
        (int(k), float(v), bound(int(k)))
        for k, v in zip(ks, values, strict=True)
        if k >= k_min and not v <= bound(int(k))
    ]


def _describe(violations: list[tuple[int, float, float]], checked: int) -> str:
    if not violations:
        return f"{checked} logged iterations within the bound"
    k, value, bound = violations[0]
    return f"{len(violations)} violations; first at k={k}: {value:.6g} > {bound:.6g}"


# =============================================================================
# Best equilibrium of the zero-sum game
# =============================================================================


@cache
def _best_ne_extragradient() -> IterateTrace:
    problem = build_zero_sum(best=True)
    config = IregMmConfig(
        gamma=zero_sum_instance().recommended_gamma,
        eta0=0.01,
        b=0.5,
        max_iters=IREGMM_ITERS,
    )
    observers = [
        OuterGapMetric(problem),
        InnerGapMetric(problem, DEFAULT_GAP_SAMPLES, seed=0),
    ]
    return run_ireg_mm(problem, config, observers, record_timing=False)


def check_outer_gap_bound() -> CriterionResult:
    """Exact outer gap of the monotone method below D^2/(gamma eta0) / K^0.5."""
    trace = _best_ne_extragradient()
    problem = build_zero_sum(best=True)
    gamma = zero_sum_instance().recommended_gamma
    d_sq = problem.bounds.D_X_sq
    violations = _violations(
        trace,
        "outer_gap",
        lambda k: iregmm_outer_gap_bound(d_sq, gamma, 0.01, 0.5, k),
        k_min=4,
    )
    return CriterionResult(
        "outer_gap_bound", not violations, _describe(violations, len(trace))
    )


def check_inner_gap_bound() -> CriterionResult:
    """Sampled inner gap is non-negative and below the inner-gap envelope."""
    trace = _best_ne_extragradient()
    problem = build_zero_sum(best=True)
    gamma = zero_sum_instance().recommended_gamma
    bounds = problem.bounds
    violations = _violations(
        trace,
        "inner_gap",
        lambda k: iregmm_inner_gap_bound(
            bounds.D_X_sq, gamma, 0.01, 0.5, bounds.C_H, k
        ),
    )
    _, values = trace.metric_series("inner_gap")
    negative = int(np.sum(values < -1e-9))
    passed = not violations and negative == 0
    detail = _describe(violations, len(values))
    if negative:
        detail += f"; {negative} values below -1e-9"
    return CriterionResult("inner_gap_bound", passed, detail)


def check_diminishing_objective_bound() -> CriterionResult:
    """Weighted averaging with the diminishing schedule reaches the best equilibrium."""
    problem = build_zero_sum(best=True)
    instance = zero_sum_instance()
    config = IregSmConfig(
        gamma=instance.recommended_gamma,
        regime=Diminishing(),
        max_iters=IREGSM_ITERS,
        objective_mode=True,
    )
    observers = [ObjectiveGapMetric(problem), OuterDistanceMetric(problem)]
    trace = run_ireg_sm(problem, config, observers, record_timing=False)
    dist0_sq = _dist0_sq(problem.initial_point(), instance.best_ne)
    violations = _violations(
        trace,
        "objective_gap",
        lambda k: iregsm_diminishing_objective_bound(dist0_sq, 1.0, 1.0, k),
    )
    terminal = float(np.linalg.norm(trace.final - instance.best_ne))
    passed = not violations and terminal <= 1e-1
    return CriterionResult(
        "diminishing_objective_bound",
        passed,
        f"{_describe(violations, len(trace))}; terminal distance {terminal:.3g}",
    )


def check_threshold_linear_rate() -> CriterionResult:
    """Constant eta below the threshold contracts at rate 1 - 0.5 gamma eta mu."""
    problem = build_zero_sum(best=True)
    instance = zero_sum_instance()
    gamma = instance.recommended_gamma
    config = IregSmConfig(
        gamma=gamma,
        regime=ThresholdConstant(THRESHOLD_ETA),
        max_iters=THRESHOLD_ITERS,
        objective_mode=True,
    )
    trace = run_ireg_sm(
        problem,
        config,
        [InnerDistanceMetric(problem)],
        schedule=LogSchedule.every(),
        record_timing=False,
    )
    alpha = problem.sharpness.alpha if problem.sharpness else 0.0
    rate = geometric_rate(gamma, THRESHOLD_ETA, 0.5)
    dist0_sq = _dist0_sq(problem.initial_point(), instance.best_ne)
    violations = _violations(
        trace,
        "dist_inner",
        lambda k: max(
            geometric_distance_envelope(dist0_sq, gamma, alpha, rate, k),
            RESOLVABLE_DISTANCE,
        ),
    )
    ks, values = trace.metric_series("dist_inner")
    window = ks >= 100
    resolvable = np.cumprod(values[window] >= RESOLVABLE_DISTANCE).astype(bool)
    slope_ks, slope_values = ks[window][resolvable], values[window][resolvable]
    expected = math.log(rate)
    if slope_ks.size < 2:
        return CriterionResult(
            "threshold_linear_rate", False, "distance unresolvable before k=101"
        )
    slope = fit_slope(slope_ks, slope_values, geometric=True)
    within = abs(slope - expected) <= 0.1 * abs(expected)
    return CriterionResult(
        "threshold_linear_rate",
        not violations and within,
        f"{_describe(violations, len(trace))}; slope {slope:.5g} vs "
        f"ln(rate) {expected:.5g} over k in [100, {int(slope_ks[-1])}]",
    )


# =============================================================================
# Worst equilibrium through inexact projections
# =============================================================================


@cache
def _worst_ne_projected_gradient() -> tuple[IterateTrace, IprEgConfig]:
    problem = build_zero_sum(best=False)
    config = IprEgConfig(
        outer_iters=IPR_OUTER_ITERS,
        gamma_inner=zero_sum_instance().recommended_gamma,
        mode=Adaptive(1.0),
    )
    observers = [InnerDistanceMetric(problem), OuterDistanceMetric(problem)]
    trace, _ = run_ipr_eg(
        problem, config, observers, schedule=LogSchedule.every(), record_timing=False
    )
    return trace, config


def check_infeasibility_envelope() -> CriterionResult:
    """Distance of every outer iterate to the equilibria below the adaptive envelope."""
    trace, config = _worst_ne_projected_gradient()
    problem = build_zero_sum(best=False)
    bounds = problem.bounds
    alpha = problem.sharpness.alpha if problem.sharpness else 0.0
    inner = {r.k: int(r.metrics["inner_iters"]) for r in trace.records}
    violations = _violations(
        trace,
        "dist_inner",
        lambda k: ipr_adaptive_infeasibility_envelope(
            bounds.D_X_sq,
            bounds.C_f,
            config.outer_step,
            config.gamma_inner,
            alpha,
            1.0,
            inner[k],
            k,
        ),
    )
    terminal = float(np.linalg.norm(trace.final - zero_sum_instance().worst_ne))
    return CriterionResult(
        "infeasibility_envelope",
        not violations and terminal <= 0.5,
        f"{_describe(violations, len(trace))}; terminal distance {terminal:.3g}",
    )


def check_residual_inequality() -> CriterionResult:
    """(gamma_hat^2 / 2) ||G||^2 <= ||step||^2 + ||delta||^2 at every outer step."""
    trace, config = _worst_ne_projected_gradient()
    scale = config.outer_step**2 / 2.0
    failures = []
    for record in trace.records:
        lhs = scale * record.metrics["residual_sq"]
        rhs = record.metrics["step_sq"] + record.metrics["delta_norm"] ** 2
        if lhs - rhs > 1e-10 * max(abs(lhs), abs(rhs)):
            failures.append(record.k)
    return CriterionResult(
        "residual_inequality",
        not failures,
        f"{len(failures)} of {len(trace)} steps violate the inequality",
    )


# =============================================================================
# Oracles
# =============================================================================


def check_weighted_average_oracle(trials: int = 100, seed: int = 0) -> CriterionResult:
    """Recursive weighted average equals the from-scratch weighted sum."""
    rng = np.random.default_rng(seed)
    worst_error = 0.0
    worst_sum = 0.0
    for _ in range(trials):
        horizon = int(rng.integers(1, 101))
        gamma = float(rng.uniform(0.1, 2.0))
        mu_h = float(rng.uniform(0.1, 1.0))
        etas = rng.uniform(0.01, 0.9, size=horizon + 1) / (gamma * mu_h)
        ys = rng.standard_normal((horizon, 3))
        state = WeightedAverageState.start(
            np.zeros(3), 1.0 - gamma * etas[0] * mu_h
        )
        for k in range(horizon):
            state = state.update(ys[k], etas[k], 1.0 - gamma * etas[k + 1] * mu_h, k)
        direct, lambdas = direct_weighted_average(ys, etas[:horizon], gamma, mu_h)
        error = float(np.linalg.norm(state.ybar - direct)) / max(
            1.0, float(np.linalg.norm(direct))
        )
        worst_error = max(worst_error, error)
        worst_sum = max(worst_sum, abs(float(lambdas.sum()) - 1.0))
    passed = worst_error <= 1e-10 and worst_sum <= 1e-12
    return CriterionResult(
        "weighted_average_oracle",
        passed,
        f"max relative error {worst_error:.3g}; max |sum lambda - 1| {worst_sum:.3g}",
    )


def check_box_projection_oracle(points: int = 100, seed: int = 0) -> CriterionResult:
    """Box projection agrees with brute-force search on a 1e-3 grid."""
    box = Box(np.zeros(2), np.ones(2))
    axis = np.linspace(0.0, 1.0, 1001)
    grid = np.stack(np.meshgrid(axis, axis), axis=-1).reshape(-1, 2)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for u in rng.uniform(-1.0, 2.0, size=(points, 2)):
        nearest = grid[np.argmin(np.sum((grid - u) ** 2, axis=1))]
        worst = max(worst, float(np.linalg.norm(box.project(u) - nearest)))
    return CriterionResult(
        "box_projection_oracle", worst <= 2e-3, f"max difference {worst:.3g}"
    )


def _negated(mapping: VectorMapping) -> VectorMapping:
    return VectorMapping(
        evaluate=lambda x: -mapping(x),
        eval_many=lambda rows: -mapping.evaluate_rows(rows),
    )


def check_monotonicity_suites(seed: int = 0) -> CriterionResult:
    """Sampled monotonicity and convexity witnesses of every instance family."""
    details = []
    passed = True

    zero_sum = zero_sum_instance()
    mapping = zero_sum.mapping()
    low = monotonicity_witness(mapping, zero_sum.box, 10_000, seed)
    high = -monotonicity_witness(_negated(mapping), zero_sum.box, 10_000, seed)
    ok = -1e-12 <= low and high <= 1e-12
    passed &= ok
    details.append(f"zero-sum in [{low:.2g}, {high:.2g}]")

    region = Box(np.zeros(29), 10.0 * np.ones(29))
    for n_a in (1.0, 1.2):
        problem, instance = build_traffic(n_a)
        witness = monotonicity_witness(problem.inner_map, region, 1_000, seed)
        passed &= witness >= -1e-8
        details.append(f"traffic(n={n_a:g}) {witness:.3g}")

        objective = problem.objective
        if objective is not None:
            rng = np.random.default_rng(seed)
            pad = np.zeros((1_000, instance.dim - instance.num_paths))
            points = np.hstack(
                [rng.uniform(0.5, 10.0, (1_000, instance.num_paths)), pad]
            )
            directions = np.hstack(
                [rng.standard_normal((1_000, instance.num_paths)), pad]
            )
            curvature = min(
                hessian_quadratic_form(objective, x, v)
                for x, v in zip(points, directions, strict=True)
            )
            passed &= curvature >= -1e-8
            details.append(f"curvature(n={n_a:g}) {curvature:.3g}")

    selection = random_selection_qp(seed)
    witness = monotonicity_witness(
        selection.build().inner_map,
        selection_sampling_box(selection, 5.0),
        1_000,
        seed,
    )
    passed &= witness >= -1e-9
    details.append(f"selection {witness:.3g}")
    return CriterionResult("monotonicity_suites", bool(passed), "; ".join(details))


# =============================================================================
# Harness-level properties
# =============================================================================


def _final_phi(solver: str) -> float:
    spec = build_experiment_spec(
        {
            "experiment": "e1",
            "solver": solver,
            "budget": BUDGET,
            "record_timing": False,
        },
        {"eta0": 0.01, "b": 0.5} if solver == "ireg_mm" else {"eta0": 0.01},
    )
    setup = build_experiment("e1", spec.seed)
    config = make_solver_config(spec, setup)
    trace, _ = execute(
        solver,
        setup.problem,
        config,
        [InfeasibilityMetric(setup.problem)],
        LogSchedule.final_only(),
        record_timing=False,
    )
    return trace.records[-1].metrics["phi"]


def check_budget_matched_ordering() -> CriterionResult:
    """Under equal projection budgets the extragradient ends less infeasible."""
    extragradient = _final_phi("ireg_mm")
    baseline = _final_phi("isr_cvx")
    return CriterionResult(
        "budget_matched_ordering",
        extragradient <= baseline,
        f"phi ireg_mm {extragradient:.6g} vs isr_cvx {baseline:.6g}",
    )


def check_determinism() -> CriterionResult:
    """Two runs of the same spec produce byte-identical CSV files."""
    outputs = []
    with tempfile.TemporaryDirectory() as tmp:
        for name in ("first", "second"):
            spec = build_experiment_spec(
                {
                    "experiment": "zs_best",
                    "solver": "ireg_sm",
                    "iters": THRESHOLD_ITERS,
                    "record_timing": False,
                    "csv_only": True,
                    "output_dir": str(Path(tmp) / name),
                }
            )
            summary = run_experiment(spec)
            outputs.append(Path(summary["csv_path"]).read_bytes())
    same = outputs[0] == outputs[1]
    return CriterionResult(
        "determinism", same, "identical CSV bytes" if same else "CSV files differ"
    )


CRITERIA: tuple[Callable[[], CriterionResult], ...] = (
    check_outer_gap_bound,
    check_inner_gap_bound,
    check_diminishing_objective_bound,
    check_threshold_linear_rate,
    check_infeasibility_envelope,
    check_residual_inequality,
    check_weighted_average_oracle,
    check_box_projection_oracle,
    check_monotonicity_suites,
    check_budget_matched_ordering,
    check_determinism,
)


def run_acceptance_suite(
    criteria: tuple[Callable[[], CriterionResult], ...] = CRITERIA,
) -> list[CriterionResult]:
    """Run every check; errors fail their check instead of aborting the suite."""
    results = []
    for check in criteria:
        started = time.perf_counter()
        try:
            result = check()
        except (IregviError, ArithmeticError, ValueError) as err:
            _LOGGER.exception("Acceptance check %s raised", check.__name__)
            result = CriterionResult(check.__name__, False, f"raised {err!r}")
        elapsed = time.perf_counter() - started
        _LOGGER.info("%s: %s in %.2fs", result.name, result.passed, elapsed)
        results.append(
            CriterionResult(
                result.name, result.passed, f"{result.detail} ({elapsed:.2f}s)"
            )
        )
    return results
