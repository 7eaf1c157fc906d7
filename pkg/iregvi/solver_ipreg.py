"""Inexactly projected gradient method over the solution set of an inner VI.

Each outer step takes a gradient step z_k = xhat_k - gamma_hat grad f(xhat_k)
and approximates the projection of z_k onto SOL(X, F) by running the
weighted-averaging extragradient on the bilevel problem whose outer
objective is 1/2 ||x - z_k||^2. The nonconvex f is handled only through its
gradient.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from .const import (
    IPR_ADAPTIVE_ETA_FACTOR,
    IPR_INNER_STEP_BOUND,
    IPR_MIN_INNER_ITERS,
    IPR_SCHEDULE_EXPONENT,
    LOG_STEPSIZE_OVERRIDE,
    STEP_CONDITION_TOL,
)
from .coordinator import IterationCoordinator, MetricObserver
from .errors import (
    ConfigValidationError,
    ContractViolationError,
    StepsizeViolationError,
)
from .linops import Point
from .models import IterateTrace, SolverState
from .problems import BilevelVIProblem, SmoothObjective, natural_residual
from .solver_iregsm import Constant, IregSmConfig, IregSmSolver
from .utils import LogSchedule, ceil_with_slack

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class Adaptive:
    """T_k = max{k^(1.5 M), 151} with eta_k = 6 ln(T_k) / (gamma T_k)."""

    M: float = 1.0

    def __post_init__(self) -> None:
        if self.M < 1:
            raise ConfigValidationError("Adaptive mode needs M >= 1")


@dataclass(frozen=True)
class KnownThreshold:
    """Constant eta with T_k = tau ln(k + 1); tau is derived when omitted."""

    eta: float
    tau: float | None = None

    def __post_init__(self) -> None:
        if self.eta <= 0:
            raise ConfigValidationError("KnownThreshold eta must be positive")
        if self.tau is not None and self.tau <= 0:
            raise ConfigValidationError("KnownThreshold tau must be positive")


Mode = Adaptive | KnownThreshold


@dataclass(frozen=True)
class IprEgConfig:
    """Configuration of the inexactly projected gradient method.

    Attributes:
        outer_iters: Number of outer iterations K.
        gamma_inner: Stepsize of the inner extragradient.
        gamma_hat: Outer stepsize; 1/sqrt(K) when omitted.
        mode: Inner schedule.
        enforce_stepsize: Raise on violated hypotheses instead of warning.
    """

    outer_iters: int
    gamma_inner: float
    gamma_hat: float | None = None
    mode: Mode = field(default_factory=Adaptive)
    enforce_stepsize: bool = True

    def __post_init__(self) -> None:
        if self.outer_iters < 2:
            raise ConfigValidationError("outer_iters must be >= 2")
        if self.gamma_inner <= 0:
            raise ConfigValidationError("gamma_inner must be positive")
        if self.gamma_hat is not None and self.gamma_hat <= 0:
            raise ConfigValidationError("gamma_hat must be positive")

    @property
    def outer_step(self) -> float:
        """gamma_hat, resolved to 1/sqrt(K) by default."""
        if self.gamma_hat is not None:
            return self.gamma_hat
        return 1.0 / math.sqrt(self.outer_iters)

    @property
    def tau(self) -> float:
        """Inner iteration factor of the known-threshold mode."""
        if not isinstance(self.mode, KnownThreshold):
            raise ConfigValidationError("tau is defined for KnownThreshold only")
        if self.mode.tau is not None:
            return self.mode.tau
        contraction = 1.0 - 0.5 * self.mode.eta * self.gamma_inner
        if contraction <= 0:
            raise ConfigValidationError("0.5 eta gamma must be below 1")
        return float(math.ceil(-2.0 / math.log(contraction)))


def inner_iterations(config: IprEgConfig, k: int) -> int:
    """T_k, the number of inner extragradient iterations of outer step k."""
    match config.mode:
        case Adaptive(M=m):
            power = ceil_with_slack(k ** (IPR_SCHEDULE_EXPONENT * m)) if k else 0
            return max(power, IPR_MIN_INNER_ITERS)
        case KnownThreshold():
            return ceil_with_slack(config.tau * math.log(k + 1))
    raise ConfigValidationError(f"Unknown mode {config.mode!r}")


def inner_eta(config: IprEgConfig, k: int) -> float:
    """Regularization parameter of the inner solver at outer step k."""
    match config.mode:
        case Adaptive():
            t_k = inner_iterations(config, k)
            return IPR_ADAPTIVE_ETA_FACTOR * math.log(t_k) / (config.gamma_inner * t_k)
        case KnownThreshold(eta=eta):
            return eta
    raise ConfigValidationError(f"Unknown mode {config.mode!r}")


def _reject(enforce: bool, message: str) -> None:
    if enforce:
        raise StepsizeViolationError(message)
    _LOGGER.warning(LOG_STEPSIZE_OVERRIDE, message)


def validate_ipr_eg(problem: BilevelVIProblem, config: IprEgConfig) -> None:
    """Check the stepsize and threshold hypotheses of the method.

    Raises:
        ConfigValidationError: If the outer level is not an objective.
        StepsizeViolationError: If a hypothesis fails and enforcement is on.
    """
    objective = problem.objective
    if objective is None:
        raise ConfigValidationError("ipr_eg needs an outer objective")
    enforce = config.enforce_stepsize
    smooth = objective.smoothness_L
    gamma_hat = config.outer_step
    if gamma_hat > (1.0 + STEP_CONDITION_TOL) / (2.0 * smooth):
        _reject(enforce, f"gamma_hat = {gamma_hat:.6g} exceeds 1/(2 L)")
    if config.gamma_hat is None and config.outer_iters < max(2.0, 4.0 * smooth**2):
        _LOGGER.warning(
            "K = %d is below max{2, 4 L^2}; the outer rate does not apply",
            config.outer_iters,
        )
    l_f = problem.inner_map.lipschitz_or(0.0)
    if l_f > 0 and config.gamma_inner > (1.0 + STEP_CONDITION_TOL) / (2.0 * l_f):
        _reject(
            enforce,
            f"gamma_inner = {config.gamma_inner:.6g} exceeds 1/(2 L_F) = "
            f"{1.0 / (2.0 * l_f):.6g}",
        )
    if isinstance(config.mode, KnownThreshold):
        _validate_threshold(problem, config, config.mode.eta, smooth)


def _validate_threshold(
    problem: BilevelVIProblem, config: IprEgConfig, eta: float, smooth: float
) -> None:
    gamma = config.gamma_inner
    value = 0.5 * gamma * eta + gamma**2 * eta**2
    if value > IPR_INNER_STEP_BOUND + STEP_CONDITION_TOL:
        _reject(
            config.enforce_stepsize,
            f"0.5 gamma eta + gamma^2 eta^2 = {value:.6g} exceeds "
            f"{IPR_INNER_STEP_BOUND}",
        )
    sharpness = problem.sharpness
    bounds = problem.bounds
    if sharpness is None or not math.isfinite(bounds.D_X_sq):
        _LOGGER.warning("Cannot check the eta threshold on %s", problem.name)
        return
    threshold = sharpness.alpha * smooth / (
        2.0 * math.sqrt(2.0) * bounds.D_X * smooth + bounds.C_f
    )
    if eta > threshold:
        _reject(
            config.enforce_stepsize,
            f"eta = {eta:.6g} exceeds alpha L / (2 sqrt(2) D_X L + C_f) = "
            f"{threshold:.6g}",
        )


# =============================================================================
# Outer step
# =============================================================================


def projection_problem(problem: BilevelVIProblem, anchor: Point) -> BilevelVIProblem:
    """Bilevel problem whose solution is the projection of anchor onto SOL(X, F)."""

    def value(x: Point) -> float:
        diff = x - anchor
        return 0.5 * float(diff @ diff)

    def gradient(x: Point) -> Point:
        return x - anchor

    return BilevelVIProblem(
        inner_set=problem.inner_set,
        inner_map=problem.inner_map,
        outer=SmoothObjective(
            value=value,
            gradient=gradient,
            smoothness_L=1.0,
            strong_convexity_mu=1.0,
            gradient_many=lambda rows: rows - anchor,
        ),
        bounds=problem.bounds,
        known_inner_solution_set=problem.known_inner_solution_set,
        name=f"{problem.name}/projection",
    )


def gradient_point(
    problem: BilevelVIProblem, config: IprEgConfig, xhat: Point
) -> Point:
    """z_k = xhat_k - gamma_hat grad f(xhat_k)."""
    return xhat - config.outer_step * problem.outer_map(xhat)


def ipr_eg_outer_step(
    problem: BilevelVIProblem, config: IprEgConfig, xhat: Point, k: int
) -> tuple[Point, IterateTrace | None]:
    """Approximately project the gradient step of xhat onto SOL(X, F).

    Returns:
        The next outer iterate and the inner trace; the trace is None when
        the schedule asks for no inner iterations and xhat is returned.

    Raises:
        DivergenceError: If the inner solver diverges.
    """
    steps = inner_iterations(config, k)
    if steps == 0:
        return xhat, None
    inner = IregSmConfig(
        gamma=config.gamma_inner,
        regime=Constant(inner_eta(config, k)),
        max_iters=steps,
        objective_mode=True,
        enforce_stepsize=config.enforce_stepsize,
    )
    solver = IregSmSolver(
        projection_problem(problem, gradient_point(problem, config, xhat)),
        inner,
        schedule=LogSchedule.final_only(),
        record_timing=False,
        start=xhat,
    )
    trace = solver.run()
    return trace.final, trace


# =============================================================================
# Diagnostics
# =============================================================================


@dataclass(frozen=True)
class StationarityDiagnostics:
    """Residual and inexactness of one outer step.

    Attributes:
        residual_sq: ||G(xhat_k)||^2 with G(x) = (x - Pi_SOL[z]) / gamma_hat.
        infeasibility: dist(xhat_k, SOL), or the natural residual surrogate.
        delta_norm: ||xhat_{k+1} - Pi_SOL[z_k]||; NaN for the surrogate.
        step_sq: ||xhat_{k+1} - xhat_k||^2.
        exact: Whether SOL(X, F) was projected onto exactly.
    """

    residual_sq: float
    infeasibility: float
    delta_norm: float
    step_sq: float
    exact: bool

    @property
    def e_norm(self) -> float:
        """||e_k|| = ||xhat_k - Pi_SOL[xhat_k]||."""
        return self.infeasibility

    def as_extras(self) -> dict[str, float]:
        return {
            "residual_sq": self.residual_sq,
            "e_norm": self.infeasibility,
            "delta_norm": self.delta_norm,
            "step_sq": self.step_sq,
            "residual_exact": 1.0 if self.exact else 0.0,
        }


def stationarity_diagnostics(
    problem: BilevelVIProblem,
    config: IprEgConfig,
    xhat: Point,
    xhat_next: Point,
) -> StationarityDiagnostics:
    """Evaluate the residual mapping at xhat_k and the inexactness of the step.

    Without a closed-form SOL(X, F) the inner output xhat_{k+1} stands in for
    the projection of z_k, and the natural residual for the distance.
    """
    gamma_hat = config.outer_step
    step = xhat_next - xhat
    step_sq = float(step @ step)
    solution_set = problem.known_inner_solution_set
    if solution_set is None:
        return StationarityDiagnostics(
            residual_sq=step_sq / gamma_hat**2,
            infeasibility=natural_residual(problem, xhat),
            delta_norm=math.nan,
            step_sq=step_sq,
            exact=False,
        )
    projected = solution_set.project(gradient_point(problem, config, xhat))
    residual = (xhat - projected) / gamma_hat
    return StationarityDiagnostics(
        residual_sq=float(residual @ residual),
        infeasibility=solution_set.distance(xhat),
        delta_norm=float(np.linalg.norm(xhat_next - projected)),
        step_sq=step_sq,
        exact=True,
    )


def window_best_iterate(
    history: Sequence[tuple[Point, float]], outer_iters: int
) -> Point:
    """Iterate with the smallest residual among k = floor(K/2), ..., K - 1.

    Args:
        history: (xhat_k, ||G(xhat_k)||^2) for k = 0, ..., K - 1.
        outer_iters: K.
    """
    if len(history) < outer_iters:
        raise ContractViolationError(
            f"Need {outer_iters} residuals, got {len(history)}"
        )
    window = history[outer_iters // 2 : outer_iters]
    best, _ = min(window, key=lambda item: item[1])
    return best


# =============================================================================
# Solver
# =============================================================================


class IprEgSolver(IterationCoordinator[IprEgConfig, SolverState]):
    """Coordinator of the outer loop; keeps every residual for the window."""

    name = "ipr_eg"

    def __init__(
        self,
        problem: BilevelVIProblem,
        config: IprEgConfig,
        *,
        schedule: LogSchedule | None = None,
        observers: Sequence[MetricObserver] = (),
        record_timing: bool = True,
    ) -> None:
        """Initialize the solver."""
        super().__init__(
            problem,
            config,
            schedule=schedule,
            observers=observers,
            record_timing=record_timing,
        )
        self.history: list[tuple[Point, float]] = []

    @property
    def horizon(self) -> int:
        return self.config.outer_iters

    def initial_state(self) -> SolverState:
        x0 = self.problem.initial_point()
        self.history.clear()
        return SolverState(
            k=0, x=x0, y=x0, ybar=x0, eta=inner_eta(self.config, 0), projections=0
        )

    def step(self, state: SolverState) -> SolverState:
        k = state.k
        xhat = state.x
        xhat_next, _ = ipr_eg_outer_step(self.problem, self.config, xhat, k)
        diagnostics = stationarity_diagnostics(
            self.problem, self.config, xhat, xhat_next
        )
        self.history.append((xhat, diagnostics.residual_sq))
        steps = inner_iterations(self.config, k)
        extras = diagnostics.as_extras()
        extras["inner_iters"] = float(steps)
        return SolverState(
            k=k + 1,
            x=xhat_next,
            y=xhat_next,
            ybar=xhat_next,
            eta=inner_eta(self.config, k),
            projections=state.projections + 2 * steps,
            extras=extras,
        )


def run_ipr_eg(
    problem: BilevelVIProblem,
    config: IprEgConfig,
    callbacks: Sequence[MetricObserver] = (),
    schedule: LogSchedule | None = None,
    record_timing: bool = True,
) -> tuple[IterateTrace, Point]:
    """Run K outer iterations.

    Returns:
        The outer trace, whose record k carries the diagnostics of the step
        from xhat_{k-1}, and the window-best iterate.
    """
    validate_ipr_eg(problem, config)
    solver = IprEgSolver(
        problem,
        config,
        schedule=schedule,
        observers=callbacks,
        record_timing=record_timing,
    )
    trace = solver.run()
    return trace, window_best_iterate(solver.history, config.outer_iters)
