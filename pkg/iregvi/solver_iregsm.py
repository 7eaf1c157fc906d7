"""Iteratively regularized extragradient with weighted averaging.

For a strongly monotone outer map (or strongly convex outer objective) the
predictor iterates are averaged with geometrically growing weights
eta_k theta_k, where theta_k = 1 / prod_{t<=k} (1 - gamma eta_t mu_H).
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from .const import (
    DIMINISHING_LOWER_FACTOR,
    EXTRAGRADIENT_STEP_BOUND,
    LOG_STEPSIZE_OVERRIDE,
    LOG_THETA_RENORMALIZED,
    OBJECTIVE_MU_FACTOR,
    STEP_CONDITION_TOL,
    THETA_RENORMALIZE_AT,
)
from .coordinator import IterationCoordinator, MetricObserver
from .errors import (
    ConfigValidationError,
    ContractViolationError,
    StepsizeViolationError,
)
from .linops import Point
from .models import IterateTrace, SolverState
from .problems import BilevelVIProblem, regularized_map
from .utils import LogSchedule

_LOGGER = logging.getLogger(__name__)


# =============================================================================
# Regularization regimes
# =============================================================================


@dataclass(frozen=True)
class Diminishing:
    """eta_k = eta0_u / (k + eta0_l); None selects the canonical constants."""

    eta0_u: float | None = None
    eta0_l: float | None = None


@dataclass(frozen=True)
class LogConstant:
    """Constant eta = (p + 1) ln(K) / (gamma mu_H K)."""

    p: float = 1.0

    def __post_init__(self) -> None:
        if self.p < 1:
            raise ConfigValidationError("LogConstant needs p >= 1")


@dataclass(frozen=True)
class ThresholdConstant:
    """Constant eta below the known weak-sharpness threshold."""

    eta: float


@dataclass(frozen=True)
class Constant:
    """Plain constant eta; only the step condition is enforced."""

    eta: float


Regime = Diminishing | LogConstant | ThresholdConstant | Constant


@dataclass(frozen=True)
class IregSmConfig:
    """Configuration of the weighted-averaging extragradient.

    Attributes:
        gamma: Stepsize.
        regime: Regularization regime.
        max_iters: Number of iterations K.
        objective_mode: Outer level is a strongly convex objective; use
            mu_H = 0.5 mu and L_H = L.
        enforce_stepsize: Raise on violated hypotheses instead of warning.
    """

    gamma: float
    regime: Regime
    max_iters: int = 1000
    objective_mode: bool = False
    enforce_stepsize: bool = True

    def __post_init__(self) -> None:
        if self.gamma <= 0:
            raise ConfigValidationError("gamma must be positive")
        if self.max_iters < 1:
            raise ConfigValidationError("max_iters must be >= 1")
        eta = getattr(self.regime, "eta", None)
        if eta is not None and eta <= 0:
            raise ConfigValidationError("Constant eta must be positive")


@dataclass(frozen=True)
class RegimePlan:
    """Resolved constants and schedule of a validated configuration."""

    gamma: float
    mu_h: float
    l_h: float
    l_f: float
    eta: Callable[[int], float]
    constant: bool

    def step_condition(self, eta: float) -> float:
        """gamma^2 L_F^2 + gamma eta mu_H + gamma^2 eta^2 L_H^2."""
        g = self.gamma
        return g * g * self.l_f**2 + g * eta * self.mu_h + g * g * eta**2 * self.l_h**2

    def contraction(self, eta: float) -> float:
        return 1.0 - self.gamma * eta * self.mu_h


def resolve_outer_constants(
    problem: BilevelVIProblem, objective_mode: bool
) -> tuple[float, float]:
    """Effective (mu_H, L_H) of the outer level.

    Raises:
        ConfigValidationError: If the outer level is not strongly monotone.
    """
    if objective_mode:
        objective = problem.objective
        if objective is None:
            raise ConfigValidationError("objective_mode needs an outer objective")
        mu_h = OBJECTIVE_MU_FACTOR * objective.strong_convexity_mu
        l_h = objective.smoothness_L
    else:
        mu_h = problem.outer_map.strong_monotone_mu
        l_h = problem.outer_map.lipschitz_or(mu_h)
    if mu_h <= 0:
        raise ConfigValidationError(
            f"{problem.name}: outer level is not strongly monotone"
        )
    return mu_h, l_h


def _reject(enforce: bool, message: str) -> None:
    if enforce:
        raise StepsizeViolationError(message)
    _LOGGER.warning(LOG_STEPSIZE_OVERRIDE, message)


def _check_gamma_bound(config: IregSmConfig, l_f: float) -> None:
    if l_f > 0 and config.gamma > 1.0 / (2.0 * l_f) * (1.0 + STEP_CONDITION_TOL):
        _reject(
            config.enforce_stepsize,
            f"gamma = {config.gamma:.6g} exceeds 1/(2 L_F) = {1.0 / (2.0 * l_f):.6g}",
        )


def validate_ireg_sm(problem: BilevelVIProblem, config: IregSmConfig) -> RegimePlan:
    """Validate the regime against the problem and resolve its schedule.

    Raises:
        ConfigValidationError: If the regime cannot be used on the problem.
        StepsizeViolationError: If a hypothesis fails and enforcement is on.
    """
    mu_h, l_h = resolve_outer_constants(problem, config.objective_mode)
    l_f = problem.inner_map.lipschitz_or(0.0)
    gamma = config.gamma
    regime = config.regime
    big_k = config.max_iters

    match regime:
        case Diminishing(eta0_u=upper, eta0_l=lower):
            _check_gamma_bound(config, l_f)
            canonical_lower = DIMINISHING_LOWER_FACTOR * l_h / mu_h
            u = 1.0 / (gamma * mu_h) if upper is None else upper
            low = canonical_lower if lower is None else lower
            if low < canonical_lower:
                _LOGGER.warning(
                    "eta0_l = %.6g is below 5 L_H / mu_H = %.6g",
                    low,
                    canonical_lower,
                )
            if u <= 0 or low <= 0:
                raise ConfigValidationError("Diminishing constants must be positive")
            plan = RegimePlan(gamma, mu_h, l_h, l_f, lambda k: u / (k + low), False)
        case LogConstant(p=p):
            _check_gamma_bound(config, l_f)
            if big_k < 2:
                raise ConfigValidationError("LogConstant needs max_iters >= 2")
            required = DIMINISHING_LOWER_FACTOR * (p + 1.0) * l_h / mu_h
            if big_k / math.log(big_k) < required:
                _reject(
                    config.enforce_stepsize,
                    f"K/ln(K) = {big_k / math.log(big_k):.6g} is below "
                    f"5 (p+1) L_H / mu_H = {required:.6g}",
                )
            eta = (p + 1.0) * math.log(big_k) / (gamma * mu_h * big_k)
            plan = RegimePlan(gamma, mu_h, l_h, l_f, lambda _k: eta, True)
        case ThresholdConstant(eta=eta):
            sharpness = problem.sharpness
            if sharpness is None or sharpness.known_threshold is None:
                raise ConfigValidationError(
                    f"{problem.name} has no known sharpness threshold"
                )
            if eta > sharpness.known_threshold:
                _reject(
                    config.enforce_stepsize,
                    f"eta = {eta:.6g} exceeds the threshold "
                    f"{sharpness.known_threshold:.6g}",
                )
            plan = RegimePlan(gamma, mu_h, l_h, l_f, lambda _k: eta, True)
        case Constant(eta=eta):
            plan = RegimePlan(gamma, mu_h, l_h, l_f, lambda _k: eta, True)
        case _:
            raise ConfigValidationError(f"Unknown regime {regime!r}")

    value = plan.step_condition(plan.eta(0))
    if value > EXTRAGRADIENT_STEP_BOUND + STEP_CONDITION_TOL:
        _reject(
            config.enforce_stepsize,
            f"step condition {value:.6g} exceeds {EXTRAGRADIENT_STEP_BOUND}",
        )
    return plan


# =============================================================================
# Weighted averaging
# =============================================================================


@dataclass(frozen=True)
class WeightedAverageState:
    """Running weighted average with weights eta_k theta_k.

    Gamma and theta are stored divided by exp(log_scale), so that long
    geometric runs keep finite values.
    """

    Gamma: float
    theta: float
    ybar: Point
    log_scale: float = 0.0

    @classmethod
    def start(cls, ybar: Point, first_contraction: float) -> WeightedAverageState:
        """Gamma_0 = 0 and theta_0 = 1 / (1 - gamma eta_0 mu_H)."""
        return cls(Gamma=0.0, theta=1.0 / first_contraction, ybar=ybar)

    def update(
        self, y: Point, eta: float, next_contraction: float, k: int = 0
    ) -> WeightedAverageState:
        """Fold y_{k+1} in with weight eta_k theta_k and advance theta."""
        weight = eta * self.theta
        gamma_next = self.Gamma + weight
        ybar = (self.Gamma * self.ybar + weight * y) / gamma_next
        theta = self.theta / next_contraction
        log_scale = self.log_scale
        if theta > THETA_RENORMALIZE_AT:
            _LOGGER.warning(LOG_THETA_RENORMALIZED, k + 1)
            gamma_next /= theta
            log_scale += math.log(theta)
            theta = 1.0
        return WeightedAverageState(
            Gamma=gamma_next, theta=theta, ybar=ybar, log_scale=log_scale
        )


def direct_weighted_average(
    ys: npt.ArrayLike, etas: Sequence[float], gamma: float, mu_h: float
) -> tuple[Point, npt.NDArray[np.float64]]:
    """Compute sum_k lambda_k y_{k+1} from scratch.

    Args:
        ys: Rows y_1, ..., y_K.
        etas: eta_0, ..., eta_{K-1}.
        gamma: Stepsize.
        mu_h: Effective strong monotonicity modulus.

    Returns:
        The weighted average and the weights lambda_{k,K}.
    """
    rows = np.atleast_2d(np.asarray(ys, dtype=np.float64))
    eta = np.asarray(etas, dtype=np.float64)
    if rows.shape[0] != eta.shape[0] or eta.shape[0] == 0:
        raise ContractViolationError("Need one eta per iterate and at least one")
    log_theta = -np.cumsum(np.log1p(-gamma * eta * mu_h))
    log_weights = np.log(eta) + log_theta
    weights = np.exp(log_weights - np.max(log_weights))
    lambdas = weights / weights.sum()
    return lambdas @ rows, lambdas


# =============================================================================
# Solver
# =============================================================================


@dataclass(frozen=True, kw_only=True)
class IregSmState(SolverState):
    """Solver state carrying the weighted average."""

    averaging: WeightedAverageState


def ireg_sm_step(
    problem: BilevelVIProblem,
    config: IregSmConfig,
    state: IregSmState,
    plan: RegimePlan | None = None,
) -> IregSmState:
    """One extragradient iteration with weighted averaging.

    Raises:
        ContractViolationError: If 1 - gamma eta mu_H is not positive.
    """
    plan = plan or validate_ireg_sm(problem, config)
    k = state.k
    eta = plan.eta(k)
    eta_next = plan.eta(k + 1)
    contraction = plan.contraction(eta_next)
    if contraction <= 0:
        raise ContractViolationError(
            f"1 - gamma eta mu_H = {contraction:.6g} at iteration {k + 1}"
        )
    gamma = plan.gamma
    project = problem.inner_set.project
    y = project(state.x - gamma * regularized_map(problem, eta, state.x))
    x = project(state.x - gamma * regularized_map(problem, eta, y))
    averaging = state.averaging.update(y, eta, contraction, k)
    extras = {}
    if plan.constant:
        extras["envelope"] = plan.contraction(eta) ** (k + 1)
    return IregSmState(
        k=k + 1,
        x=x,
        y=y,
        ybar=averaging.ybar,
        eta=eta,
        projections=state.projections + 2,
        extras=extras,
        averaging=averaging,
    )


class IregSmSolver(IterationCoordinator[IregSmConfig, IregSmState]):
    """Coordinator running ireg_sm_step with an in-loop step condition check."""

    name = "ireg_sm"

    def __init__(
        self,
        problem: BilevelVIProblem,
        config: IregSmConfig,
        *,
        schedule: LogSchedule | None = None,
        observers: Sequence[MetricObserver] = (),
        record_timing: bool = True,
        start: Point | None = None,
    ) -> None:
        """Initialize the solver.

        Args:
            problem: Problem to solve.
            config: Solver configuration.
            schedule: Which iterations are stored.
            observers: Metrics evaluated at stored iterations.
            record_timing: Store wall-clock nanoseconds.
            start: Warm start overriding the problem's initial point.
        """
        super().__init__(
            problem,
            config,
            schedule=schedule,
            observers=observers,
            record_timing=record_timing,
        )
        self.plan = validate_ireg_sm(problem, config)
        self._start = start
        self._condition_warned = False

    @property
    def horizon(self) -> int:
        return self.config.max_iters

    def initial_state(self) -> IregSmState:
        x0 = self.problem.initial_point() if self._start is None else self._start
        eta0 = self.plan.eta(0)
        return IregSmState(
            k=0,
            x=x0,
            y=x0,
            ybar=x0,
            eta=eta0,
            projections=0,
            averaging=WeightedAverageState.start(x0, self.plan.contraction(eta0)),
        )

    def step(self, state: IregSmState) -> IregSmState:
        if not self.plan.constant:
            self._check_condition(state.k)
        return ireg_sm_step(self.problem, self.config, state, self.plan)

    def _check_condition(self, k: int) -> None:
        """Verify the step condition for the eta of iteration k."""
        value = self.plan.step_condition(self.plan.eta(k))
        if value <= EXTRAGRADIENT_STEP_BOUND + STEP_CONDITION_TOL:
            return
        message = f"step condition {value:.6g} exceeds bound at iteration {k}"
        if self.config.enforce_stepsize:
            raise StepsizeViolationError(message)
        if not self._condition_warned:
            _LOGGER.warning(LOG_STEPSIZE_OVERRIDE, message)
            self._condition_warned = True


def run_ireg_sm(
    problem: BilevelVIProblem,
    config: IregSmConfig,
    callbacks: Sequence[MetricObserver] = (),
    schedule: LogSchedule | None = None,
    record_timing: bool = True,
    start: Point | None = None,
) -> IterateTrace:
    """Validate the regime and run K iterations; ybar_K is trace.final."""
    solver = IregSmSolver(
        problem,
        config,
        schedule=schedule,
        observers=callbacks,
        record_timing=record_timing,
        start=start,
    )
    return solver.run()
