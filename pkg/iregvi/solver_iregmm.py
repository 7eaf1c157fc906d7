"""Iteratively regularized extragradient for monotone inner and outer maps.

Each iteration takes a predictor and a corrector projected step on the
regularized map F + eta_k H and folds the predictor into a running mean.
The schedule is eta_k = eta0 / (k + 1)^b, or a constant eta when the
solution set is weakly sharp and eta lies below the known threshold.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass

from .const import EXTRAGRADIENT_STEP_BOUND, LOG_STEPSIZE_OVERRIDE, STEP_CONDITION_TOL
from .coordinator import IterationCoordinator, MetricObserver
from .errors import ConfigValidationError, StepsizeViolationError
from .models import IterateTrace, SolverState
from .problems import BilevelVIProblem, regularized_map
from .utils import LogSchedule

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class IregMmConfig:
    """Configuration of the monotone iteratively regularized extragradient.

    Attributes:
        gamma: Stepsize.
        eta0: Initial regularization parameter.
        b: Decay exponent of the regularization schedule.
        max_iters: Number of iterations K.
        constant_eta: Constant regularization replacing the schedule.
        enforce_stepsize: Raise on violated stepsize hypotheses instead of warning.
    """

    gamma: float
    eta0: float = 0.01
    b: float = 0.5
    max_iters: int = 1000
    constant_eta: float | None = None
    enforce_stepsize: bool = True

    def __post_init__(self) -> None:
        if self.gamma <= 0:
            raise ConfigValidationError("gamma must be positive")
        if self.eta0 <= 0:
            raise ConfigValidationError("eta0 must be positive")
        if not 0.0 <= self.b < 1.0:
            raise ConfigValidationError("b must lie in [0, 1)")
        if self.max_iters < 1:
            raise ConfigValidationError("max_iters must be >= 1")
        if self.constant_eta is not None and self.constant_eta <= 0:
            raise ConfigValidationError("constant_eta must be positive")

    def eta(self, k: int) -> float:
        """Regularization parameter used by iteration k (0-based)."""
        if self.constant_eta is not None:
            return self.constant_eta
        return self.eta0 / (k + 1) ** self.b

    @property
    def largest_eta(self) -> float:
        return self.constant_eta if self.constant_eta is not None else self.eta0


def validate_ireg_mm(problem: BilevelVIProblem, config: IregMmConfig) -> None:
    """Check the stepsize hypothesis gamma^2 (L_F^2 + eta^2 L_H^2) <= 0.5.

    Raises:
        StepsizeViolationError: If a hypothesis fails and enforcement is on.
    """
    l_f = problem.inner_map.lipschitz_or(0.0)
    l_h = problem.outer_map.lipschitz_or(0.0)
    eta = config.largest_eta
    value = config.gamma**2 * (l_f**2 + eta**2 * l_h**2)
    if value > EXTRAGRADIENT_STEP_BOUND + STEP_CONDITION_TOL:
        _reject(
            config.enforce_stepsize,
            f"gamma^2 (L_F^2 + eta^2 L_H^2) = {value:.6g} exceeds "
            f"{EXTRAGRADIENT_STEP_BOUND}",
        )
    if config.constant_eta is None and config.b == 0.0:
        _LOGGER.warning(
            "b = 0 gives a constant schedule; the diminishing-schedule rates "
            "do not apply"
        )
    sharpness = problem.sharpness
    if (
        config.constant_eta is not None
        and sharpness is not None
        and sharpness.known_threshold is not None
        and config.constant_eta > sharpness.known_threshold
    ):
        _LOGGER.warning(
            "Constant eta %.6g exceeds the sharpness threshold %.6g",
            config.constant_eta,
            sharpness.known_threshold,
        )


def _reject(enforce: bool, message: str) -> None:
    if enforce:
        raise StepsizeViolationError(message)
    _LOGGER.warning(LOG_STEPSIZE_OVERRIDE, message)


def ireg_mm_step(
    problem: BilevelVIProblem, config: IregMmConfig, state: SolverState
) -> SolverState:
    """One extragradient iteration with running averaging of the predictor."""
    k = state.k
    eta = config.eta(k)
    gamma = config.gamma
    project = problem.inner_set.project
    y = project(state.x - gamma * regularized_map(problem, eta, state.x))
    x = project(state.x - gamma * regularized_map(problem, eta, y))
    ybar = (k * state.ybar + y) / (k + 1)
    return SolverState(
        k=k + 1,
        x=x,
        y=y,
        ybar=ybar,
        eta=eta,
        projections=state.projections + 2,
    )


class IregMmSolver(IterationCoordinator[IregMmConfig, SolverState]):
    """Coordinator running ireg_mm_step for K iterations."""

    name = "ireg_mm"

    @property
    def horizon(self) -> int:
        return self.config.max_iters

    def initial_state(self) -> SolverState:
        x0 = self.problem.initial_point()
        return SolverState(
            k=0, x=x0, y=x0, ybar=x0, eta=self.config.eta(0), projections=0
        )

    def step(self, state: SolverState) -> SolverState:
        return ireg_mm_step(self.problem, self.config, state)


def run_ireg_mm(
    problem: BilevelVIProblem,
    config: IregMmConfig,
    callbacks: Sequence[MetricObserver] = (),
    schedule: LogSchedule | None = None,
    record_timing: bool = True,
) -> IterateTrace:
    """Validate the configuration and run K iterations; ybar_K is trace.final."""
    validate_ireg_mm(problem, config)
    solver = IregMmSolver(
        problem,
        config,
        schedule=schedule,
        observers=callbacks,
        record_timing=record_timing,
    )
    return solver.run()
