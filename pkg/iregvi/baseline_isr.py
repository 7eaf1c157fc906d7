"""Iterative sequential regularization baseline for convex outer objectives.

Outer iteration k solves VI(X, F_k) with
F_k(x) = F(x) + eta_k grad f(x) + alpha_tilde (x - x_k)
approximately, by T_k = k + 1 projected-gradient steps started at x_k.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .const import DEFAULT_ALPHA_TILDE, DEFAULT_B, DEFAULT_ETA0
from .coordinator import IterationCoordinator, MetricObserver
from .errors import ConfigValidationError
from .linops import Point
from .models import IterateTrace, SolverState
from .problems import BilevelVIProblem
from .utils import LogSchedule


@dataclass(frozen=True)
class IsrCvxConfig:
    """Configuration of the sequential regularization baseline.

    Attributes:
        outer_iters: Number of outer iterations.
        eta0: Initial regularization parameter.
        b_tilde: Decay exponent in (0, 1].
        alpha_tilde: Proximal weight.
        inner_step: Projected-gradient stepsize; derived from the problem
            constants when omitted.
    """

    outer_iters: int
    eta0: float = DEFAULT_ETA0
    b_tilde: float = DEFAULT_B
    alpha_tilde: float = DEFAULT_ALPHA_TILDE
    inner_step: float | None = None

    def __post_init__(self) -> None:
        if self.outer_iters < 1:
            raise ConfigValidationError("outer_iters must be >= 1")
        if self.eta0 < 0:
            raise ConfigValidationError("eta0 must be >= 0")
        if not 0.0 < self.b_tilde <= 1.0:
            raise ConfigValidationError("b_tilde must lie in (0, 1]")
        if self.alpha_tilde < 0:
            raise ConfigValidationError("alpha_tilde must be >= 0")
        if self.inner_step is not None and self.inner_step <= 0:
            raise ConfigValidationError("inner_step must be positive")

    def eta(self, k: int) -> float:
        return self.eta0 / (k + 1) ** self.b_tilde


def outer_iters_for_budget(budget: int) -> int:
    """Largest K whose inner loops use at most budget projections."""
    if budget < 1:
        raise ConfigValidationError("budget must be >= 1")
    return (math.isqrt(8 * budget + 1) - 1) // 2


def resolve_inner_step(problem: BilevelVIProblem, config: IsrCvxConfig) -> float:
    """Explicit inner_step, or alpha_tilde / (L_F + eta0 L + alpha_tilde)^2."""
    if config.inner_step is not None:
        return config.inner_step
    scale = (
        problem.inner_map.lipschitz_or(0.0)
        + config.eta0 * problem.outer_map.lipschitz_or(0.0)
        + config.alpha_tilde
    )
    if config.alpha_tilde == 0 or scale == 0:
        raise ConfigValidationError("inner_step is required when alpha_tilde = 0")
    return config.alpha_tilde / scale**2


def isr_cvx_inner_solve(
    problem: BilevelVIProblem,
    config: IsrCvxConfig,
    center: Point,
    eta: float,
    steps: int,
) -> tuple[Point, list[float]]:
    """Projected-gradient steps on VI(X, F_k) started at the center x_k.

    Returns:
        The last inner iterate and the residuals ||x_{t+1} - x_t||.
    """
    step = resolve_inner_step(problem, config)
    project = problem.inner_set.project
    alpha = config.alpha_tilde
    x = center
    residuals: list[float] = []
    for _ in range(steps):
        direction = (
            problem.inner_map(x) + eta * problem.outer_map(x) + alpha * (x - center)
        )
        x_next = project(x - step * direction)
        residuals.append(float(np.linalg.norm(x_next - x)))
        x = x_next
    return x, residuals


class IsrCvxSolver(IterationCoordinator[IsrCvxConfig, SolverState]):
    """Outer loop of the baseline; the outer iterate is the reported point."""

    name = "isr_cvx"

    @property
    def horizon(self) -> int:
        return self.config.outer_iters

    def initial_state(self) -> SolverState:
        x0 = self.problem.initial_point()
        return SolverState(
            k=0, x=x0, y=x0, ybar=x0, eta=self.config.eta(0), projections=0
        )

    def step(self, state: SolverState) -> SolverState:
        k = state.k
        eta = self.config.eta(k)
        steps = k + 1
        x, _ = isr_cvx_inner_solve(self.problem, self.config, state.x, eta, steps)
        return SolverState(
            k=k + 1,
            x=x,
            y=x,
            ybar=x,
            eta=eta,
            projections=state.projections + steps,
            extras={"inner_iters": float(steps)},
        )


def run_isr_cvx(
    problem: BilevelVIProblem,
    config: IsrCvxConfig,
    callbacks: Sequence[MetricObserver] = (),
    schedule: LogSchedule | None = None,
    record_timing: bool = True,
) -> IterateTrace:
    """Run the baseline for config.outer_iters outer iterations.

    Raises:
        ConfigValidationError: If the outer level is not an objective.
        DivergenceError: If an iterate becomes non-finite.
    """
    if problem.objective is None:
        raise ConfigValidationError("isr_cvx needs an outer objective")
    resolve_inner_step(problem, config)
    solver = IsrCvxSolver(
        problem,
        config,
        schedule=schedule,
        observers=callbacks,
        record_timing=record_timing,
    )
    return solver.run()
