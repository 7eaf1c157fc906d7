"""Metric observers evaluated on the stored iterations of a run."""

from __future__ import annotations

import logging
from collections.abc import Sequence

import numpy as np

from .const import DEFAULT_GAP_SAMPLES
from .coordinator import MetricObserver
from .errors import ConfigValidationError
from .linops import Point
from .models import SolverState
from .problems import (
    BilevelVIProblem,
    SampledGapEstimator,
    SmoothObjective,
    infeasibility_phi,
    natural_residual,
    outer_gap_exact_segment,
)

_LOGGER = logging.getLogger(__name__)

# Scalars solvers attach to SolverState.extras; written through when requested.
PASS_THROUGH_METRICS = frozenset(
    {
        "residual_sq",
        "delta_norm",
        "e_norm",
        "step_sq",
        "residual_exact",
        "envelope",
        "inner_iters",
    }
)


class ProblemMetric:
    """Base class for metrics of the reported iterate ybar."""

    name = "metric"

    def __init__(self, problem: BilevelVIProblem) -> None:
        """Initialize the metric."""
        self.problem = problem

    def __call__(self, state: SolverState, previous: SolverState | None) -> float:
        return self.value(state.ybar)

    def value(self, point: Point) -> float:
        raise NotImplementedError


class InnerDistanceMetric(ProblemMetric):
    """Distance to the closed-form SOL(X, F)."""

    name = "dist_inner"

    def __init__(self, problem: BilevelVIProblem) -> None:
        """Initialize the metric."""
        super().__init__(problem)
        if problem.known_inner_solution_set is None:
            raise ConfigValidationError(f"{problem.name} has no known solution set")
        self._solution_set = problem.known_inner_solution_set

    def value(self, point: Point) -> float:
        return self._solution_set.distance(point)


class OuterDistanceMetric(ProblemMetric):
    """Distance to the known bilevel solution."""

    name = "dist_outer"

    def __init__(self, problem: BilevelVIProblem) -> None:
        """Initialize the metric."""
        super().__init__(problem)
        if problem.known_outer_solution is None:
            raise ConfigValidationError(f"{problem.name} has no known outer solution")
        self._solution = problem.known_outer_solution

    def value(self, point: Point) -> float:
        return float(np.linalg.norm(point - self._solution))


class OuterGapMetric(InnerDistanceMetric):
    """Exact outer gap over the equilibrium segment."""

    name = "outer_gap"

    def value(self, point: Point) -> float:
        return outer_gap_exact_segment(
            self.problem.outer_map, self._solution_set, point
        )


class InnerGapMetric(ProblemMetric):
    """Sampled inner dual gap."""

    name = "inner_gap"

    def __init__(self, problem: BilevelVIProblem, samples: int, seed: int) -> None:
        """Precompute F on a fixed sample of X."""
        super().__init__(problem)
        if not problem.inner_set.is_bounded:
            raise ConfigValidationError("inner_gap needs a bounded feasible set")
        self._estimator = SampledGapEstimator(
            problem.inner_map, problem.inner_set.sample_array(samples, seed)
        )

    def value(self, point: Point) -> float:
        return self._estimator(point)


class ObjectiveMetric(ProblemMetric):
    """Outer objective f(ybar)."""

    name = "objective"

    def __init__(self, problem: BilevelVIProblem) -> None:
        """Initialize the metric."""
        super().__init__(problem)
        if problem.objective is None:
            raise ConfigValidationError(f"{problem.name} has no outer objective")
        self._objective: SmoothObjective = problem.objective

    def value(self, point: Point) -> float:
        return self._objective(point)


class ObjectiveGapMetric(ObjectiveMetric):
    """f(ybar) - f(x*) for a known bilevel solution."""

    name = "objective_gap"

    def __init__(self, problem: BilevelVIProblem) -> None:
        """Initialize the metric."""
        super().__init__(problem)
        if problem.known_outer_solution is None:
            raise ConfigValidationError(f"{problem.name} has no known outer solution")
        self._optimum = self._objective(problem.known_outer_solution)

    def value(self, point: Point) -> float:
        return self._objective(point) - self._optimum


class NaturalResidualMetric(ProblemMetric):
    """Inner VI residual ||ybar - Pi_X[ybar - F(ybar)]||."""

    name = "natural_residual"

    def value(self, point: Point) -> float:
        return natural_residual(self.problem, point)


class SuboptimalityMetric(ProblemMetric):
    """Step ||ybar_k - ybar_{k-1}|| of the reported sequence."""

    name = "suboptimality"

    def __call__(self, state: SolverState, previous: SolverState | None) -> float:
        if previous is None:
            return 0.0
        return float(np.linalg.norm(state.ybar - previous.ybar))


class InfeasibilityMetric(ProblemMetric):
    """NCP infeasibility phi at the last iterate x."""

    name = "phi"

    def __call__(self, state: SolverState, previous: SolverState | None) -> float:
        return infeasibility_phi(self.problem.inner_map, state.x)


_SIMPLE_METRICS: dict[str, type[ProblemMetric]] = {
    cls.name: cls
    for cls in (
        InnerDistanceMetric,
        OuterDistanceMetric,
        OuterGapMetric,
        ObjectiveMetric,
        ObjectiveGapMetric,
        NaturalResidualMetric,
        SuboptimalityMetric,
        InfeasibilityMetric,
    )
}

METRIC_NAMES = frozenset({*_SIMPLE_METRICS, InnerGapMetric.name})


def build_observers(
    problem: BilevelVIProblem,
    names: Sequence[str],
    seed: int = 0,
    gap_samples: int = DEFAULT_GAP_SAMPLES,
) -> list[MetricObserver]:
    """Create observers for the requested metric names.

    Pass-through names are skipped since solvers attach those values
    themselves.

    Raises:
        ConfigValidationError: If a name is unknown or unsupported by the problem.
    """
    observers: list[MetricObserver] = []
    for name in names:
        if name in PASS_THROUGH_METRICS:
            continue
        if name == InnerGapMetric.name:
            observers.append(InnerGapMetric(problem, gap_samples, seed))
        elif name in _SIMPLE_METRICS:
            observers.append(_SIMPLE_METRICS[name](problem))
        else:
            raise ConfigValidationError(f"Unknown metric: {name}")
    _LOGGER.debug("Observing %s on %s", [o.name for o in observers], problem.name)
    return observers
