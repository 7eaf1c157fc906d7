"""Mappings, bilevel VI problems and the diagnostics computed on them."""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt

from .const import FD_STEP
from .errors import ContractViolationError, UnsupportedOperationError
from .linops import Point, ProjectableSet, Segment, as_point, stack_points

_LOGGER = logging.getLogger(__name__)

Matrix = npt.NDArray[np.float64]


@dataclass(frozen=True, eq=False)
class VectorMapping:
    """Evaluation oracle x -> F(x) with optional metadata.

    Attributes:
        evaluate: Pure function returning F(x) with the dimension of x.
        lipschitz_L: Lipschitz constant, if known.
        strong_monotone_mu: Strong monotonicity modulus; 0 means merely monotone.
        jacobian: Optional Jacobian oracle, used only by property tests.
        eval_many: Optional vectorized evaluation on the rows of a 2-D array.
        is_affine: True if the map is affine.
    """

    evaluate: Callable[[Point], Point]
    lipschitz_L: float | None = None
    strong_monotone_mu: float = 0.0
    jacobian: Callable[[Point], Matrix] | None = None
    eval_many: Callable[[Matrix], Matrix] | None = None
    is_affine: bool = False

    def __post_init__(self) -> None:
        if self.lipschitz_L is not None and self.lipschitz_L <= 0:
            raise ContractViolationError("lipschitz_L must be positive")
        if self.strong_monotone_mu < 0:
            raise ContractViolationError("strong_monotone_mu must be >= 0")

    def __call__(self, x: Point) -> Point:
        value = np.asarray(self.evaluate(x), dtype=np.float64)
        if value.shape != x.shape:
            raise ContractViolationError(
                f"Mapping changed dimension: {x.shape} -> {value.shape}"
            )
        return value

    def evaluate_rows(self, points: Matrix) -> Matrix:
        """Evaluate the map on every row of points."""
        if self.eval_many is not None:
            return np.asarray(self.eval_many(points), dtype=np.float64)
        return np.vstack([self(row) for row in points])

    def lipschitz_or(self, default: float) -> float:
        """Lipschitz constant, or default when the metadata is missing."""
        if self.lipschitz_L is None:
            _LOGGER.warning("Missing Lipschitz metadata, assuming L=%s", default)
            return default
        return self.lipschitz_L


@dataclass(frozen=True, eq=False)
class SmoothObjective:
    """Continuously differentiable objective with smoothness metadata."""

    value: Callable[[Point], float]
    gradient: Callable[[Point], Point]
    smoothness_L: float
    strong_convexity_mu: float = 0.0
    gradient_many: Callable[[Matrix], Matrix] | None = None

    def __post_init__(self) -> None:
        if self.smoothness_L <= 0:
            raise ContractViolationError("smoothness_L must be positive")
        if self.strong_convexity_mu < 0:
            raise ContractViolationError("strong_convexity_mu must be >= 0")

    def __call__(self, x: Point) -> float:
        return float(self.value(x))

    def as_mapping(self) -> VectorMapping:
        """The gradient map H := grad f."""
        return VectorMapping(
            evaluate=self.gradient,
            lipschitz_L=self.smoothness_L,
            strong_monotone_mu=self.strong_convexity_mu,
            eval_many=self.gradient_many,
        )


@dataclass(frozen=True)
class WeakSharpness:
    """Weak sharpness constants of SOL(X, F).

    Attributes:
        alpha: Sharpness modulus.
        order_M: Order of the error bound.
        known_threshold: alpha / (2 ||H(x*)||) when the outer solution is known.
    """

    alpha: float
    order_M: float = 1.0
    known_threshold: float | None = None

    def __post_init__(self) -> None:
        if self.alpha <= 0:
            raise ContractViolationError("alpha must be positive")
        if self.order_M < 1:
            raise ContractViolationError("order_M must be >= 1")
        if self.known_threshold is not None and self.known_threshold <= 0:
            raise ContractViolationError("known_threshold must be positive")


@dataclass(frozen=True)
class ProblemBounds:
    """Bound constants over X (and over SOL(X, F) for the starred fields)."""

    D_X_sq: float
    B_F: float | None = None
    B_H: float | None = None
    B_f: float | None = None
    C_F: float | None = None
    C_H: float | None = None
    C_f: float | None = None
    B_star_F: float | None = None
    B_star_H: float | None = None
    B_star_f: float | None = None

    def __post_init__(self) -> None:
        for name, value in vars(self).items():
            if value is not None and value < 0:
                raise ContractViolationError(f"{name} must be >= 0")

    @property
    def D_X(self) -> float:
        return math.sqrt(self.D_X_sq)


@dataclass(frozen=True, eq=False)
class BilevelVIProblem:
    """Inner VI(X, F) with an outer map H or outer objective f over SOL(X, F).

    Attributes:
        inner_set: Feasible set X.
        inner_map: Inner map F.
        outer: Outer map H, or smooth objective f with H := grad f.
        bounds: Bound constants over X.
        sharpness: Weak sharpness of SOL(X, F), if known.
        known_inner_solution_set: SOL(X, F) when it has a closed form.
        known_outer_solution: Solution of the bilevel problem, if known.
        start: Initial point; defaults to the projection of the origin.
        name: Label used in logs.
    """

    inner_set: ProjectableSet
    inner_map: VectorMapping
    outer: VectorMapping | SmoothObjective
    bounds: ProblemBounds
    sharpness: WeakSharpness | None = None
    known_inner_solution_set: ProjectableSet | None = None
    known_outer_solution: Point | None = None
    start: Point | None = None
    name: str = "problem"
    _outer_map: VectorMapping = field(init=False, repr=False)

    def __post_init__(self) -> None:
        dim = self.inner_set.dim
        if self.known_inner_solution_set is not None:
            if self.known_inner_solution_set.dim != dim:
                raise ContractViolationError("Solution set dimension differs from X")
        for label in ("known_outer_solution", "start"):
            point = getattr(self, label)
            if point is not None:
                point = as_point(point)
                self.inner_set.check_dim(point)
                object.__setattr__(self, label, point)
        outer_map = (
            self.outer.as_mapping()
            if isinstance(self.outer, SmoothObjective)
            else self.outer
        )
        object.__setattr__(self, "_outer_map", outer_map)

    @property
    def dim(self) -> int:
        return self.inner_set.dim

    @property
    def outer_map(self) -> VectorMapping:
        """H, or grad f for an objective outer level."""
        return self._outer_map

    @property
    def objective(self) -> SmoothObjective | None:
        """Outer objective f, if the outer level is an objective."""
        return self.outer if isinstance(self.outer, SmoothObjective) else None

    def initial_point(self) -> Point:
        """Feasible starting point x_0."""
        if self.start is not None:
            return self.inner_set.project(self.start)
        return self.inner_set.project(np.zeros(self.dim))

    def with_start(self, start: Point) -> BilevelVIProblem:
        """Copy of the problem with another initial point."""
        return BilevelVIProblem(
            inner_set=self.inner_set,
            inner_map=self.inner_map,
            outer=self.outer,
            bounds=self.bounds,
            sharpness=self.sharpness,
            known_inner_solution_set=self.known_inner_solution_set,
            known_outer_solution=self.known_outer_solution,
            start=start,
            name=self.name,
        )


def regularized_map(problem: BilevelVIProblem, eta: float, x: Point) -> Point:
    """Return F(x) + eta * H(x)."""
    problem.inner_set.check_dim(x)
    value = problem.inner_map(x)
    if eta == 0.0:
        return value
    return value + eta * problem.outer_map(x)


def gap_lower_estimate(
    mapping: VectorMapping, set_samples: Sequence[Point], x: Point
) -> float:
    """Sampled lower estimate of Gap(x) = sup_y F(y)^T (x - y).

    Raises:
        ContractViolationError: If set_samples is empty.
    """
    samples = stack_points(set_samples)
    values = mapping.evaluate_rows(samples)
    return float(np.max(np.sum(values * (x - samples), axis=1)))


class SampledGapEstimator:
    """Sampled dual gap with the map precomputed at a fixed sample set.

    The evaluated point is always part of the candidate set, so the
    estimate is at least 0.
    """

    def __init__(self, mapping: VectorMapping, samples: Matrix) -> None:
        """Precompute F at the sample rows."""
        if samples.ndim != 2 or samples.shape[0] == 0:
            raise ContractViolationError("Gap estimator needs a nonempty 2-D sample")
        self._values = mapping.evaluate_rows(samples)
        self._offsets = np.sum(self._values * samples, axis=1)

    def __call__(self, x: Point) -> float:
        return max(float(np.max(self._values @ x - self._offsets)), 0.0)


def _check_affine_along(h: VectorMapping, segment: Segment) -> tuple[Point, Point]:
    lo, hi = segment.endpoints()
    h_lo, h_hi = h(lo), h(hi)
    h_mid = h(segment.point_at(0.5 * (segment.lower + segment.upper)))
    scale = 1.0 + float(np.linalg.norm(h_lo) + np.linalg.norm(h_hi))
    if np.linalg.norm(h_mid - 0.5 * (h_lo + h_hi)) > 1e-9 * scale:
        raise UnsupportedOperationError("Outer map is not affine along the segment")
    return h_lo, h_hi


def outer_gap_exact_segment(
    h: VectorMapping, segment: ProjectableSet, x: Point
) -> float:
    """Exact sup of H(y)^T (x - y) over a segment for a map affine along it.

    Along the segment the objective is a univariate quadratic in the free
    coordinate, so the supremum is attained at an endpoint or at the
    clipped vertex.

    Raises:
        UnsupportedOperationError: If segment is not a Segment or H is not
            affine along it.
    """
    if not isinstance(segment, Segment):
        raise UnsupportedOperationError(
            f"Exact outer gap needs a Segment, got {type(segment).__name__}"
        )
    segment.check_dim(x)
    candidates = [segment.lower, segment.upper]
    length = segment.upper - segment.lower
    if length > 0:
        h_lo, h_hi = _check_affine_along(h, segment)
        slope = (h_hi - h_lo) / length
        offset = x - segment.anchor
        curvature = float(slope[segment.axis])
        if curvature != 0.0:
            linear = float(slope @ offset) - float(h_lo[segment.axis])
            vertex = segment.lower + linear / (2.0 * curvature)
            candidates.append(min(max(vertex, segment.lower), segment.upper))

    def value_at(t: float) -> float:
        y = segment.point_at(t)
        return float(h(y) @ (x - y))

    return max(value_at(t) for t in candidates)


def infeasibility_terms(mapping: VectorMapping, x: Point) -> tuple[float, float, float]:
    """The three NCP infeasibility terms at x.

    Returns:
        (||max(0, -x)||^2, ||max(0, -F(x))||^2, |x^T F(x)|).
    """
    value = mapping(x)
    return (
        float(np.sum(np.maximum(-x, 0.0) ** 2)),
        float(np.sum(np.maximum(-value, 0.0) ** 2)),
        abs(float(x @ value)),
    )


def infeasibility_phi(mapping: VectorMapping, x: Point) -> float:
    """NCP infeasibility phi(x); zero exactly at solutions of the NCP."""
    return math.fsum(infeasibility_terms(mapping, x))


def natural_residual(problem: BilevelVIProblem, x: Point) -> float:
    """Inner VI residual ||x - Pi_X[x - F(x)]||."""
    step = x - problem.inner_map(x)
    return float(np.linalg.norm(x - problem.inner_set.project(step)))


def monotonicity_witness(
    mapping: VectorMapping, set_: ProjectableSet, pairs: int, seed: int
) -> float:
    """Minimum of (F(x) - F(y))^T (x - y) over sampled pairs of the set."""
    points = set_.sample_array(2 * pairs, seed)
    first, second = points[:pairs], points[pairs:]
    diff = mapping.evaluate_rows(first) - mapping.evaluate_rows(second)
    return float(np.min(np.sum(diff * (first - second), axis=1)))


def hessian_quadratic_form(
    objective: SmoothObjective, x: Point, v: Point, step: float = FD_STEP
) -> float:
    """Central-difference estimate of v^T Hess f(x) v along the unit direction."""
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        return 0.0
    unit = v / norm
    forward = objective.gradient(x + step * unit)
    backward = objective.gradient(x - step * unit)
    curvature = float((forward - backward) @ unit) / (2.0 * step)
    return curvature * norm * norm


def certify_inner_solution_set(
    problem: BilevelVIProblem, members: int, samples: int, seed: int
) -> float:
    """Largest sampled inner gap over sampled members of SOL(X, F).

    Raises:
        UnsupportedOperationError: If no closed-form solution set is attached.
    """
    solution_set = problem.known_inner_solution_set
    if solution_set is None:
        raise UnsupportedOperationError(f"{problem.name} has no known solution set")
    estimator = SampledGapEstimator(
        problem.inner_map, problem.inner_set.sample_array(samples, seed)
    )
    return max(
        estimator(point) for point in solution_set.sample_array(members, seed + 1)
    )


def affine_mapping(
    a: npt.ArrayLike, b: npt.ArrayLike, strong_monotone_mu: float = 0.0
) -> VectorMapping:
    """Build x -> A x + b with spectral-norm Lipschitz metadata."""
    matrix = np.array(a, dtype=np.float64)
    offset = as_point(b)
    if matrix.ndim != 2 or matrix.shape != (offset.shape[0], offset.shape[0]):
        raise ContractViolationError(
            f"Affine map needs a square matrix matching b, got {matrix.shape}"
        )
    matrix.setflags(write=False)
    offset.setflags(write=False)
    norm = float(np.linalg.norm(matrix, 2))
    return VectorMapping(
        evaluate=lambda x: matrix @ x + offset,
        lipschitz_L=norm if norm > 0 else None,
        strong_monotone_mu=strong_monotone_mu,
        jacobian=lambda _x: matrix,
        eval_many=lambda rows: rows @ matrix.T + offset,
        is_affine=True,
    )


def nash_game_map(
    partial_gradients: Sequence[Callable[[Point], Point]],
    block_sizes: Sequence[int],
    lipschitz_L: float | None = None,
) -> VectorMapping:
    """Stack each player's partial gradient into the game map F.

    Args:
        partial_gradients: One callable per player returning the gradient of
            that player's cost in its own block, evaluated at the joint point.
        block_sizes: Size of each player's block.
        lipschitz_L: Lipschitz constant of the stacked map, if known.
    """
    if len(partial_gradients) != len(block_sizes) or not block_sizes:
        raise ContractViolationError("Need one block size per player")
    total = sum(block_sizes)

    def evaluate(x: Point) -> Point:
        if x.shape != (total,):
            raise ContractViolationError(f"Game map expects dim {total}")
        blocks = [np.asarray(g(x), dtype=np.float64) for g in partial_gradients]
        for block, size in zip(blocks, block_sizes, strict=True):
            if block.shape != (size,):
                raise ContractViolationError("Partial gradient has the wrong size")
        return np.concatenate(blocks)

    return VectorMapping(evaluate=evaluate, lipschitz_L=lipschitz_L)


def efficiency_ratios(
    best_value: float, worst_value: float, optimum_value: float
) -> dict[str, float]:
    """Price of Stability and Price of Anarchy for positive social costs."""
    if min(best_value, worst_value, optimum_value) <= 0:
        raise ContractViolationError("Efficiency ratios need positive social costs")
    return {
        "price_of_stability": best_value / optimum_value,
        "price_of_anarchy": worst_value / optimum_value,
    }

