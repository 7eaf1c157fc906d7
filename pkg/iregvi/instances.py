"""Concrete problem instances: zero-sum game, solution selection and traffic NCP."""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from functools import cache
from importlib import resources
from pathlib import Path

import networkx as nx
import numpy as np
import numpy.typing as npt

from .const import (
    BPR_COEFFICIENT,
    DELTA_FILE,
    OMEGA_FILE,
    SMOOTHNESS_FLOOR,
    TRAFFIC_ARCS,
    TRAFFIC_CAPACITY,
    TRAFFIC_DEMAND,
    TRAFFIC_FREE_TIME,
    TRAFFIC_NODE_COUNT,
    TRAFFIC_OD_PAIRS,
    TRAFFIC_REFERENCE_FLOW_FLOOR,
    ZERO_SUM_A,
    ZERO_SUM_ALPHA,
    ZERO_SUM_B,
    ZERO_SUM_CERTIFY_SAMPLES,
    ZERO_SUM_LOWER,
    ZERO_SUM_ORDER,
    ZERO_SUM_SEGMENT_LEVEL,
    ZERO_SUM_SHARPNESS_SAMPLES,
    ZERO_SUM_UPPER,
)
from .errors import ConstructionError, ContractViolationError
from .linops import Box, NonnegOrthant, Point, Product, ProjectableSet, Segment
from .problems import (
    BilevelVIProblem,
    ProblemBounds,
    SmoothObjective,
    VectorMapping,
    WeakSharpness,
    affine_mapping,
    certify_inner_solution_set,
)

_LOGGER = logging.getLogger(__name__)

Matrix = npt.NDArray[np.float64]


# =============================================================================
# Zero-sum game
# =============================================================================


@dataclass(frozen=True, eq=False)
class ZeroSumGameInstance:
    """Two-player zero-sum game F(x) = A x + b on a box with a segment of equilibria."""

    A: Matrix
    b: Point
    box: Box
    solution_segment: Segment
    best_ne: Point
    worst_ne: Point

    @property
    def recommended_gamma(self) -> float:
        """Stepsize 1 / (2 ||A||_F)."""
        return 1.0 / (2.0 * float(np.linalg.norm(self.A, "fro")))

    def mapping(self) -> VectorMapping:
        return affine_mapping(self.A, self.b)

    def bounds(self, outer_solution: Point) -> ProblemBounds:
        """Exact bound constants from the box and segment geometry.

        Norms of affine maps are convex, so their suprema over the box and
        over the segment are attained at vertices and endpoints.
        """
        mapping = self.mapping()
        corners = np.vstack(self.box.vertices())
        ends = np.vstack(self.solution_segment.endpoints())
        corner_norm = float(np.max(np.linalg.norm(corners, axis=1)))
        end_norm = float(np.max(np.linalg.norm(ends, axis=1)))
        star_norm = float(np.linalg.norm(outer_solution))
        return ProblemBounds(
            D_X_sq=self.box.diameter_sq_half,
            B_F=float(np.max(np.linalg.norm(mapping.evaluate_rows(ends), axis=1))),
            B_H=end_norm,
            B_f=end_norm,
            C_F=float(np.max(np.linalg.norm(mapping.evaluate_rows(corners), axis=1))),
            C_H=corner_norm,
            C_f=corner_norm,
            B_star_F=float(np.linalg.norm(mapping(outer_solution))),
            B_star_H=star_norm,
            B_star_f=star_norm,
        )


def social_cost(x: Point) -> float:
    """psi(x) = 1/2 ||x||^2."""
    return 0.5 * float(x @ x)


def _validate_sharpness(instance: ZeroSumGameInstance, alpha: float) -> None:
    samples = instance.box.sample_array(ZERO_SUM_SHARPNESS_SAMPLES, 0)
    members = instance.solution_segment.sample_array(ZERO_SUM_SHARPNESS_SAMPLES, 1)
    values = instance.mapping().evaluate_rows(members)
    lhs = np.sum(values * (samples - members), axis=1)
    axis = instance.solution_segment.axis
    dists = np.abs(samples[:, 1 - axis] - ZERO_SUM_SEGMENT_LEVEL)
    worst = float(np.min(lhs - alpha * dists))
    if worst < -1e-9:
        raise ConstructionError(
            f"Weak sharpness with alpha={alpha} fails by {-worst:.3e} on samples"
        )


@cache
def zero_sum_instance() -> ZeroSumGameInstance:
    """The zero-sum game instance, validated once per process."""
    lower = np.array(ZERO_SUM_LOWER)
    upper = np.array(ZERO_SUM_UPPER)
    a = np.array(ZERO_SUM_A)
    a.setflags(write=False)
    b = np.array(ZERO_SUM_B)
    b.setflags(write=False)
    segment = Segment(
        anchor=np.array([lower[0], ZERO_SUM_SEGMENT_LEVEL]),
        axis=0,
        lower=lower[0],
        upper=upper[0],
    )
    best, worst = segment.endpoints()
    best.setflags(write=False)
    worst.setflags(write=False)
    instance = ZeroSumGameInstance(
        A=a,
        b=b,
        box=Box(lower, upper),
        solution_segment=segment,
        best_ne=best,
        worst_ne=worst,
    )
    _validate_sharpness(instance, ZERO_SUM_ALPHA)
    return instance


def weak_sharpness_of_zero_sum(best: bool | None = None) -> WeakSharpness:
    """Weak sharpness of the zero-sum equilibrium segment (alpha = 1.1, M = 1).

    Args:
        best: If given, attach the threshold alpha / (2 ||H(x*)||) for the best
            (H(x) = x) or worst (H(x) = -x) equilibrium selection.

    Raises:
        ConstructionError: If the constants fail on sampled pairs.
    """
    instance = zero_sum_instance()
    threshold = None
    if best is not None:
        x_star = instance.best_ne if best else instance.worst_ne
        threshold = ZERO_SUM_ALPHA / (2.0 * float(np.linalg.norm(x_star)))
    return WeakSharpness(
        alpha=ZERO_SUM_ALPHA, order_M=ZERO_SUM_ORDER, known_threshold=threshold
    )


def build_zero_sum(best: bool = True, start: Point | None = None) -> BilevelVIProblem:
    """Equilibrium selection on the zero-sum game.

    Args:
        best: Minimize psi(x) = 1/2 ||x||^2 over the equilibria when True,
            maximize it (minimize -psi) otherwise.
        start: Initial point; defaults to the box center.
    """
    instance = zero_sum_instance()
    if best:
        outer = SmoothObjective(
            value=social_cost,
            gradient=lambda x: x.copy(),
            smoothness_L=1.0,
            strong_convexity_mu=1.0,
            gradient_many=lambda rows: rows.copy(),
        )
        solution = instance.best_ne
    else:
        outer = SmoothObjective(
            value=lambda x: -social_cost(x),
            gradient=lambda x: -x,
            smoothness_L=1.0,
            gradient_many=lambda rows: -rows,
        )
        solution = instance.worst_ne
    problem = BilevelVIProblem(
        inner_set=instance.box,
        inner_map=instance.mapping(),
        outer=outer,
        bounds=instance.bounds(solution),
        sharpness=weak_sharpness_of_zero_sum(best),
        known_inner_solution_set=instance.solution_segment,
        known_outer_solution=solution,
        start=instance.box.center() if start is None else start,
        name="zs_best" if best else "zs_worst",
    )
    gap = certify_inner_solution_set(problem, 50, ZERO_SUM_CERTIFY_SAMPLES, 0)
    if gap > 1e-10:
        raise ConstructionError(f"Equilibrium segment fails certification: {gap}")
    return problem


# =============================================================================
# Optimal solution selection
# =============================================================================


@dataclass(frozen=True, eq=False)
class SelectionInstance:
    """Convex program min g(y) s.t. h(y) <= 0, y in Y, with a secondary objective."""

    g: SmoothObjective
    h_constraints: tuple[SmoothObjective, ...]
    Y: ProjectableSet
    secondary: SmoothObjective
    lipschitz_L: float | None = None
    extras: dict[str, Matrix] = field(default_factory=dict)

    def build(self) -> BilevelVIProblem:
        return build_selection(
            self.g, self.h_constraints, self.Y, self.secondary, self.lipschitz_L
        )


def build_selection(
    g: SmoothObjective,
    h_list: Sequence[SmoothObjective],
    y_set: ProjectableSet,
    phi: SmoothObjective,
    lipschitz_L: float | None = None,
) -> BilevelVIProblem:
    """Lift a constrained convex program into a bilevel VI over Y x R^q_+.

    The inner map is the Lagrangian map F([y; lam]) = [grad g(y) + sum
    lam_i grad h_i(y); -h(y)] and the outer objective acts on y only.

    Raises:
        ContractViolationError: If the gradients do not match Y's dimension.
    """
    p = y_set.dim
    q = len(h_list)
    probe = y_set.project(np.zeros(p))
    for objective in (g, phi, *h_list):
        if np.shape(objective.gradient(probe)) != (p,):
            raise ContractViolationError("Gradient dimension differs from Y")

    def evaluate(x: Point) -> Point:
        y, lam = x[:p], x[p:]
        upper = g.gradient(y).astype(np.float64, copy=True)
        for weight, h in zip(lam, h_list, strict=True):
            upper += weight * h.gradient(y)
        lower = np.array([-h(y) for h in h_list])
        return np.concatenate([upper, lower])

    def lifted_gradient(x: Point) -> Point:
        return np.concatenate([phi.gradient(x[:p]), np.zeros(q)])

    inner_set = Product((y_set, NonnegOrthant(q))) if q else y_set
    return BilevelVIProblem(
        inner_set=inner_set,
        inner_map=VectorMapping(evaluate=evaluate, lipschitz_L=lipschitz_L),
        outer=SmoothObjective(
            value=lambda x: phi(x[:p]),
            gradient=lifted_gradient,
            smoothness_L=phi.smoothness_L,
        ),
        bounds=ProblemBounds(D_X_sq=math.inf),
        start=np.zeros(p + q),
        name="selection",
    )


def _quadratic(q: Matrix, c: Point) -> SmoothObjective:
    top = float(np.max(np.linalg.eigvalsh(q))) if q.size else 0.0
    return SmoothObjective(
        value=lambda y: 0.5 * float(y @ q @ y) + float(c @ y),
        gradient=lambda y: q @ y + c,
        smoothness_L=max(top, SMOOTHNESS_FLOOR),
    )


def _linear(a: Point, e: float) -> SmoothObjective:
    return SmoothObjective(
        value=lambda y: float(a @ y) - e,
        gradient=lambda _y: a.copy(),
        smoothness_L=SMOOTHNESS_FLOOR,
    )


def random_selection_qp(
    seed: int, p: int = 4, q: int = 2, rank: int = 2
) -> SelectionInstance:
    """Random convex QP with linear constraints and a rank-deficient Hessian.

    The QP generally has a face of minimizers, and the secondary objective
    1/2 ||y - y_ref||^2 selects one of them.
    """
    if not 1 <= rank <= p:
        raise ContractViolationError("rank must lie in [1, p]")
    rng = np.random.default_rng(seed)
    factor = rng.standard_normal((p, rank))
    hessian = factor @ factor.T
    linear = factor @ rng.standard_normal(rank)
    constraints = rng.standard_normal((q, p))
    slack = rng.uniform(0.5, 1.5, size=q)
    y_ref = rng.uniform(-1.0, 1.0, size=p)
    block = np.block([[hessian, constraints.T], [-constraints, np.zeros((q, q))]])
    bounds = zip(constraints, slack, strict=True)
    return SelectionInstance(
        g=_quadratic(hessian, linear),
        h_constraints=tuple(_linear(row, float(e)) for row, e in bounds),
        Y=Box(-2.0 * np.ones(p), 2.0 * np.ones(p)),
        secondary=SmoothObjective(
            value=lambda y: 0.5 * float((y - y_ref) @ (y - y_ref)),
            gradient=lambda y: y - y_ref,
            smoothness_L=1.0,
            strong_convexity_mu=1.0,
        ),
        lipschitz_L=float(np.linalg.norm(block, 2)),
        extras={"hessian": hessian, "constraints": constraints, "y_ref": y_ref},
    )


def selection_sampling_box(
    instance: SelectionInstance, multiplier_bound: float
) -> Product:
    """Bounded region Y x [0, multiplier_bound]^q for sampling the lifted map."""
    q = len(instance.h_constraints)
    return Product((instance.Y, Box(np.zeros(q), multiplier_bound * np.ones(q))))


# =============================================================================
# Traffic equilibrium
# =============================================================================


def load_incidence(path: Path | str) -> npt.NDArray[np.int64]:
    """Read a 0/1 incidence matrix whose first line holds its dimensions.

    Raises:
        ConstructionError: If the file is malformed.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as err:
        _LOGGER.error("Cannot read incidence file %s: %s", path, err)
        raise ConstructionError(f"Cannot read incidence file {path}") from err
    lines = [line for line in text.splitlines() if line.strip()]
    try:
        rows, cols = (int(v) for v in lines[0].split())
        matrix = np.array([[int(v) for v in line.split()] for line in lines[1:]])
    except (ValueError, IndexError) as err:
        raise ConstructionError(f"Malformed incidence file {path}: {err}") from err
    if matrix.shape != (rows, cols):
        raise ConstructionError(
            f"Incidence file {path} declares {rows}x{cols}, holds {matrix.shape}"
        )
    if not np.isin(matrix, (0, 1)).all():
        raise ConstructionError(f"Incidence file {path} has entries other than 0/1")
    return matrix.astype(np.int64)


def _default_path(name: str) -> Path:
    return Path(str(resources.files("iregvi") / "data" / name))


def traffic_graph() -> nx.DiGraph:
    """The 13-node, 19-arc network; arc index stored on each edge."""
    graph = nx.DiGraph()
    graph.add_nodes_from(range(1, TRAFFIC_NODE_COUNT + 1))
    for index, (tail, head) in enumerate(TRAFFIC_ARCS):
        graph.add_edge(tail, head, index=index)
    return graph


def _column_path(
    graph: nx.DiGraph, column: npt.NDArray[np.int64], origin: int, destination: int
) -> tuple[int, ...]:
    arcs = [TRAFFIC_ARCS[a] for a in np.flatnonzero(column)]
    sub = nx.DiGraph(arcs)
    if origin not in sub or destination not in sub:
        raise ConstructionError(f"Path column does not touch {origin}->{destination}")
    try:
        nodes = nx.shortest_path(sub, origin, destination)
    except nx.NetworkXNoPath as err:
        raise ConstructionError(
            f"Path column is not connected from {origin} to {destination}"
        ) from err
    if len(nodes) - 1 != sub.number_of_edges():
        raise ConstructionError("Path column holds arcs off its route")
    if not nx.is_simple_path(graph, nodes):
        raise ConstructionError("Path column is not a simple path of the network")
    return tuple(nodes)


def validate_topology(
    delta: npt.NDArray[np.int64], omega: npt.NDArray[np.int64]
) -> None:
    """Check that every column is a simple OD path and that all paths are present.

    Raises:
        ConstructionError: On any structural mismatch.
    """
    arcs, paths = len(TRAFFIC_ARCS), delta.shape[1]
    if delta.shape != (arcs, paths) or omega.shape != (len(TRAFFIC_OD_PAIRS), paths):
        raise ConstructionError(
            f"Incidence shapes {delta.shape} and {omega.shape} do not match the network"
        )
    if not np.all(omega.sum(axis=0) == 1):
        raise ConstructionError("Every path must serve exactly one OD pair")
    graph = traffic_graph()
    for pair, (origin, destination) in enumerate(TRAFFIC_OD_PAIRS):
        columns = np.flatnonzero(omega[pair])
        found = {_column_path(graph, delta[:, j], origin, destination) for j in columns}
        expected = {
            tuple(p) for p in nx.all_simple_paths(graph, origin, destination)
        }
        if len(found) != len(columns) or found != expected:
            raise ConstructionError(
                f"OD pair {origin}->{destination}: {len(found)} distinct columns, "
                f"{len(expected)} simple paths in the network"
            )


def _flow_power(ratio: Matrix, power: Matrix) -> Matrix:
    """ratio ** power with the limit taken at zero flow.

    Raises:
        ContractViolationError: If a zero ratio meets a negative power.
    """
    ratio, power = np.broadcast_arrays(ratio, power)
    at_zero = ratio <= 0.0
    if np.any(at_zero & (power < 0.0)):
        raise ContractViolationError(
            "BPR cost derivative is unbounded at zero arc flow for this exponent"
        )
    result = np.where(power == 0.0, 1.0, 0.0)
    np.power(ratio, power, out=result, where=~at_zero)
    return result


@dataclass(frozen=True, eq=False)
class TrafficInstance:
    """Path-based traffic equilibrium data with BPR arc costs."""

    free_time: Point
    capacity: Point
    exponents: Point
    demand: Point
    delta: Matrix
    omega: Matrix

    @property
    def num_paths(self) -> int:
        return int(self.delta.shape[1])

    @property
    def dim(self) -> int:
        return self.num_paths + int(self.omega.shape[0])

    @property
    def arc_path_counts(self) -> Point:
        """Number of paths through each arc."""
        return self.delta.sum(axis=1)

    def arc_costs(self, flows: Matrix) -> Matrix:
        """BPR cost t0 (1 + 0.15 (flow / cap)^n), flows clamped at 0."""
        ratio = np.maximum(flows, 0.0) / self.capacity
        return self.free_time * (1.0 + BPR_COEFFICIENT * ratio**self.exponents)

    def arc_cost_derivatives(self, flows: Matrix) -> Matrix:
        """Slope of every arc cost; at zero flow the one-sided limit.

        Raises:
            ContractViolationError: If an arc with exponent below 1 carries
                zero flow, where its slope is unbounded.
        """
        ratio = np.maximum(flows, 0.0) / self.capacity
        scale = self.free_time * BPR_COEFFICIENT * self.exponents / self.capacity
        return scale * _flow_power(ratio, self.exponents - 1.0)

    def arc_cost_second_derivatives(self, flows: Matrix) -> Matrix:
        ratio = np.maximum(flows, 0.0) / self.capacity
        n = self.exponents
        scale = self.free_time * BPR_COEFFICIENT * n * (n - 1.0) / self.capacity**2
        # Affine arcs have zero curvature at every flow.
        curved = n != 1.0
        powered = _flow_power(ratio, np.where(curved, n - 2.0, 0.0))
        return np.where(curved, scale * powered, 0.0)

    def path_costs(self, h: Matrix) -> Matrix:
        """C(h) = Delta^T c(Delta h) for a vector or for rows of path flows."""
        return self.arc_costs(h @ self.delta.T) @ self.delta

    def evaluate_rows(self, points: Matrix) -> Matrix:
        h, u = points[:, : self.num_paths], points[:, self.num_paths :]
        top = self.path_costs(h) - u @ self.omega
        bottom = h @ self.omega.T - self.demand
        return np.hstack([top, bottom])

    def evaluate(self, x: Point) -> Point:
        """F(x) = [C(h) - Omega^T u; Omega h - d]."""
        return self.evaluate_rows(x[np.newaxis, :])[0]

    def jacobian(self, x: Point) -> Matrix:
        h = x[: self.num_paths]
        slopes = self.arc_cost_derivatives(self.delta @ h)
        top_left = self.delta.T @ (slopes[:, np.newaxis] * self.delta)
        pairs = self.omega.shape[0]
        return np.block(
            [[top_left, -self.omega.T], [self.omega, np.zeros((pairs, pairs))]]
        )

    def total_cost(self, x: Point) -> float:
        """1^T C(h) = sum_a m_a c_a(flow_a), m_a the paths through arc a."""
        flows = self.delta @ x[: self.num_paths]
        return float(self.arc_path_counts @ self.arc_costs(flows))

    def total_cost_gradient(self, x: Point) -> Point:
        flows = self.delta @ x[: self.num_paths]
        weighted = self.arc_path_counts * self.arc_cost_derivatives(flows)
        return np.concatenate([self.delta.T @ weighted, np.zeros(self.omega.shape[0])])

    def reference_lipschitz(self) -> float:
        """Spectral norm of the Jacobian with every arc carrying the total demand."""
        flows = np.full(self.delta.shape[0], float(self.demand.sum()))
        slopes = self.arc_cost_derivatives(flows)
        x = np.zeros(self.dim)
        jac = self.jacobian(x)
        jac[: self.num_paths, : self.num_paths] = self.delta.T @ (
            slopes[:, np.newaxis] * self.delta
        )
        return float(np.linalg.norm(jac, 2))

    def reference_smoothness(self) -> float:
        """Nominal smoothness of the total cost with arc flows floored at 1."""
        flows = np.full(self.delta.shape[0], TRAFFIC_REFERENCE_FLOW_FLOOR)
        curvature = self.arc_path_counts * self.arc_cost_second_derivatives(flows)
        hessian = self.delta.T @ (curvature[:, np.newaxis] * self.delta)
        return max(float(np.linalg.norm(hessian, 2)), SMOOTHNESS_FLOOR)


def traffic_instance(
    n_a_value: float,
    delta_path: Path | str | None = None,
    omega_path: Path | str | None = None,
) -> TrafficInstance:
    """Load and validate the Nguyen-Dupuis network with a uniform BPR exponent.

    Raises:
        ConstructionError: If the incidence data is invalid.
        ContractViolationError: If n_a_value is not positive.
    """
    if n_a_value <= 0:
        raise ContractViolationError("BPR exponent must be positive")
    delta = load_incidence(delta_path or _default_path(DELTA_FILE))
    omega = load_incidence(omega_path or _default_path(OMEGA_FILE))
    validate_topology(delta, omega)
    arrays = [
        np.array(values, dtype=np.float64)
        for values in (
            TRAFFIC_FREE_TIME,
            TRAFFIC_CAPACITY,
            np.full(len(TRAFFIC_ARCS), float(n_a_value)),
            TRAFFIC_DEMAND,
            delta,
            omega,
        )
    ]
    for array in arrays:
        array.setflags(write=False)
    return TrafficInstance(*arrays)


def build_traffic(
    n_a_value: float,
    negate_objective: bool = False,
    delta_path: Path | str | None = None,
    omega_path: Path | str | None = None,
) -> tuple[BilevelVIProblem, TrafficInstance]:
    """Traffic NCP on the nonnegative orthant with total travel cost as outer objective.

    Args:
        n_a_value: BPR exponent applied to every arc.
        negate_objective: Use -1^T C(h), the nonconvex variant.
        delta_path: Arc-path incidence file; the packaged file by default.
        omega_path: OD-path incidence file; the packaged file by default.
    """
    instance = traffic_instance(n_a_value, delta_path, omega_path)
    sign = -1.0 if negate_objective else 1.0
    objective = SmoothObjective(
        value=lambda x: sign * instance.total_cost(x),
        gradient=lambda x: sign * instance.total_cost_gradient(x),
        smoothness_L=instance.reference_smoothness(),
    )
    mapping = VectorMapping(
        evaluate=instance.evaluate,
        lipschitz_L=instance.reference_lipschitz(),
        jacobian=instance.jacobian,
        eval_many=instance.evaluate_rows,
        is_affine=n_a_value == 1.0,
    )
    problem = BilevelVIProblem(
        inner_set=NonnegOrthant(instance.dim),
        inner_map=mapping,
        outer=objective,
        bounds=ProblemBounds(D_X_sq=math.inf),
        start=np.zeros(instance.dim),
        name=f"traffic(n={n_a_value:g})",
    )
    _LOGGER.debug(
        "Built %s with L_F=%.6g and L_f=%.6g",
        problem.name,
        mapping.lipschitz_L,
        objective.smoothness_L,
    )
    return problem, instance
