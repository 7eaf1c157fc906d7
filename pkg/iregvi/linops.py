"""Dense points and exact Euclidean projections onto simple convex sets.

Every set used by the solvers decomposes into boxes, nonnegative orthants,
axis-aligned segments and products of these, so each projection below is a
closed-form clamp.
"""

from __future__ import annotations

import itertools
from abc import ABC, abstractmethod
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import TypeAlias

import numpy as np
import numpy.typing as npt

from .const import MEMBERSHIP_TOL
from .errors import ContractViolationError, UnsupportedOperationError

Point: TypeAlias = npt.NDArray[np.float64]


def as_point(values: npt.ArrayLike) -> Point:
    """Convert values to a fresh one-dimensional finite float64 vector.

    Raises:
        ContractViolationError: If the input is not 1-D or holds NaN/Inf.
    """
    point = np.array(values, dtype=np.float64)
    if point.ndim != 1:
        raise ContractViolationError(f"Expected a 1-D point, got shape {point.shape}")
    if not np.all(np.isfinite(point)):
        raise ContractViolationError("Point has non-finite coordinates")
    return point


def _frozen(values: npt.ArrayLike) -> Point:
    point = as_point(values)
    point.setflags(write=False)
    return point


class ProjectableSet(ABC):
    """Closed convex set with an exact projection oracle."""

    @property
    @abstractmethod
    def dim(self) -> int:
        """Ambient dimension."""

    @property
    @abstractmethod
    def is_bounded(self) -> bool:
        """True if uniform sampling is supported."""

    @abstractmethod
    def _project(self, u: Point) -> Point: ...

    @abstractmethod
    def _sample(self, rng: np.random.Generator, count: int) -> npt.NDArray[np.float64]:
        ...

    def check_dim(self, u: Point) -> None:
        """Raise ContractViolationError if u has the wrong dimension."""
        if u.shape != (self.dim,):
            raise ContractViolationError(
                f"Dimension mismatch: set has dim {self.dim}, point has shape {u.shape}"
            )

    def project(self, u: Point) -> Point:
        """Euclidean projection of u onto the set."""
        self.check_dim(u)
        return self._project(u)

    def distance(self, u: Point) -> float:
        """Euclidean distance from u to the set."""
        return float(np.linalg.norm(u - self.project(u)))

    def contains(self, u: Point, tol: float = MEMBERSHIP_TOL) -> bool:
        """Membership test with absolute tolerance."""
        return self.distance(u) <= tol

    def sample_array(self, count: int, seed: int) -> npt.NDArray[np.float64]:
        """Sample count points as rows of a (count, dim) array."""
        if count < 1:
            raise ContractViolationError(f"Sample count must be >= 1, got {count}")
        if not self.is_bounded:
            raise UnsupportedOperationError(
                f"Cannot sample uniformly from unbounded {type(self).__name__}"
            )
        return self._sample(np.random.default_rng(seed), count)


@dataclass(frozen=True, eq=False)
class Box(ProjectableSet):
    """Axis-aligned box {u : lower <= u <= upper}."""

    lower: Point
    upper: Point

    def __post_init__(self) -> None:
        lower = _frozen(self.lower)
        upper = _frozen(self.upper)
        if lower.shape != upper.shape:
            raise ContractViolationError("Box bounds have different dimensions")
        if np.any(lower > upper):
            raise ContractViolationError("Box requires lower <= upper componentwise")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dim(self) -> int:
        return int(self.lower.shape[0])

    @property
    def is_bounded(self) -> bool:
        return True

    @property
    def diameter_sq_half(self) -> float:
        """Exact D_X^2 = 1/2 ||upper - lower||^2."""
        return 0.5 * float(np.sum((self.upper - self.lower) ** 2))

    def center(self) -> Point:
        return 0.5 * (self.lower + self.upper)

    def vertices(self) -> list[Point]:
        """All 2^dim corners of the box."""
        pairs = zip(self.lower, self.upper, strict=True)
        return [np.array(corner) for corner in itertools.product(*pairs)]

    def _project(self, u: Point) -> Point:
        return np.clip(u, self.lower, self.upper)

    def _sample(self, rng: np.random.Generator, count: int) -> npt.NDArray[np.float64]:
        return rng.uniform(self.lower, self.upper, size=(count, self.dim))


@dataclass(frozen=True, eq=False)
class NonnegOrthant(ProjectableSet):
    """Nonnegative orthant of the given dimension."""

    size: int

    def __post_init__(self) -> None:
        if self.size < 1:
            raise ContractViolationError("NonnegOrthant needs dimension >= 1")

    @property
    def dim(self) -> int:
        return self.size

    @property
    def is_bounded(self) -> bool:
        return False

    def _project(self, u: Point) -> Point:
        return np.maximum(u, 0.0)

    def _sample(self, rng: np.random.Generator, count: int) -> npt.NDArray[np.float64]:
        raise UnsupportedOperationError("NonnegOrthant is unbounded")


@dataclass(frozen=True, eq=False)
class Segment(ProjectableSet):
    """Axis-aligned segment: anchor with coordinate `axis` free in [lower, upper]."""

    anchor: Point
    axis: int
    lower: float
    upper: float

    def __post_init__(self) -> None:
        anchor = as_point(self.anchor)
        if not 0 <= self.axis < anchor.shape[0]:
            raise ContractViolationError(f"Segment axis {self.axis} out of range")
        if self.lower > self.upper:
            raise ContractViolationError("Segment requires lower <= upper")
        anchor[self.axis] = self.lower
        anchor.setflags(write=False)
        object.__setattr__(self, "anchor", anchor)
        object.__setattr__(self, "lower", float(self.lower))
        object.__setattr__(self, "upper", float(self.upper))

    @property
    def dim(self) -> int:
        return int(self.anchor.shape[0])

    @property
    def is_bounded(self) -> bool:
        return True

    def point_at(self, t: float) -> Point:
        """Point of the segment whose free coordinate equals t."""
        point = self.anchor.copy()
        point[self.axis] = t
        return point

    def endpoints(self) -> tuple[Point, Point]:
        return self.point_at(self.lower), self.point_at(self.upper)

    def _project(self, u: Point) -> Point:
        return self.point_at(float(np.clip(u[self.axis], self.lower, self.upper)))

    def _sample(self, rng: np.random.Generator, count: int) -> npt.NDArray[np.float64]:
        points = np.tile(self.anchor, (count, 1))
        points[:, self.axis] = rng.uniform(self.lower, self.upper, size=count)
        return points


@dataclass(frozen=True, eq=False)
class Product(ProjectableSet):
    """Cartesian product of sets acting on consecutive coordinate blocks."""

    factors: tuple[ProjectableSet, ...]
    _offsets: tuple[int, ...] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if not self.factors:
            raise ContractViolationError("Product needs at least one factor")
        object.__setattr__(self, "factors", tuple(self.factors))
        offsets = np.cumsum([0] + [f.dim for f in self.factors])
        object.__setattr__(self, "_offsets", tuple(int(o) for o in offsets))

    @property
    def dim(self) -> int:
        return self._offsets[-1]

    @property
    def is_bounded(self) -> bool:
        return all(f.is_bounded for f in self.factors)

    def split(self, u: Point) -> list[Point]:
        """Split u into the blocks of the factors."""
        return [
            u[start:stop]
            for start, stop in itertools.pairwise(self._offsets)
        ]

    def _project(self, u: Point) -> Point:
        blocks = self.split(u)
        return np.concatenate(
            [f.project(block) for f, block in zip(self.factors, blocks, strict=True)]
        )

    def _sample(self, rng: np.random.Generator, count: int) -> npt.NDArray[np.float64]:
        return np.hstack([f._sample(rng, count) for f in self.factors])


def project(set_: ProjectableSet, u: Point) -> Point:
    """Euclidean projection of u onto set_."""
    return set_.project(u)


def distance_to(set_: ProjectableSet, u: Point) -> float:
    """Distance ||u - project(set_, u)||."""
    return set_.distance(u)


def sample_uniform(set_: ProjectableSet, count: int, seed: int) -> list[Point]:
    """Deterministic uniform samples from a bounded set.

    Raises:
        ContractViolationError: If count < 1.
        UnsupportedOperationError: If the set is unbounded.
    """
    return list(set_.sample_array(count, seed))


def stack_points(points: Sequence[Point]) -> npt.NDArray[np.float64]:
    """Stack points as rows of a 2-D array."""
    if len(points) == 0:
        raise ContractViolationError("Expected at least one point")
    return np.vstack([np.asarray(p, dtype=np.float64) for p in points])
