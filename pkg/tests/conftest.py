"""Pytest configuration and fixtures for iregvi tests.

Problem fixtures are built once per session; every problem is immutable,
so tests can share them freely.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from iregvi.instances import (
    TrafficInstance,
    ZeroSumGameInstance,
    build_traffic,
    build_zero_sum,
    random_selection_qp,
    zero_sum_instance,
)
from iregvi.linops import Box, NonnegOrthant
from iregvi.problems import (
    BilevelVIProblem,
    ProblemBounds,
    VectorMapping,
    affine_mapping,
)


@pytest.fixture(scope="session")
def zero_sum() -> ZeroSumGameInstance:
    """The zero-sum game data."""
    return zero_sum_instance()


@pytest.fixture(scope="session")
def zero_sum_best() -> BilevelVIProblem:
    """Best-equilibrium selection on the zero-sum game."""
    return build_zero_sum(best=True)


@pytest.fixture(scope="session")
def zero_sum_worst() -> BilevelVIProblem:
    """Worst-equilibrium selection on the zero-sum game."""
    return build_zero_sum(best=False)


@pytest.fixture(scope="session")
def zero_sum_monotone(zero_sum: ZeroSumGameInstance) -> BilevelVIProblem:
    """Zero-sum game with the outer map H(x) = x given as a map, not an objective."""
    return BilevelVIProblem(
        inner_set=zero_sum.box,
        inner_map=zero_sum.mapping(),
        outer=affine_mapping(np.eye(2), np.zeros(2), strong_monotone_mu=1.0),
        bounds=zero_sum.bounds(zero_sum.best_ne),
        known_inner_solution_set=zero_sum.solution_segment,
        known_outer_solution=zero_sum.best_ne,
        start=zero_sum.box.center(),
        name="zs_map",
    )


@pytest.fixture(scope="session")
def traffic() -> tuple[BilevelVIProblem, TrafficInstance]:
    """Traffic NCP with BPR exponent 1.2."""
    return build_traffic(1.2)


@pytest.fixture(scope="session")
def selection_problem() -> BilevelVIProblem:
    """Lifted random selection QP with seed 0."""
    return random_selection_qp(0).build()


@pytest.fixture
def exploding_problem() -> BilevelVIProblem:
    """Problem whose extragradient iterates overflow on the first iteration."""
    return BilevelVIProblem(
        inner_set=NonnegOrthant(2),
        inner_map=VectorMapping(evaluate=lambda x: -1e200 * (x + 1.0)),
        outer=VectorMapping(evaluate=np.zeros_like),
        bounds=ProblemBounds(D_X_sq=math.inf),
        start=np.ones(2),
        name="exploding",
    )


@pytest.fixture
def unit_box() -> Box:
    """The unit square."""
    return Box(np.zeros(2), np.ones(2))


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded random generator."""
    return np.random.default_rng(1234)
