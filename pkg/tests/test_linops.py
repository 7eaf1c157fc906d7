"""Tests for points, sets and projections."""

from __future__ import annotations

import math

import numpy as np
import pytest

from iregvi.errors import ContractViolationError, UnsupportedOperationError
from iregvi.linops import (
    Box,
    NonnegOrthant,
    Product,
    Segment,
    as_point,
    distance_to,
    project,
    sample_uniform,
    stack_points,
)


class TestAsPoint:
    """Tests for as_point."""

    def test_copies_input(self) -> None:
        """Test that the result does not alias the input."""
        values = np.array([1.0, 2.0])
        point = as_point(values)
        values[0] = 5.0
        assert point[0] == 1.0

    def test_rejects_matrix(self) -> None:
        """Test that 2-D input is rejected."""
        with pytest.raises(ContractViolationError):
            as_point(np.zeros((2, 2)))

    def test_rejects_nan(self) -> None:
        """Test that non-finite coordinates are rejected."""
        with pytest.raises(ContractViolationError):
            as_point([1.0, math.nan])


class TestBox:
    """Tests for Box."""

    def test_projection_clamps(self, unit_box: Box) -> None:
        """Test componentwise clamping."""
        assert np.array_equal(unit_box.project(np.array([-1.0, 0.5])), [0.0, 0.5])
        assert np.array_equal(unit_box.project(np.array([2.0, 3.0])), [1.0, 1.0])

    def test_projection_of_member_is_identity(self, unit_box: Box) -> None:
        """Test that members are fixed points."""
        point = np.array([0.25, 0.75])
        assert np.array_equal(project(unit_box, point), point)

    def test_distance(self, unit_box: Box) -> None:
        """Test the distance to the box."""
        assert distance_to(unit_box, np.array([4.0, 5.0])) == pytest.approx(5.0)

    def test_contains(self, unit_box: Box) -> None:
        """Test membership with tolerance."""
        assert unit_box.contains(np.array([1.0 + 1e-12, 0.0]))
        assert not unit_box.contains(np.array([1.1, 0.0]))

    def test_diameter(self) -> None:
        """Test D_X^2 = 1/2 ||upper - lower||^2."""
        box = Box(np.array([11.0, 10.0]), np.array([60.0, 50.0]))
        assert box.diameter_sq_half == pytest.approx(2000.5)

    def test_vertices(self, unit_box: Box) -> None:
        """Test that all corners are listed."""
        corners = {tuple(v) for v in unit_box.vertices()}
        assert corners == {(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)}

    def test_invalid_bounds(self) -> None:
        """Test that lower > upper is rejected."""
        with pytest.raises(ContractViolationError):
            Box(np.array([1.0]), np.array([0.0]))

    def test_bounds_are_read_only(self, unit_box: Box) -> None:
        """Test that the bounds cannot be mutated."""
        with pytest.raises(ValueError):
            unit_box.lower[0] = 5.0

    def test_dimension_mismatch(self, unit_box: Box) -> None:
        """Test that a point of the wrong dimension is rejected."""
        with pytest.raises(ContractViolationError):
            unit_box.project(np.zeros(3))

    def test_sampling_is_seeded_and_inside(self, unit_box: Box) -> None:
        """Test that samples lie in the box and repeat for a seed."""
        first = sample_uniform(unit_box, 50, seed=7)
        second = sample_uniform(unit_box, 50, seed=7)
        assert all(unit_box.contains(p) for p in first)
        assert np.array_equal(stack_points(first), stack_points(second))

    def test_sampling_needs_positive_count(self, unit_box: Box) -> None:
        """Test that count < 1 is rejected."""
        with pytest.raises(ContractViolationError):
            sample_uniform(unit_box, 0, seed=0)


class TestNonnegOrthant:
    """Tests for NonnegOrthant."""

    def test_projection(self) -> None:
        """Test clamping of negative coordinates."""
        orthant = NonnegOrthant(3)
        result = orthant.project(np.array([-1.0, 0.0, 2.0]))
        assert np.array_equal(result, [0.0, 0.0, 2.0])

    def test_unbounded_sampling(self) -> None:
        """Test that sampling an unbounded set fails."""
        with pytest.raises(UnsupportedOperationError):
            sample_uniform(NonnegOrthant(2), 10, seed=0)

    def test_empty_dimension(self) -> None:
        """Test that dimension 0 is rejected."""
        with pytest.raises(ContractViolationError):
            NonnegOrthant(0)


class TestSegment:
    """Tests for Segment."""

    @pytest.fixture
    def segment(self) -> Segment:
        """Horizontal segment from (11, 10) to (60, 10)."""
        return Segment(anchor=np.array([0.0, 10.0]), axis=0, lower=11.0, upper=60.0)

    def test_anchor_is_normalized(self, segment: Segment) -> None:
        """Test that the free coordinate of the anchor is reset to lower."""
        assert np.array_equal(segment.anchor, [11.0, 10.0])

    def test_endpoints(self, segment: Segment) -> None:
        """Test the segment endpoints."""
        lo, hi = segment.endpoints()
        assert np.array_equal(lo, [11.0, 10.0])
        assert np.array_equal(hi, [60.0, 10.0])

    def test_projection(self, segment: Segment) -> None:
        """Test projection from outside the segment."""
        assert np.array_equal(segment.project(np.array([70.0, 20.0])), [60.0, 10.0])
        assert np.array_equal(segment.project(np.array([30.0, -5.0])), [30.0, 10.0])

    def test_distance(self, segment: Segment) -> None:
        """Test distance from a point beyond the end."""
        assert segment.distance(np.array([70.0, 20.0])) == pytest.approx(
            math.sqrt(200.0)
        )

    def test_samples_on_segment(self, segment: Segment) -> None:
        """Test that samples lie on the segment."""
        samples = segment.sample_array(100, seed=3)
        assert np.all(samples[:, 1] == 10.0)
        assert np.all((samples[:, 0] >= 11.0) & (samples[:, 0] <= 60.0))

    def test_axis_out_of_range(self) -> None:
        """Test that an invalid axis is rejected."""
        with pytest.raises(ContractViolationError):
            Segment(anchor=np.zeros(2), axis=2, lower=0.0, upper=1.0)


class TestProduct:
    """Tests for Product."""

    def test_blockwise_projection(self, unit_box: Box) -> None:
        """Test that each block is projected onto its factor."""
        product = Product((unit_box, NonnegOrthant(2)))
        result = product.project(np.array([2.0, -1.0, -3.0, 4.0]))
        assert np.array_equal(result, [1.0, 0.0, 0.0, 4.0])
        assert product.dim == 4

    def test_boundedness(self, unit_box: Box) -> None:
        """Test that boundedness requires every factor bounded."""
        assert Product((unit_box, unit_box)).is_bounded
        assert not Product((unit_box, NonnegOrthant(1))).is_bounded

    def test_sampling(self, unit_box: Box) -> None:
        """Test that product samples land in the product."""
        product = Product((unit_box, Box(np.zeros(1), 5.0 * np.ones(1))))
        samples = product.sample_array(20, seed=0)
        assert samples.shape == (20, 3)
        assert all(product.contains(row) for row in samples)

    def test_empty(self) -> None:
        """Test that a product needs factors."""
        with pytest.raises(ContractViolationError):
            Product(())


class TestStackPoints:
    """Tests for stack_points."""

    def test_empty(self) -> None:
        """Test that an empty sequence is rejected."""
        with pytest.raises(ContractViolationError):
            stack_points([])
