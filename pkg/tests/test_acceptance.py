"""Tests for the acceptance suite runner and its checks."""

from __future__ import annotations

import numpy as np
import pytest

from iregvi.acceptance import (
    CRITERIA,
    _violations,
    check_box_projection_oracle,
    check_budget_matched_ordering,
    check_determinism,
    check_diminishing_objective_bound,
    check_inner_gap_bound,
    check_infeasibility_envelope,
    check_monotonicity_suites,
    check_outer_gap_bound,
    check_residual_inequality,
    check_threshold_linear_rate,
    check_weighted_average_oracle,
    run_acceptance_suite,
)
from iregvi.const import RESOLVABLE_DISTANCE
from iregvi.errors import ContractViolationError
from iregvi.models import CriterionResult, IterateRecord, IterateTrace


def _failing_check() -> CriterionResult:
    raise ContractViolationError("broken")


def _passing_check() -> CriterionResult:
    return CriterionResult("passing", True, "ok")


def _trace_with(metric: str, values: list[float]) -> IterateTrace:
    point = np.zeros(2)
    records = [
        IterateRecord(
            k=k,
            x=point,
            y=point,
            ybar=point,
            eta=0.1,
            projections=2 * k,
            wall_nanos=0,
            metrics={metric: value},
        )
        for k, value in enumerate(values, start=1)
    ]
    return IterateTrace(solver="ireg_sm", records=records, iterations=len(values))


class TestOracles:
    """Tests for the independent oracles."""

    def test_weighted_average(self) -> None:
        """Test the recursion against the direct sum on random schedules."""
        result = check_weighted_average_oracle(trials=10, seed=1)
        assert result.passed, result.detail
        assert result.name == "weighted_average_oracle"

    def test_box_projection(self) -> None:
        """Test the box projection against grid search."""
        result = check_box_projection_oracle(points=10, seed=1)
        assert result.passed, result.detail


class TestViolations:
    """Tests for the envelope comparison helper."""

    def test_reports_values_above_bound(self) -> None:
        """Test that only iterates above the bound are reported."""
        trace = _trace_with("dist_inner", [1.0, 0.5, 0.4])
        violations = _violations(trace, "dist_inner", lambda k: 1.0 / k)
        assert violations == [(3, 0.4, pytest.approx(1.0 / 3.0))]

    def test_floored_envelope_ignores_rounding_noise(self) -> None:
        """Test that distances stuck at double precision pass a floored bound."""
        trace = _trace_with("dist_inner", [1e-9, 3.5e-15, 3.5e-15])
        raw = _violations(trace, "dist_inner", lambda k: 10.0 ** (-8 * k))
        floored = _violations(
            trace,
            "dist_inner",
            lambda k: max(10.0 ** (-8 * k), RESOLVABLE_DISTANCE),
        )
        assert [k for k, _, _ in raw] == [2, 3]
        assert floored == []

    def test_nan_is_a_violation(self) -> None:
        """Test that a NaN metric never passes a bound."""
        trace = _trace_with("outer_gap", [float("nan")])
        assert len(_violations(trace, "outer_gap", lambda k: 1.0)) == 1


@pytest.mark.slow
class TestEnvelopeChecks:
    """Tests for the checks comparing runs against closed-form envelopes."""

    def test_outer_gap_bound(self) -> None:
        """Test the monotone method's outer gap along the whole run."""
        result = check_outer_gap_bound()
        assert result.passed, result.detail
        assert result.name == "outer_gap_bound"

    def test_inner_gap_bound(self) -> None:
        """Test the sampled inner gap along the whole run."""
        result = check_inner_gap_bound()
        assert result.passed, result.detail

    def test_diminishing_objective_bound(self) -> None:
        """Test the weighted-averaging objective gap envelope."""
        result = check_diminishing_objective_bound()
        assert result.passed, result.detail

    def test_threshold_linear_rate(self) -> None:
        """Test the geometric envelope over every iteration and the fitted rate."""
        result = check_threshold_linear_rate()
        assert result.passed, result.detail
        assert "logged iterations within the bound" in result.detail

    def test_infeasibility_envelope(self) -> None:
        """Test the projected-gradient infeasibility envelope."""
        result = check_infeasibility_envelope()
        assert result.passed, result.detail

    def test_residual_inequality(self) -> None:
        """Test the residual inequality at every outer step."""
        result = check_residual_inequality()
        assert result.passed, result.detail
        assert result.detail.startswith("0 of ")


@pytest.mark.slow
class TestPropertyChecks:
    """Tests for the monotonicity, ordering and determinism checks."""

    def test_monotonicity_suites(self) -> None:
        """Test the sampled witnesses of every instance family."""
        result = check_monotonicity_suites()
        assert result.passed, result.detail
        assert "traffic(n=1.2)" in result.detail

    def test_budget_matched_ordering(self) -> None:
        """Test that the extragradient ends less infeasible than the baseline."""
        result = check_budget_matched_ordering()
        assert result.passed, result.detail

    def test_determinism(self) -> None:
        """Test that repeated runs write identical CSV bytes."""
        result = check_determinism()
        assert result.passed, result.detail


class TestSuite:
    """Tests for run_acceptance_suite."""

    def test_errors_fail_their_check(self) -> None:
        """Test that a raising check is reported and the suite continues."""
        results = run_acceptance_suite((_failing_check, _passing_check))
        assert [r.passed for r in results] == [False, True]
        assert results[0].name == "_failing_check"
        assert "raised" in results[0].detail
        assert "broken" in results[0].detail
        assert results[1].detail.startswith("ok (")

    def test_criteria_names_are_unique(self) -> None:
        """Test that every check is registered once."""
        names = [check.__name__ for check in CRITERIA]
        assert len(names) == len(set(names))
        assert all(name.startswith("check_") for name in names)
