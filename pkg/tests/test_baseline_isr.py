"""Tests for the sequential regularization baseline."""

from __future__ import annotations

import numpy as np
import pytest

from iregvi.baseline_isr import (
    IsrCvxConfig,
    isr_cvx_inner_solve,
    outer_iters_for_budget,
    resolve_inner_step,
    run_isr_cvx,
)
from iregvi.errors import ConfigValidationError
from iregvi.metrics import InnerDistanceMetric
from iregvi.problems import BilevelVIProblem
from iregvi.utils import LogSchedule


class TestIsrCvxConfig:
    """Tests for IsrCvxConfig."""

    def test_eta_schedule(self) -> None:
        """Test eta_k = eta0 / (k + 1)^b_tilde."""
        config = IsrCvxConfig(outer_iters=5, eta0=0.2, b_tilde=1.0)
        assert config.eta(0) == pytest.approx(0.2)
        assert config.eta(3) == pytest.approx(0.05)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"outer_iters": 0},
            {"outer_iters": 5, "eta0": -1.0},
            {"outer_iters": 5, "b_tilde": 0.0},
            {"outer_iters": 5, "b_tilde": 1.5},
            {"outer_iters": 5, "alpha_tilde": -0.1},
            {"outer_iters": 5, "inner_step": 0.0},
        ],
    )
    def test_invalid(self, kwargs: dict[str, float]) -> None:
        """Test that out-of-range parameters are rejected."""
        with pytest.raises(ConfigValidationError):
            IsrCvxConfig(**kwargs)  # type: ignore[arg-type]


class TestBudget:
    """Tests for outer_iters_for_budget."""

    @pytest.mark.parametrize(
        ("budget", "expected"),
        [(1, 1), (2, 1), (3, 2), (20_000, 199), (100_000, 446)],
    )
    def test_largest_horizon(self, budget: int, expected: int) -> None:
        """Test K (K + 1) / 2 <= budget < (K + 1) (K + 2) / 2."""
        assert outer_iters_for_budget(budget) == expected
        assert expected * (expected + 1) // 2 <= budget
        assert (expected + 1) * (expected + 2) // 2 > budget

    def test_empty_budget(self) -> None:
        """Test that a budget below one projection is rejected."""
        with pytest.raises(ConfigValidationError):
            outer_iters_for_budget(0)


class TestInnerStep:
    """Tests for the inner projected-gradient stepsize."""

    def test_default(self, zero_sum_best: BilevelVIProblem) -> None:
        """Test alpha_tilde / (L_F + eta0 L + alpha_tilde)^2."""
        step = resolve_inner_step(zero_sum_best, IsrCvxConfig(outer_iters=5))
        assert step == pytest.approx(0.1 / 0.21**2)

    def test_explicit(self, zero_sum_best: BilevelVIProblem) -> None:
        """Test that an explicit stepsize is used as given."""
        config = IsrCvxConfig(outer_iters=5, inner_step=0.5)
        assert resolve_inner_step(zero_sum_best, config) == 0.5

    def test_no_proximal_term(self, zero_sum_best: BilevelVIProblem) -> None:
        """Test that alpha_tilde = 0 needs an explicit stepsize."""
        with pytest.raises(ConfigValidationError):
            resolve_inner_step(
                zero_sum_best, IsrCvxConfig(outer_iters=5, alpha_tilde=0.0)
            )

    def test_inner_solve(self, zero_sum_best: BilevelVIProblem) -> None:
        """Test one residual per step and feasibility of the result."""
        config = IsrCvxConfig(outer_iters=5)
        center = zero_sum_best.initial_point()
        x, residuals = isr_cvx_inner_solve(zero_sum_best, config, center, 0.01, 7)
        assert len(residuals) == 7
        assert all(r >= 0.0 for r in residuals)
        assert zero_sum_best.inner_set.contains(x)
        assert np.array_equal(center, zero_sum_best.initial_point())


class TestRun:
    """Tests for run_isr_cvx."""

    def test_projection_count(self, zero_sum_best: BilevelVIProblem) -> None:
        """Test T_k = k + 1 projections in outer iteration k."""
        trace = run_isr_cvx(
            zero_sum_best,
            IsrCvxConfig(outer_iters=20),
            schedule=LogSchedule.every(),
            record_timing=False,
        )
        assert trace.iterations == 20
        assert trace.projections == 210
        assert [r.metrics["inner_iters"] for r in trace.records[:3]] == [1.0, 2.0, 3.0]
        assert trace.records[4].projections == 15

    def test_moves_toward_equilibria(self, zero_sum_best: BilevelVIProblem) -> None:
        """Test that the outer iterates approach the equilibrium segment."""
        metric = InnerDistanceMetric(zero_sum_best)
        trace = run_isr_cvx(zero_sum_best, IsrCvxConfig(outer_iters=30), [metric])
        assert zero_sum_best.inner_set.contains(trace.final)
        assert metric.value(trace.final) < metric.value(zero_sum_best.initial_point())

    def test_needs_objective(self, zero_sum_monotone: BilevelVIProblem) -> None:
        """Test that an outer map without objective is rejected."""
        with pytest.raises(ConfigValidationError):
            run_isr_cvx(zero_sum_monotone, IsrCvxConfig(outer_iters=3))
