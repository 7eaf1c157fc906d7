"""Tests for configuration parsing and experiment specs."""

from __future__ import annotations

from pathlib import Path

import pytest

from iregvi.config import (
    build_experiment_spec,
    check_compatibility,
    default_grid,
    default_schedule_length,
    expand_grid,
    load_config_file,
    load_grid_file,
    parse_config_text,
    parse_grid_text,
    parse_overrides,
    validate_options,
)
from iregvi.errors import ConfigValidationError


class TestTextFormats:
    """Tests for the key = value formats."""

    def test_config_text(self) -> None:
        """Test comments, blank lines and overriding keys."""
        text = "# run\nexperiment = zs_best\n\nsolver = ireg_mm  # method\niters = 5\n"
        text += "iters = 7\n"
        assert parse_config_text(text) == {
            "experiment": "zs_best",
            "solver": "ireg_mm",
            "iters": "7",
        }

    def test_config_text_error_names_line(self) -> None:
        """Test that a malformed line is reported with its position."""
        with pytest.raises(ConfigValidationError, match="cfg:2"):
            parse_config_text("seed = 1\nno separator\n", "cfg")

    def test_grid_text(self) -> None:
        """Test value lists."""
        grid = parse_grid_text("eta0 = 0.1, 0.01\nb = 0.5\n")
        assert grid == {"eta0": ["0.1", "0.01"], "b": ["0.5"]}

    def test_grid_needs_values(self) -> None:
        """Test that an empty value list is rejected."""
        with pytest.raises(ConfigValidationError):
            parse_grid_text("eta0 = ,\n")

    def test_overrides(self) -> None:
        """Test repeated --set arguments."""
        assert parse_overrides(["eta0=0.1", " b = 0.5"]) == {"eta0": "0.1", "b": "0.5"}
        with pytest.raises(ConfigValidationError):
            parse_overrides(["eta0"])

    def test_files(self, tmp_path: Path) -> None:
        """Test reading config and grid files."""
        config = tmp_path / "run.cfg"
        config.write_text("experiment = e1\n", encoding="utf-8")
        grid = tmp_path / "sweep.grid"
        grid.write_text("b = 0.25, 0.75\n", encoding="utf-8")
        assert load_config_file(config) == {"experiment": "e1"}
        assert load_grid_file(grid) == {"b": ["0.25", "0.75"]}

    def test_missing_file(self, tmp_path: Path) -> None:
        """Test that an unreadable file raises ConfigValidationError."""
        with pytest.raises(ConfigValidationError):
            load_config_file(tmp_path / "absent.cfg")


class TestGrid:
    """Tests for grid expansion."""

    def test_default_grid(self) -> None:
        """Test the eta0 x b stand-in grid."""
        grid = default_grid("ireg_mm")
        assert grid == {"eta0": ["0.1", "0.01", "0.001"], "b": ["0.25", "0.5", "0.75"]}

    def test_default_grid_alias(self) -> None:
        """Test that the baseline sweeps b_tilde."""
        assert set(default_grid("isr_cvx")) == {"eta0", "b_tilde"}

    def test_no_default_grid(self) -> None:
        """Test that two-loop methods need an explicit grid."""
        with pytest.raises(ConfigValidationError):
            default_grid("ipr_eg")

    def test_expand(self) -> None:
        """Test the Cartesian product in key order."""
        cells = expand_grid(default_grid("ireg_mm"))
        assert len(cells) == 9
        assert cells[0] == {"eta0": "0.1", "b": "0.25"}
        assert cells[1] == {"eta0": "0.1", "b": "0.5"}
        assert len({tuple(cell.items()) for cell in cells}) == 9


class TestScheduleLength:
    """Tests for default_schedule_length."""

    @pytest.mark.parametrize(
        ("experiment", "solver", "expected"),
        [
            ("zs_best", "ireg_mm", (10_000, None)),
            ("zs_best", "ireg_sm", (10_000, None)),
            ("zs_best", "isr_cvx", (None, 20_000)),
            ("zs_best", "ipr_eg", (None, 20_000)),
            ("zs_worst", "ipr_eg", (100, None)),
            ("e1", "ireg_mm", (None, 100_000)),
            ("e2", "isr_cvx", (None, 100_000)),
            ("e3", "ipr_eg", (50, None)),
            ("custom", "isr_cvx", (None, 10_000)),
        ],
    )
    def test_defaults(
        self, experiment: str, solver: str, expected: tuple[int | None, int | None]
    ) -> None:
        """Test the iteration count or budget of each pairing."""
        assert default_schedule_length(experiment, solver) == expected


class TestCompatibility:
    """Tests for check_compatibility."""

    def test_allowed(self) -> None:
        """Test supported pairings."""
        check_compatibility("zs_worst", "ipr_eg")
        check_compatibility("e2", "isr_cvx")

    @pytest.mark.parametrize(
        ("experiment", "solver"),
        [
            ("zs_worst", "ireg_mm"),
            ("e1", "ipr_eg"),
            ("e3", "ireg_sm"),
            ("x", "ireg_mm"),
        ],
    )
    def test_rejected(self, experiment: str, solver: str) -> None:
        """Test unsupported pairings and unknown experiments."""
        with pytest.raises(ConfigValidationError):
            check_compatibility(experiment, solver)


class TestOptions:
    """Tests for solver option schemas."""

    def test_coercion(self) -> None:
        """Test that text values become numbers and booleans."""
        options = validate_options(
            "ireg_mm", {"gamma": "0.5", "b": "0.25", "enforce_stepsize": "false"}
        )
        assert options == {"gamma": 0.5, "b": 0.25, "enforce_stepsize": False}

    @pytest.mark.parametrize(
        ("solver", "options"),
        [
            ("ireg_mm", {"gamma": "-1"}),
            ("ireg_mm", {"b": "1.5"}),
            ("ireg_sm", {"regime": "sometimes"}),
            ("ipr_eg", {"M": "0.5"}),
            ("isr_cvx", {"b_tilde": "0"}),
            ("isr_cvx", {"gamma": "0.1"}),
        ],
    )
    def test_invalid(self, solver: str, options: dict[str, str]) -> None:
        """Test out-of-range values and unknown keys."""
        with pytest.raises(ConfigValidationError):
            validate_options(solver, options)

    def test_unknown_solver(self) -> None:
        """Test that an unknown solver has no schema."""
        with pytest.raises(ConfigValidationError):
            validate_options("newton", {})


class TestBuildExperimentSpec:
    """Tests for build_experiment_spec."""

    def test_defaults(self) -> None:
        """Test defaults filled in for a minimal request."""
        spec = build_experiment_spec({"experiment": "zs_best", "solver": "ireg_mm"})
        assert spec.iters == 10_000
        assert spec.budget is None
        assert spec.seed == 0
        assert spec.output_dir == Path("runs")
        assert spec.log_mode == "log"
        assert spec.record_timing
        assert "outer_gap" in spec.metrics
        assert spec.options == {}

    def test_layer_precedence(self) -> None:
        """Test that later layers win and None values are ignored."""
        spec = build_experiment_spec(
            {"experiment": "e1", "solver": "ireg_mm", "seed": "3", "eta0": "0.1"},
            {"seed": None, "eta0": "0.001"},
            {"seed": "5"},
        )
        assert spec.seed == 5
        assert spec.options == {"eta0": 0.001}
        assert spec.budget == 100_000
        assert spec.iters is None

    def test_iters_replaces_budget(self) -> None:
        """Test that an explicit iteration count drops the budget."""
        spec = build_experiment_spec(
            {"experiment": "e2", "solver": "isr_cvx", "budget": "500", "iters": "40"}
        )
        assert spec.iters == 40
        assert spec.budget is None

    def test_metrics_and_flags(self) -> None:
        """Test comma-separated metrics and boolean flags."""
        spec = build_experiment_spec(
            {
                "experiment": "zs_worst",
                "solver": "ipr_eg",
                "metrics": "dist_inner, residual_sq",
                "csv_only": "true",
                "record_timing": "no",
                "log_mode": "every",
            }
        )
        assert spec.metrics == ("dist_inner", "residual_sq")
        assert spec.csv_only
        assert not spec.record_timing
        assert spec.log_mode == "every"

    def test_solver_override(self) -> None:
        """Test that the solver argument beats every layer."""
        spec = build_experiment_spec(
            {"experiment": "zs_best", "solver": "ireg_mm"}, solver="ireg_sm"
        )
        assert spec.solver == "ireg_sm"

    @pytest.mark.parametrize(
        "layer",
        [
            {"solver": "ireg_mm"},
            {"experiment": "zs_best"},
            {"experiment": "zs_best", "solver": "ireg_mm", "iters": "0"},
            {"experiment": "zs_best", "solver": "ireg_mm", "metrics": "bogus"},
            {"experiment": "zs_best", "solver": "ireg_mm", "log_mode": "sparse"},
            {"experiment": "zs_best", "solver": "ireg_mm", "tau": "3"},
            {"experiment": "e1", "solver": "ipr_eg"},
        ],
    )
    def test_invalid(self, layer: dict[str, str]) -> None:
        """Test missing keys, bad values and incompatible pairings."""
        with pytest.raises(ConfigValidationError):
            build_experiment_spec(layer)
