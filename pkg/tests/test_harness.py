"""Tests for the experiment runner."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np
import pytest

from iregvi.baseline_isr import IsrCvxConfig
from iregvi.config import build_experiment_spec
from iregvi.errors import ConfigValidationError, ContractViolationError
from iregvi.harness import (
    build_experiment,
    fit_rate_slope,
    fit_slope,
    grid_specs,
    iterations_for_budget,
    make_solver_config,
    run_experiment,
    run_experiments,
    write_trace_csv,
)
from iregvi.models import ExperimentSpec, IterateRecord, IterateTrace
from iregvi.solver_ipreg import IprEgConfig
from iregvi.solver_iregmm import IregMmConfig
from iregvi.solver_iregsm import IregSmConfig, ThresholdConstant


def _spec(tmp_path: Path, **values: str) -> ExperimentSpec:
    return build_experiment_spec({"output_dir": str(tmp_path), **values})


def _trace(values: list[float]) -> IterateTrace:
    point = np.zeros(2)
    records = [
        IterateRecord(
            k=k,
            x=point,
            y=point,
            ybar=point,
            eta=0.1 / k,
            projections=2 * k,
            metrics={"gap": value},
            wall_nanos=0,
        )
        for k, value in enumerate(values, start=1)
    ]
    return IterateTrace(solver="ireg_mm", records=records, iterations=len(values))


class TestBuildExperiment:
    """Tests for build_experiment."""

    def test_zero_sum(self) -> None:
        """Test the recommended stepsize of the zero-sum experiments."""
        setup = build_experiment("zs_worst", seed=0)
        assert setup.problem.name == "zs_worst"
        assert setup.recommended_gamma == pytest.approx(3.5355339059327378)

    def test_traffic(self) -> None:
        """Test that the traffic experiments leave the stepsize to the solver."""
        setup = build_experiment("e3", seed=0)
        assert setup.problem.dim == 29
        assert setup.recommended_gamma is None

    def test_unknown(self) -> None:
        """Test that an unknown experiment is rejected."""
        with pytest.raises(ConfigValidationError):
            build_experiment("e9", seed=0)


class TestBudget:
    """Tests for iterations_for_budget."""

    def test_single_loop(self) -> None:
        """Test two projections per iteration."""
        config = IregMmConfig(gamma=1.0)
        assert iterations_for_budget("ireg_mm", 1000, config) == 500
        assert iterations_for_budget("ireg_mm", 1001, config) == 500

    def test_baseline(self) -> None:
        """Test the triangular budget of the baseline."""
        config = IsrCvxConfig(outer_iters=1)
        assert iterations_for_budget("isr_cvx", 20_000, config) == 199

    def test_two_loop(self) -> None:
        """Test the adaptive schedule of 2 * 151 projections per outer step."""
        config = IprEgConfig(outer_iters=2, gamma_inner=1.0)
        assert iterations_for_budget("ipr_eg", 3020, config) == 10
        assert iterations_for_budget("ipr_eg", 3021, config) == 10

    def test_too_small(self) -> None:
        """Test that a budget below the minimum run is rejected."""
        config = IprEgConfig(outer_iters=2, gamma_inner=1.0)
        with pytest.raises(ConfigValidationError):
            iterations_for_budget("ipr_eg", 500, config)
        with pytest.raises(ConfigValidationError):
            iterations_for_budget("ireg_mm", 1, IregMmConfig(gamma=1.0))


class TestSolverConfig:
    """Tests for make_solver_config."""

    def test_recommended_gamma(self, tmp_path: Path) -> None:
        """Test that the zero-sum default stepsize is 1 / (2 ||A||_F)."""
        spec = _spec(tmp_path, experiment="zs_best", solver="ireg_mm", iters="10")
        config = make_solver_config(spec, build_experiment("zs_best", 0))
        assert isinstance(config, IregMmConfig)
        assert config.gamma == pytest.approx(3.5355339059327378)
        assert config.max_iters == 10
        assert config.eta0 == 0.01

    def test_budget_sets_iterations(self, tmp_path: Path) -> None:
        """Test the iteration count derived from a projection budget."""
        spec = _spec(tmp_path, experiment="zs_best", solver="ireg_mm", budget="1000")
        config = make_solver_config(spec, build_experiment("zs_best", 0))
        assert isinstance(config, IregMmConfig)
        assert config.max_iters == 500

    def test_outer_step_clamped(self, tmp_path: Path) -> None:
        """Test gamma_hat = 1/(2 L) when 1/sqrt(K) is too large."""
        spec = _spec(tmp_path, experiment="zs_worst", solver="ipr_eg", iters="2")
        config = make_solver_config(spec, build_experiment("zs_worst", 0))
        assert isinstance(config, IprEgConfig)
        assert config.gamma_hat == 0.5

    def test_outer_step_kept(self, tmp_path: Path) -> None:
        """Test that a valid 1/sqrt(K) is left to the solver."""
        spec = _spec(tmp_path, experiment="zs_worst", solver="ipr_eg", iters="100")
        config = make_solver_config(spec, build_experiment("zs_worst", 0))
        assert isinstance(config, IprEgConfig)
        assert config.gamma_hat is None
        assert config.outer_step == 0.1

    def test_regime(self, tmp_path: Path) -> None:
        """Test the regime options of the weighted-averaging method."""
        spec = _spec(
            tmp_path,
            experiment="zs_best",
            solver="ireg_sm",
            iters="10",
            regime="threshold",
            eta="0.03",
        )
        config = make_solver_config(spec, build_experiment("zs_best", 0))
        assert isinstance(config, IregSmConfig)
        assert config.regime == ThresholdConstant(0.03)
        assert config.objective_mode

    def test_regime_needs_eta(self, tmp_path: Path) -> None:
        """Test that constant regimes need eta."""
        spec = _spec(
            tmp_path, experiment="zs_best", solver="ireg_sm", regime="constant"
        )
        with pytest.raises(ConfigValidationError):
            make_solver_config(spec, build_experiment("zs_best", 0))

    def test_known_threshold_needs_eta(self, tmp_path: Path) -> None:
        """Test that the known-threshold mode needs eta."""
        spec = _spec(
            tmp_path, experiment="zs_worst", solver="ipr_eg", mode="known_threshold"
        )
        with pytest.raises(ConfigValidationError):
            make_solver_config(spec, build_experiment("zs_worst", 0))


class TestTraceCsv:
    """Tests for write_trace_csv."""

    def test_columns_and_values(self, tmp_path: Path) -> None:
        """Test the header, exact floats and missing metrics."""
        trace = _trace([0.1, 1.0 / 3.0])
        path = write_trace_csv(trace, ["gap", "absent"], tmp_path / "t.csv")
        with path.open(encoding="utf-8", newline="") as handle:
            rows = list(csv.reader(handle))
        assert rows[0] == [
            "k", "eta_k", "projections_cum", "wall_nanos", "gap", "absent"
        ]
        assert rows[1] == ["1", "0.1", "2", "0", "0.1", "nan"]
        assert float(rows[2][4]) == 1.0 / 3.0


class TestRunExperiment:
    """Tests for run_experiment."""

    def test_writes_outputs(self, tmp_path: Path) -> None:
        """Test the CSV, SVG and JSON summary of a short run."""
        spec = _spec(
            tmp_path,
            experiment="zs_best",
            solver="ireg_mm",
            iters="200",
            metrics="dist_inner,outer_gap",
            record_timing="false",
        )
        summary = run_experiment(spec)
        assert summary["iterations"] == 200
        assert summary["projections"] == 400
        assert not summary["diverged"]
        assert Path(summary["csv_path"]).exists()
        assert Path(summary["svg_path"]).exists()
        saved = json.loads(
            (tmp_path / "zs_best_ireg_mm.summary.json").read_text(encoding="utf-8")
        )
        assert saved["config_hash"] == summary["config_hash"]
        assert set(saved["final_metrics"]) == {"dist_inner", "outer_gap"}
        assert saved["efficiency"]["price_of_stability"] == pytest.approx(1.0)

    def test_deterministic(self, tmp_path: Path) -> None:
        """Test byte-identical CSV and SVG for identical specs."""
        outputs = []
        for name in ("first", "second"):
            spec = _spec(
                tmp_path / name,
                experiment="zs_best",
                solver="ireg_sm",
                iters="100",
                metrics="dist_outer",
                record_timing="false",
            )
            outputs.append(run_experiment(spec))
        for key in ("csv_path", "svg_path"):
            first, second = (Path(summary[key]).read_bytes() for summary in outputs)
            assert first == second
        assert outputs[0]["config_hash"] == outputs[1]["config_hash"]

    def test_window_best_and_csv_only(self, tmp_path: Path) -> None:
        """Test the IPR-EG summary without a plot."""
        spec = _spec(
            tmp_path,
            experiment="zs_worst",
            solver="ipr_eg",
            iters="4",
            gamma_hat="0.5",
            csv_only="true",
        )
        summary = run_experiment(spec)
        assert len(summary["best_point"]) == 2
        assert "svg_path" not in summary
        assert summary["projections"] == 4 * 2 * 151

    def test_sequential_runs(self, tmp_path: Path) -> None:
        """Test several specs in one call."""
        specs = [
            build_experiment_spec(
                {"experiment": "zs_best", "iters": "5", "output_dir": str(tmp_path)},
                solver=solver,
            )
            for solver in ("ireg_mm", "ireg_sm")
        ]
        summaries = run_experiments(specs, jobs=1)
        assert [s["solver"] for s in summaries] == ["ireg_mm", "ireg_sm"]


class TestGridSpecs:
    """Tests for grid_specs."""

    def test_one_directory_per_cell(self, tmp_path: Path) -> None:
        """Test that each cell writes under its own hashed directory."""
        base = {
            "experiment": "zs_best",
            "solver": "ireg_mm",
            "iters": "10",
            "output_dir": str(tmp_path),
        }
        grid = {"eta0": ["0.1", "0.01", "0.001"], "b": ["0.25", "0.5", "0.75"]}
        specs = grid_specs(base, grid)
        assert len(specs) == 9
        assert len({spec.output_dir for spec in specs}) == 9
        assert all(spec.output_dir.parent == tmp_path for spec in specs)
        assert specs[0].options == {"eta0": 0.1, "b": 0.25}


class TestRateFitting:
    """Tests for the empirical rate slopes."""

    def test_power_law(self) -> None:
        """Test the log-log slope of k^(-1/2)."""
        ks = np.array([1.0, 10.0, 100.0, 1000.0])
        assert fit_slope(ks, ks**-0.5) == pytest.approx(-0.5)

    def test_geometric(self) -> None:
        """Test the semi-log slope of 0.9^k."""
        ks = np.arange(1, 20)
        assert fit_slope(ks, 0.9**ks, geometric=True) == pytest.approx(math.log(0.9))

    @pytest.mark.parametrize(
        ("ks", "values"),
        [([1.0], [1.0]), ([1.0, 2.0], [1.0, 0.0]), ([1.0, 2.0], [1.0, math.nan])],
    )
    def test_invalid(self, ks: list[float], values: list[float]) -> None:
        """Test too few points and non-positive values."""
        with pytest.raises(ContractViolationError):
            fit_slope(ks, values)

    def test_trace_window(self) -> None:
        """Test that only records inside the window are fitted."""
        values = [1.0 / k for k in range(1, 11)]
        values[0] = 50.0
        trace = _trace(values)
        assert fit_rate_slope(trace, "gap", (2, 10)) == pytest.approx(-1.0)
