"""Data models and type definitions for the iregvi package."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, TypedDict

import numpy as np
import numpy.typing as npt

from .linops import Point


@dataclass(frozen=True, kw_only=True)
class SolverState:
    """State of a solver after k iterations.

    Attributes:
        k: Number of completed iterations.
        x: Last iterate (x_k, or the outer iterate for two-loop methods).
        y: Last predictor iterate (equal to x for methods without one).
        ybar: Iterate the method reports (averaged or outer iterate).
        eta: Regularization parameter used by the step that produced this state.
        projections: Cumulative number of projections onto X.
        extras: Scalar diagnostics attached by the step.
    """

    k: int
    x: Point
    y: Point
    ybar: Point
    eta: float
    projections: int
    extras: dict[str, float] = field(default_factory=dict)


@dataclass
class IterateRecord:
    """A stored iteration of a solver run."""

    k: int
    x: Point
    y: Point
    ybar: Point
    eta: float
    projections: int
    metrics: dict[str, float]
    wall_nanos: int


@dataclass
class IterateTrace:
    """Records of one solver run.

    Attributes:
        solver: Name of the solver that produced the trace.
        records: Records at scheduled iterations, in increasing k.
        iterations: Number of iterations performed.
        projections: Cumulative projections onto X.
        diverged: True if the run stopped on a non-finite iterate.
        message: Human-readable status.
        final_state: Last finite state, or None before the first iteration.
    """

    solver: str
    records: list[IterateRecord] = field(default_factory=list)
    iterations: int = 0
    projections: int = 0
    diverged: bool = False
    message: str = ""
    final_state: SolverState | None = None

    def __len__(self) -> int:
        return len(self.records)

    @property
    def final(self) -> Point:
        """Reported iterate of the last finite state."""
        if self.final_state is None:
            raise ValueError(f"Trace of {self.solver} holds no iterations")
        return self.final_state.ybar

    def metric_names(self) -> list[str]:
        """Metric names in first-seen order."""
        names: dict[str, None] = {}
        for record in self.records:
            names.update(dict.fromkeys(record.metrics))
        return list(names)

    def metric_series(
        self, name: str
    ) -> tuple[npt.NDArray[np.int64], npt.NDArray[np.float64]]:
        """Return (k, value) arrays for records carrying the named metric."""
        pairs = [(r.k, r.metrics[name]) for r in self.records if name in r.metrics]
        ks = np.array([k for k, _ in pairs], dtype=np.int64)
        values = np.array([v for _, v in pairs], dtype=np.float64)
        return ks, values


@dataclass(frozen=True)
class ExperimentSpec:
    """A validated request to run one solver on one experiment.

    Attributes:
        experiment: Experiment name (zs_best, zs_worst, e1, e2, e3, custom).
        solver: Solver name (ireg_mm, ireg_sm, ipr_eg, isr_cvx).
        iters: Iteration count (outer iterations for two-loop methods); None
            derives it from the projection budget.
        options: Solver and instance options after schema coercion.
        metrics: Metric names logged at scheduled iterations.
        seed: Seed for every sampled quantity.
        output_dir: Directory receiving CSV, summary and SVG files.
        budget: Projection budget used to derive iters, if given.
        csv_only: Skip SVG output.
        record_timing: Record wall-clock nanoseconds per record.
        log_mode: LogSchedule mode for the trace.
    """

    experiment: str
    solver: str
    iters: int | None
    options: dict[str, Any]
    metrics: tuple[str, ...]
    seed: int
    output_dir: Path
    budget: int | None = None
    csv_only: bool = False
    record_timing: bool = True
    log_mode: str = "log"


class RunSummary(TypedDict, total=False):
    """Summary record of one experiment run.

    Attributes:
        experiment: Experiment name.
        solver: Solver name.
        config_hash: Hash of the canonical experiment configuration.
        iterations: Iterations performed.
        projections: Cumulative projections onto X.
        diverged: True if the run stopped on a non-finite iterate.
        message: Status message of the run.
        final_metrics: Metric values of the last record.
        terminal_point: Reported iterate of the last state.
        best_point: Window-best iterate (IPR-EG only).
        efficiency: Price of Stability / Anarchy (zero-sum only).
        csv_path: Written trace CSV.
        svg_path: Written SVG plot, if any.
    """

    experiment: str
    solver: str
    config_hash: str
    iterations: int
    projections: int
    diverged: bool
    message: str
    final_metrics: dict[str, float]
    terminal_point: list[float]
    best_point: list[float]
    efficiency: dict[str, float]
    csv_path: str
    svg_path: str


@dataclass(frozen=True)
class CriterionResult:
    """Outcome of one acceptance criterion."""

    name: str
    passed: bool
    detail: str
