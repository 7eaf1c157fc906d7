"""Iteration coordinator shared by all solvers."""

from __future__ import annotations

import logging
import time
from abc import ABC, abstractmethod
from collections.abc import Sequence
from typing import Generic, Protocol, TypeVar

import numpy as np

from .const import LOG_DIVERGED, LOG_RUN_DONE, LOG_RUN_START
from .errors import DivergenceError
from .models import IterateRecord, IterateTrace, SolverState
from .problems import BilevelVIProblem
from .utils import LogSchedule

_LOGGER = logging.getLogger(__name__)

ConfigT = TypeVar("ConfigT")
StateT = TypeVar("StateT", bound=SolverState)


class MetricObserver(Protocol):
    """Named metric evaluated on scheduled iterations."""

    name: str

    def __call__(self, state: SolverState, previous: SolverState | None) -> float:
        """Evaluate the metric at state, given the immediately preceding state."""


class IterationCoordinator(ABC, Generic[ConfigT, StateT]):
    """Drive a solver step by step and collect scheduled trace records."""

    name: str = "solver"

    def __init__(
        self,
        problem: BilevelVIProblem,
        config: ConfigT,
        *,
        schedule: LogSchedule | None = None,
        observers: Sequence[MetricObserver] = (),
        record_timing: bool = True,
    ) -> None:
        """Initialize the coordinator.

        Args:
            problem: Problem to solve.
            config: Validated solver configuration.
            schedule: Which iterations are stored; the logarithmic grid by default.
            observers: Metrics evaluated at stored iterations.
            record_timing: Store wall-clock nanoseconds; 0 is stored otherwise.
        """
        self.problem = problem
        self.config = config
        self.schedule = schedule or LogSchedule()
        self.observers = tuple(observers)
        self.record_timing = record_timing
        self._started_ns = 0

    @property
    @abstractmethod
    def horizon(self) -> int:
        """Number of iterations of a full run."""

    @abstractmethod
    def initial_state(self) -> StateT:
        """State before the first iteration."""

    @abstractmethod
    def step(self, state: StateT) -> StateT:
        """One iteration of the method."""

    def run(self) -> IterateTrace:
        """Run the method for the full horizon.

        Raises:
            DivergenceError: If an iterate becomes non-finite. The error carries
                the partial trace and the last finite state.
        """
        horizon = self.horizon
        trace = IterateTrace(solver=self.name)
        state = self.initial_state()
        _LOGGER.debug(LOG_RUN_START, self.name, horizon, self.problem.dim)
        self._started_ns = time.perf_counter_ns()

        for _ in range(horizon):
            try:
                with np.errstate(all="ignore"):
                    candidate = self.step(state)
            except DivergenceError as err:
                self._abort(trace, state, err)
            if not self._is_finite(candidate):
                self._abort(trace, state)
            if self.schedule.should_log(candidate.k, horizon):
                trace.records.append(self._record(candidate, state))
            state = candidate

        self._finish(trace, state)
        trace.message = f"completed {state.k} iterations"
        _LOGGER.debug(LOG_RUN_DONE, self.name, state.k, state.projections)
        return trace

    @staticmethod
    def _is_finite(state: SolverState) -> bool:
        return bool(
            np.all(np.isfinite(state.x))
            and np.all(np.isfinite(state.y))
            and np.all(np.isfinite(state.ybar))
            and np.isfinite(state.eta)
        )

    def _record(self, state: StateT, previous: StateT) -> IterateRecord:
        """Evaluate observers and build the stored record."""
        metrics = dict(state.extras)
        for observer in self.observers:
            metrics[observer.name] = float(observer(state, previous))
        wall = time.perf_counter_ns() - self._started_ns if self.record_timing else 0
        return IterateRecord(
            k=state.k,
            x=state.x,
            y=state.y,
            ybar=state.ybar,
            eta=state.eta,
            projections=state.projections,
            metrics=metrics,
            wall_nanos=wall,
        )

    def _finish(self, trace: IterateTrace, state: StateT) -> None:
        trace.iterations = state.k
        trace.projections = state.projections
        trace.final_state = state

    def _abort(
        self,
        trace: IterateTrace,
        state: StateT,
        cause: DivergenceError | None = None,
    ) -> None:
        """Flag the trace as diverged and raise."""
        self._finish(trace, state)
        trace.diverged = True
        trace.message = f"diverged after {state.k} iterations"
        _LOGGER.error(LOG_DIVERGED, self.name, state.k + 1)
        raise DivergenceError(
            f"{self.name} produced a non-finite iterate at iteration {state.k + 1}",
            trace=trace,
            state=state,
        ) from cause
