"""Exceptions raised by the iregvi package."""

from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .models import IterateTrace, SolverState


class IregviError(Exception):
    """Base class for all iregvi errors."""


class ContractViolationError(IregviError):
    """Error to indicate a violated precondition such as a dimension mismatch."""


class UnsupportedOperationError(IregviError):
    """Error to indicate an operation the given set or map cannot support."""


class ConfigValidationError(IregviError):
    """Error to indicate an invalid configuration."""


class StepsizeViolationError(ConfigValidationError):
    """Error to indicate that a stepsize hypothesis does not hold."""


class ConstructionError(IregviError):
    """Error to indicate instance data that fails validation."""


class DivergenceError(IregviError):
    """Error to indicate a non-finite iterate.

    Attributes:
        trace: Partial trace up to the last finite iterate, flagged as diverged.
        state: Last state whose iterates were all finite.
    """

    def __init__(
        self,
        message: str,
        trace: IterateTrace | None = None,
        state: SolverState | None = None,
    ) -> None:
        """Initialize the error with the partial run it interrupted."""
        super().__init__(message)
        self.trace = trace
        self.state = state
