"""Utility functions for the iregvi package."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from functools import cache
from typing import Any, Literal

from .const import CEIL_SLACK, DENSE_LOG_UNTIL, LOG_POINTS_PER_DECADE


def format_float(value: float) -> str:
    """Format a float with the shortest representation that round-trips.

    Args:
        value: Value to format.

    Returns:
        String such that float(result) == value bit for bit (NaN aside).
    """
    return repr(float(value))


def format_cell(value: Any) -> str:
    """Format a CSV cell: integers verbatim, floats round-trip exact."""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, int):
        return str(value)
    return format_float(value)


def ceil_with_slack(value: float) -> int:
    """Round up, treating values within CEIL_SLACK of an integer as that integer."""
    return math.ceil(value - CEIL_SLACK)


def config_hash(payload: dict[str, Any]) -> str:
    """Return a stable short hash of a configuration mapping.

    Args:
        payload: JSON-serializable configuration values.

    Returns:
        First 16 hex digits of the SHA-256 of the canonical JSON encoding.
    """
    encoded = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(encoded.encode("utf-8")).hexdigest()[:16]


@cache
def _logarithmic_points(points_per_decade: int, horizon: int) -> frozenset[int]:
    decades = math.log10(max(horizon, 1))
    count = int(math.ceil(decades * points_per_decade)) + 1
    return frozenset(
        round(10.0 ** (j / points_per_decade)) for j in range(count)
    )


@dataclass(frozen=True)
class LogSchedule:
    """Which iterations a solver stores as trace records.

    Attributes:
        mode: 'every' stores all iterations, 'final' only the last one, and
            'log' stores every iteration up to dense_until plus a logarithmic
            grid afterwards.
        points_per_decade: Density of the logarithmic grid.
        dense_until: Last iteration that is always stored in 'log' mode.
    """

    mode: Literal["every", "log", "final"] = "log"
    points_per_decade: int = LOG_POINTS_PER_DECADE
    dense_until: int = DENSE_LOG_UNTIL

    @classmethod
    def every(cls) -> LogSchedule:
        """Store every iteration."""
        return cls(mode="every")

    @classmethod
    def final_only(cls) -> LogSchedule:
        """Store only the final iteration."""
        return cls(mode="final")

    def should_log(self, k: int, horizon: int) -> bool:
        """Return True if iteration count k (1-based) of horizon is stored."""
        if k == horizon or self.mode == "every":
            return True
        if self.mode == "final":
            return False
        if k <= self.dense_until:
            return True
        return k in _logarithmic_points(self.points_per_decade, horizon)
