"""SVG line plots of trace metrics against iterations and projections."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib as mpl  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402

from .const import SVG_HASH_SALT  # noqa: E402
from .models import IterateTrace  # noqa: E402

_LOGGER = logging.getLogger(__name__)


def _positive_series(
    trace: IterateTrace, name: str
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(k, projections, value) of records plottable on log-log axes."""
    rows = [
        (r.k, r.projections, r.metrics[name])
        for r in trace.records
        if r.projections > 0
        and name in r.metrics
        and np.isfinite(r.metrics[name])
        and r.metrics[name] > 0
    ]
    if not rows:
        empty = np.empty(0)
        return empty, empty, empty
    ks, projections, values = (np.asarray(col, dtype=np.float64) for col in zip(*rows))
    return ks, projections, values


def plot_trace(
    trace: IterateTrace, metrics: Sequence[str], path: Path, title: str = ""
) -> Path | None:
    """Write a two-panel log-scaled SVG; None if no metric has positive values.

    The left panel plots against the iteration count and the right one
    against cumulative projections. Output is byte-stable for equal traces.
    """
    figure = Figure(figsize=(11.0, 4.5))
    by_iteration, by_projection = figure.subplots(1, 2)
    plotted = 0
    for name in metrics:
        ks, projections, values = _positive_series(trace, name)
        if values.size == 0:
            _LOGGER.debug("Skipping %s: no positive values to plot", name)
            continue
        by_iteration.plot(ks, values, label=name, linewidth=1.2)
        by_projection.plot(projections, values, label=name, linewidth=1.2)
        plotted += 1
    if not plotted:
        return None

    for axes, xlabel in ((by_iteration, "iteration k"), (by_projection, "projections")):
        axes.set_xscale("log")
        axes.set_yscale("log")
        axes.set_xlabel(xlabel)
        axes.grid(True, which="both", linewidth=0.3)
    by_iteration.legend(fontsize="small")
    if title:
        figure.suptitle(title)
    figure.tight_layout()
    with mpl.rc_context({"svg.hashsalt": SVG_HASH_SALT}):
        figure.savefig(path, format="svg", metadata={"Date": None})
    return path
