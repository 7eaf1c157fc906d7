"""Run summaries written next to each trace."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from .instances import social_cost, zero_sum_instance
from .linops import Point
from .models import ExperimentSpec, IterateTrace, RunSummary
from .problems import efficiency_ratios
from .utils import config_hash

ZERO_SUM_EXPERIMENTS = frozenset({"zs_best", "zs_worst"})


def spec_payload(spec: ExperimentSpec) -> dict[str, Any]:
    """Canonical JSON-friendly view of a spec, hashed for regression checks."""
    return {
        "experiment": spec.experiment,
        "solver": spec.solver,
        "iters": spec.iters,
        "budget": spec.budget,
        "options": dict(sorted(spec.options.items())),
        "metrics": list(spec.metrics),
        "seed": spec.seed,
        "log_mode": spec.log_mode,
    }


def zero_sum_efficiency(terminal: Point) -> dict[str, float]:
    """Price of Stability/Anarchy, plus the ratio attained by the terminal point.

    The social optimum over the box is its lower corner.
    """
    instance = zero_sum_instance()
    optimum = social_cost(instance.box.project(np.zeros(2)))
    ratios = efficiency_ratios(
        social_cost(instance.best_ne), social_cost(instance.worst_ne), optimum
    )
    ratios["terminal_ratio"] = social_cost(terminal) / optimum
    return ratios


def _finite_or_none(value: float) -> float | None:
    return value if math.isfinite(value) else None


def build_run_summary(
    spec: ExperimentSpec,
    trace: IterateTrace,
    best_point: Point | None = None,
) -> RunSummary:
    """Collect what one run produced."""
    summary: RunSummary = {
        "experiment": spec.experiment,
        "solver": spec.solver,
        "config_hash": config_hash(spec_payload(spec)),
        "iterations": trace.iterations,
        "projections": trace.projections,
        "diverged": trace.diverged,
        "message": trace.message,
        "final_metrics": {},
        "terminal_point": [],
    }
    if trace.records:
        summary["final_metrics"] = dict(trace.records[-1].metrics)
    if trace.final_state is not None:
        terminal = trace.final_state.ybar
        summary["terminal_point"] = [float(v) for v in terminal]
        if spec.experiment in ZERO_SUM_EXPERIMENTS and not trace.diverged:
            summary["efficiency"] = zero_sum_efficiency(terminal)
    if best_point is not None:
        summary["best_point"] = [float(v) for v in best_point]
    return summary


def write_summary(summary: RunSummary, path: Path) -> Path:
    """Write the summary as JSON; non-finite metrics become null."""
    payload = dict(summary)
    payload["final_metrics"] = {
        name: _finite_or_none(value)
        for name, value in summary.get("final_metrics", {}).items()
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", "utf-8")
    return path


def format_summary(summary: RunSummary) -> str:
    """Human-readable multi-line rendering for the console."""
    lines = [
        f"{summary['experiment']}/{summary['solver']} "
        f"[{summary['config_hash']}]: {summary['message']}",
        f"  iterations={summary['iterations']} projections={summary['projections']}",
    ]
    for name, value in sorted(summary.get("final_metrics", {}).items()):
        lines.append(f"  {name} = {value:.6g}")
    if summary.get("terminal_point"):
        point = ", ".join(f"{v:.6g}" for v in summary["terminal_point"][:6])
        more = ", ..." if len(summary["terminal_point"]) > 6 else ""
        lines.append(f"  terminal = ({point}{more})")
    for name, value in sorted(summary.get("efficiency", {}).items()):
        lines.append(f"  {name} = {value:.6g}")
    return "\n".join(lines)
