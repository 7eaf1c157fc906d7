"""Configuration files, option schemas and ExperimentSpec construction."""

from __future__ import annotations

import itertools
import logging
from collections.abc import Mapping, Sequence
from pathlib import Path
from typing import Any

import voluptuous as vol

from .const import (
    COMPATIBLE_SOLVERS,
    DEFAULT_BUDGET,
    DEFAULT_GRID,
    DEFAULT_ITERS,
    DEFAULT_OUTPUT_DIR,
    DEFAULT_SEED,
    EXPERIMENTS,
    SOLVERS,
)
from .errors import ConfigValidationError
from .metrics import METRIC_NAMES, PASS_THROUGH_METRICS
from .models import ExperimentSpec

_LOGGER = logging.getLogger(__name__)

SINGLE_LOOP_SOLVERS = frozenset({"ireg_mm", "ireg_sm"})
# Experiments whose default iteration count is an outer count for ipr_eg
OUTER_COUNT_EXPERIMENTS = frozenset({"zs_worst", "e3"})

DEFAULT_METRICS: dict[str, tuple[str, ...]] = {
    "zs_best": (
        "dist_inner",
        "outer_gap",
        "inner_gap",
        "objective_gap",
        "dist_outer",
        "suboptimality",
    ),
    "zs_worst": (
        "dist_inner",
        "dist_outer",
        "objective",
        "suboptimality",
        "residual_sq",
        "delta_norm",
        "step_sq",
    ),
    "e1": ("phi", "suboptimality", "objective"),
    "e2": ("phi", "suboptimality", "objective"),
    "e3": ("phi", "suboptimality", "objective", "residual_sq"),
    "custom": ("objective", "suboptimality", "natural_residual"),
}

_positive = vol.All(vol.Coerce(float), vol.Range(min=0.0, min_included=False))
_nonnegative = vol.All(vol.Coerce(float), vol.Range(min=0.0))
_count = vol.All(vol.Coerce(int), vol.Range(min=1))


def _split_list(value: Any) -> list[str]:
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    if isinstance(value, Sequence):
        return [str(item) for item in value]
    raise vol.Invalid("expected a comma-separated list")


EXPERIMENT_KEYS_SCHEMA = vol.Schema(
    {
        vol.Optional("experiment"): vol.In(EXPERIMENTS),
        vol.Optional("solver"): vol.In(SOLVERS),
        vol.Optional("iters"): _count,
        vol.Optional("budget"): _count,
        vol.Optional("seed"): vol.Coerce(int),
        vol.Optional("output_dir"): vol.Coerce(str),
        vol.Optional("metrics"): vol.All(
            _split_list, [vol.In(METRIC_NAMES | PASS_THROUGH_METRICS)]
        ),
        vol.Optional("log_mode"): vol.In(("every", "log", "final")),
        vol.Optional("csv_only"): vol.Boolean(),
        vol.Optional("record_timing"): vol.Boolean(),
    }
)

SOLVER_OPTION_SCHEMAS: dict[str, vol.Schema] = {
    "ireg_mm": vol.Schema(
        {
            vol.Optional("gamma"): _positive,
            vol.Optional("eta0"): _positive,
            vol.Optional("b"): vol.All(vol.Coerce(float), vol.Range(min=0.0, max=1.0)),
            vol.Optional("constant_eta"): _positive,
            vol.Optional("enforce_stepsize"): vol.Boolean(),
        }
    ),
    "ireg_sm": vol.Schema(
        {
            vol.Optional("gamma"): _positive,
            vol.Optional("regime"): vol.In(
                ("diminishing", "log_constant", "threshold", "constant")
            ),
            vol.Optional("eta0_u"): _positive,
            vol.Optional("eta0_l"): _positive,
            vol.Optional("p"): vol.All(vol.Coerce(float), vol.Range(min=1.0)),
            vol.Optional("eta"): _positive,
            vol.Optional("objective_mode"): vol.Boolean(),
            vol.Optional("enforce_stepsize"): vol.Boolean(),
        }
    ),
    "ipr_eg": vol.Schema(
        {
            vol.Optional("gamma_inner"): _positive,
            vol.Optional("gamma_hat"): _positive,
            vol.Optional("mode"): vol.In(("adaptive", "known_threshold")),
            vol.Optional("M"): vol.All(vol.Coerce(float), vol.Range(min=1.0)),
            vol.Optional("eta"): _positive,
            vol.Optional("tau"): _positive,
            vol.Optional("enforce_stepsize"): vol.Boolean(),
        }
    ),
    "isr_cvx": vol.Schema(
        {
            vol.Optional("eta0"): _nonnegative,
            vol.Optional("b_tilde"): vol.All(
                vol.Coerce(float), vol.Range(min=0.0, max=1.0, min_included=False)
            ),
            vol.Optional("alpha_tilde"): _nonnegative,
            vol.Optional("inner_step"): _positive,
        }
    ),
}

# Grid keys renamed per solver so one default grid serves both E1/E2 methods
_GRID_ALIASES: dict[str, dict[str, str]] = {"isr_cvx": {"b": "b_tilde"}}


def _validate(
    schema: vol.Schema, data: Mapping[str, Any], context: str
) -> dict[str, Any]:
    try:
        return dict(schema(dict(data)))
    except vol.Invalid as err:
        raise ConfigValidationError(f"Invalid {context}: {err}") from err


def validate_options(solver: str, options: Mapping[str, Any]) -> dict[str, Any]:
    """Coerce and check solver options.

    Raises:
        ConfigValidationError: On unknown keys or out-of-range values.
    """
    if solver not in SOLVER_OPTION_SCHEMAS:
        raise ConfigValidationError(f"Unknown solver: {solver}")
    return _validate(SOLVER_OPTION_SCHEMAS[solver], options, f"{solver} options")


# =============================================================================
# Text formats
# =============================================================================


def _key_value_lines(text: str, source: str) -> list[tuple[str, str]]:
    pairs: list[tuple[str, str]] = []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigValidationError(
                f"{source}:{number}: expected 'key = value', got {raw!r}"
            )
        pairs.append((key.strip(), value.strip()))
    return pairs


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Parse 'key = value' lines; later keys override earlier ones."""
    return dict(_key_value_lines(text, source))


def parse_grid_text(text: str, source: str = "<grid>") -> dict[str, list[str]]:
    """Parse 'key = v1, v2, ...' lines into value lists."""
    grid: dict[str, list[str]] = {}
    for key, value in _key_value_lines(text, source):
        values = _split_list(value)
        if not values:
            raise ConfigValidationError(f"{source}: no values for {key}")
        grid[key] = values
    return grid


def load_config_file(path: Path | str) -> dict[str, str]:
    """Read a UTF-8 config file.

    Raises:
        ConfigValidationError: If the file cannot be read or parsed.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as err:
        raise ConfigValidationError(f"Cannot read {path}: {err}") from err
    return parse_config_text(text, str(path))


def load_grid_file(path: Path | str) -> dict[str, list[str]]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as err:
        raise ConfigValidationError(f"Cannot read {path}: {err}") from err
    return parse_grid_text(text, str(path))


def parse_overrides(items: Sequence[str]) -> dict[str, str]:
    """Parse repeated '--set key=value' arguments."""
    overrides: dict[str, str] = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigValidationError(f"Expected key=value, got {item!r}")
        overrides[key.strip()] = value.strip()
    return overrides


def default_grid(solver: str) -> dict[str, list[str]]:
    """Stand-in grid eta0 x b, with keys renamed for the solver."""
    if solver not in ("ireg_mm", "isr_cvx"):
        raise ConfigValidationError(f"No default grid for {solver}; pass --grid")
    aliases = _GRID_ALIASES.get(solver, {})
    return {aliases.get(key, key): list(values) for key, values in DEFAULT_GRID.items()}


def expand_grid(grid: Mapping[str, Sequence[str]]) -> list[dict[str, str]]:
    """Cartesian product of the listed values, in key order."""
    keys = list(grid)
    return [
        dict(zip(keys, combo, strict=True))
        for combo in itertools.product(*(grid[key] for key in keys))
    ]


# =============================================================================
# ExperimentSpec construction
# =============================================================================


def check_compatibility(experiment: str, solver: str) -> None:
    """Raise ConfigValidationError if solver does not apply to experiment."""
    allowed = COMPATIBLE_SOLVERS.get(experiment)
    if allowed is None:
        raise ConfigValidationError(f"Unknown experiment: {experiment}")
    if solver not in allowed:
        raise ConfigValidationError(
            f"Solver {solver} does not apply to {experiment}; use one of "
            f"{', '.join(allowed)}"
        )


def default_schedule_length(
    experiment: str, solver: str
) -> tuple[int | None, int | None]:
    """Default (iters, budget); exactly one of them is set.

    Single-loop solvers run the experiment's iteration count, and two-loop
    solvers are matched to the projections that count would spend, except
    where the count is an outer count already.
    """
    iters = DEFAULT_ITERS.get(experiment)
    if iters is None:
        return None, DEFAULT_BUDGET
    if solver in SINGLE_LOOP_SOLVERS or experiment in OUTER_COUNT_EXPERIMENTS:
        return iters, None
    return None, 2 * iters


def build_experiment_spec(
    *layers: Mapping[str, Any], solver: str | None = None
) -> ExperimentSpec:
    """Merge configuration layers (lowest precedence first) into a spec.

    Keys outside the experiment schema are treated as solver options.

    Args:
        layers: Mappings such as config file values then CLI values.
        solver: Solver overriding every layer, for multi-solver runs.

    Raises:
        ConfigValidationError: On invalid values or incompatible choices.
    """
    merged: dict[str, Any] = {}
    for layer in layers:
        merged.update({k: v for k, v in layer.items() if v is not None})
    if solver is not None:
        merged["solver"] = solver
    experiment_keys = {str(key) for key in EXPERIMENT_KEYS_SCHEMA.schema}
    top = {key: value for key, value in merged.items() if key in experiment_keys}
    options = {k: v for k, v in merged.items() if k not in experiment_keys}
    values = _validate(EXPERIMENT_KEYS_SCHEMA, top, "experiment configuration")

    for required in ("experiment", "solver"):
        if required not in values:
            raise ConfigValidationError(f"Missing required key: {required}")
    experiment, chosen = values["experiment"], values["solver"]
    check_compatibility(experiment, chosen)

    iters, budget = values.get("iters"), values.get("budget")
    if iters is None and budget is None:
        iters, budget = default_schedule_length(experiment, chosen)
    elif iters is not None:
        budget = None
    spec = ExperimentSpec(
        experiment=experiment,
        solver=chosen,
        iters=iters,
        options=validate_options(chosen, options),
        metrics=tuple(values.get("metrics", DEFAULT_METRICS[experiment])),
        seed=values.get("seed", DEFAULT_SEED),
        output_dir=Path(values.get("output_dir", DEFAULT_OUTPUT_DIR)),
        budget=budget,
        csv_only=values.get("csv_only", False),
        record_timing=values.get("record_timing", True),
        log_mode=values.get("log_mode", "log"),
    )
    _LOGGER.debug("Built experiment spec %s", spec)
    return spec
