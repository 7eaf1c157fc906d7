"""Iteratively regularized first-order methods for bilevel variational inequalities."""

from __future__ import annotations

from .baseline_isr import IsrCvxConfig, run_isr_cvx
from .errors import (
    ConfigValidationError,
    ConstructionError,
    ContractViolationError,
    DivergenceError,
    IregviError,
    StepsizeViolationError,
    UnsupportedOperationError,
)
from .models import IterateRecord, IterateTrace, SolverState
from .problems import BilevelVIProblem, SmoothObjective, VectorMapping
from .solver_ipreg import Adaptive, IprEgConfig, KnownThreshold, run_ipr_eg
from .solver_iregmm import IregMmConfig, run_ireg_mm
from .solver_iregsm import (
    Constant,
    Diminishing,
    IregSmConfig,
    LogConstant,
    ThresholdConstant,
    run_ireg_sm,
)

__version__ = "0.1.0"

__all__ = [
    "Adaptive",
    "BilevelVIProblem",
    "ConfigValidationError",
    "Constant",
    "ConstructionError",
    "ContractViolationError",
    "Diminishing",
    "DivergenceError",
    "IprEgConfig",
    "IregMmConfig",
    "IregSmConfig",
    "IregviError",
    "IsrCvxConfig",
    "IterateRecord",
    "IterateTrace",
    "KnownThreshold",
    "LogConstant",
    "SmoothObjective",
    "SolverState",
    "StepsizeViolationError",
    "ThresholdConstant",
    "UnsupportedOperationError",
    "VectorMapping",
    "run_ipr_eg",
    "run_ireg_mm",
    "run_ireg_sm",
    "run_isr_cvx",
]
