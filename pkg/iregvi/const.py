"""Constants for the iregvi package."""

from __future__ import annotations

from typing import Final

# Numerical tolerances
MEMBERSHIP_TOL: Final = 1e-10
STEP_CONDITION_TOL: Final = 1e-12
THETA_RENORMALIZE_AT: Final = 1e300
FD_STEP: Final = 1e-5
CEIL_SLACK: Final = 1e-9  # keeps exact integer powers from rounding up
RESOLVABLE_DISTANCE: Final = 1e-12

# Stepsize hypotheses
EXTRAGRADIENT_STEP_BOUND: Final = 0.5  # gamma^2 (L_F^2 + eta^2 L_H^2) <= 0.5
IPR_INNER_STEP_BOUND: Final = 0.25  # 0.5 gamma eta + gamma^2 eta^2 <= 0.25

# IR-EG_sm regime constants
DIMINISHING_LOWER_FACTOR: Final = 5.0  # eta_{0,l} = 5 L_H / mu_H
OBJECTIVE_MU_FACTOR: Final = 0.5  # mu_H := 0.5 mu for smooth objectives

# IPR-EG schedule constants
IPR_MIN_INNER_ITERS: Final = 151
IPR_SCHEDULE_EXPONENT: Final = 1.5
IPR_ADAPTIVE_ETA_FACTOR: Final = 6.0
IPR_ENVELOPE_D_FACTOR: Final = 25.0
IPR_ENVELOPE_C_FACTOR: Final = 17.0

# Zero-sum game data
ZERO_SUM_A: Final = ((0.0, -0.1), (0.1, 0.0))
ZERO_SUM_B: Final = (1.0, 0.0)
ZERO_SUM_LOWER: Final = (11.0, 10.0)
ZERO_SUM_UPPER: Final = (60.0, 50.0)
ZERO_SUM_SEGMENT_LEVEL: Final = 10.0
ZERO_SUM_ALPHA: Final = 1.1
ZERO_SUM_ORDER: Final = 1.0
ZERO_SUM_SHARPNESS_SAMPLES: Final = 10_000
ZERO_SUM_CERTIFY_SAMPLES: Final = 500

# Nguyen-Dupuis traffic network (1-based node labels)
TRAFFIC_NODE_COUNT: Final = 13
TRAFFIC_ARCS: Final = (
    (1, 5),
    (1, 12),
    (4, 5),
    (4, 9),
    (5, 6),
    (5, 9),
    (6, 7),
    (6, 10),
    (7, 8),
    (7, 11),
    (8, 2),
    (9, 10),
    (9, 13),
    (10, 11),
    (11, 2),
    (11, 3),
    (12, 6),
    (12, 8),
    (13, 3),
)
TRAFFIC_OD_PAIRS: Final = ((1, 2), (1, 3), (4, 2), (4, 3))
# fmt: off
TRAFFIC_FREE_TIME: Final = (
    7.0, 9.0, 9.0, 12.0, 3.0, 9.0, 5.0, 13.0, 5.0, 9.0,
    9.0, 10.0, 9.0, 5.0, 9.0, 8.0, 7.0, 14.0, 11.0,
)
TRAFFIC_CAPACITY: Final = (
    750.0, 350.0, 150.0, 750.0, 300.0, 350.0, 750.0, 200.0, 200.0, 250.0,
    500.0, 500.0, 550.0, 650.0, 450.0, 250.0, 150.0, 350.0, 550.0,
)
# fmt: on
TRAFFIC_DEMAND: Final = (400.0, 800.0, 600.0, 450.0)
BPR_COEFFICIENT: Final = 0.15
SMOOTHNESS_FLOOR: Final = 1e-6
TRAFFIC_REFERENCE_FLOW_FLOOR: Final = 1.0
DELTA_FILE: Final = "nguyen_dupuis_delta.txt"
OMEGA_FILE: Final = "nguyen_dupuis_omega.txt"

# Harness
EXPERIMENTS: Final = ("zs_best", "zs_worst", "e1", "e2", "e3", "custom")
SOLVERS: Final = ("ireg_mm", "ireg_sm", "ipr_eg", "isr_cvx")
COMPATIBLE_SOLVERS: Final = {
    "zs_best": ("ireg_mm", "ireg_sm", "isr_cvx", "ipr_eg"),
    "zs_worst": ("ipr_eg",),
    "e1": ("ireg_mm", "isr_cvx"),
    "e2": ("ireg_mm", "isr_cvx"),
    "e3": ("ipr_eg",),
    "custom": ("ireg_mm", "isr_cvx"),
}
DEFAULT_ITERS: Final = {
    "zs_best": 10_000,
    "zs_worst": 100,
    "e3": 50,
    "custom": 5_000,
}
DEFAULT_BUDGET: Final = 100_000
DEFAULT_SEED: Final = 0
DEFAULT_OUTPUT_DIR: Final = "runs"
DEFAULT_GAP_SAMPLES: Final = 500
DEFAULT_ETA0: Final = 0.01
DEFAULT_B: Final = 0.5
DEFAULT_ALPHA_TILDE: Final = 0.1
DEFAULT_GRID: Final = {
    "eta0": ("0.1", "0.01", "0.001"),
    "b": ("0.25", "0.5", "0.75"),
}
LOG_POINTS_PER_DECADE: Final = 50
DENSE_LOG_UNTIL: Final = 100
BASE_CSV_COLUMNS: Final = ("k", "eta_k", "projections_cum", "wall_nanos")
SVG_HASH_SALT: Final = "iregvi"

# Exit codes
EXIT_OK: Final = 0
EXIT_USAGE: Final = 2
EXIT_DIVERGENCE: Final = 3
EXIT_ACCEPTANCE: Final = 4

# Log message templates
LOG_RUN_START: Final = "Starting %s for %d iterations (dim=%d)"
LOG_RUN_DONE: Final = "Finished %s after %d iterations and %d projections"
LOG_DIVERGED: Final = "%s diverged at iteration %d: non-finite iterate"
LOG_STEPSIZE_OVERRIDE: Final = "Stepsize hypothesis violated but not enforced: %s"
LOG_THETA_RENORMALIZED: Final = "Renormalized averaging weights at iteration %d"
LOG_EXPERIMENT_START: Final = "Running experiment %s with solver %s (hash %s)"
LOG_EXPERIMENT_DONE: Final = "Experiment %s/%s wrote %s"
