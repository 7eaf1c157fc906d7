"""Error envelopes guaranteed by the convergence theory of each solver.

All functions are closed-form and take K (or k) >= 1. Arguments named
``d_sq`` are D_X^2, ``dist0_sq`` is ||x_0 - x*||^2.
"""

from __future__ import annotations

import math

from .const import (
    DIMINISHING_LOWER_FACTOR,
    IPR_ENVELOPE_C_FACTOR,
    IPR_ENVELOPE_D_FACTOR,
    OBJECTIVE_MU_FACTOR,
)

SQRT2 = math.sqrt(2.0)


def iregmm_outer_gap_bound(
    d_sq: float, gamma: float, eta0: float, b: float, k: int
) -> float:
    """Outer gap bound D^2 / (gamma eta0 K^(1-b)) for the diminishing schedule.

    With H = grad f for a convex smooth f the same value bounds
    f(ybar_K) - min over SOL(X, F) of f.
    """
    return d_sq / (gamma * eta0) / k ** (1.0 - b)


def iregmm_inner_gap_bound(
    d_sq: float, gamma: float, eta0: float, b: float, c_h: float, k: int
) -> float:
    """Inner gap bound D^2/(gamma K) + sqrt2 eta0 C_H D / ((1-b) K^b)."""
    d = math.sqrt(d_sq)
    return d_sq / (gamma * k) + SQRT2 * eta0 * c_h * d / ((1.0 - b) * k**b)


def iregmm_constant_distance_bound(
    dist0_sq: float, gamma: float, alpha: float, k: int
) -> float:
    """dist(ybar_K, SOL) bound under a constant eta below the sharpness threshold."""
    return dist0_sq / (gamma * alpha * k)


def iregmm_constant_outer_gap_bound(
    d_sq: float,
    gamma: float,
    eta: float,
    b_h: float,
    dist0_sq: float,
    alpha: float,
    k: int,
) -> float:
    """|outer gap| bound max{D^2/(gamma eta), B_H dist0^2/(gamma alpha)} / K."""
    return max(d_sq / (gamma * eta), b_h * dist0_sq / (gamma * alpha)) / k


def iregsm_diminishing_gap_bound(
    d_sq: float, l_h: float, mu_h: float, k: int
) -> float:
    """Outer gap bound D^2 (5 L_H - mu_H) / K of the diminishing regime."""
    return d_sq * (DIMINISHING_LOWER_FACTOR * l_h - mu_h) / k


def iregsm_diminishing_objective_bound(
    dist0_sq: float, smoothness: float, mu: float, k: int
) -> float:
    """f(ybar_K) - f* bound ((5L - 0.5 mu) dist0^2 / 2) / K for strongly convex f."""
    factor = DIMINISHING_LOWER_FACTOR * smoothness - OBJECTIVE_MU_FACTOR * mu
    return factor * dist0_sq / 2.0 / k


def iregsm_log_constant_outer_gap_bound(
    d_sq: float, mu_h: float, p: float, k: int
) -> float:
    return mu_h * d_sq / (p + 1.0) / (math.log(k) * k**p)


def iregsm_log_constant_objective_bound(
    dist0_sq: float, mu: float, p: float, k: int
) -> float:
    return mu * dist0_sq / (4.0 * (p + 1.0)) / (math.log(k) * k**p)


def iregsm_log_constant_inner_gap_bound(
    d_sq: float, gamma: float, mu_h: float, c_h: float, p: float, k: int
) -> float:
    d = math.sqrt(d_sq)
    first = d_sq / gamma / k ** (p + 1.0)
    second = (p + 1.0) * SQRT2 * c_h * d / (gamma * mu_h) * math.log(k) / k
    return first + second


def geometric_rate(gamma: float, eta: float, mu_h: float) -> float:
    """Contraction factor 1 - gamma eta mu_H of the threshold regime."""
    return 1.0 - gamma * eta * mu_h


def geometric_distance_envelope(
    dist0_sq: float, gamma: float, alpha: float, rate: float, k: int
) -> float:
    """dist(ybar_K, SOL) bound dist0^2 / (gamma alpha) * rate^K."""
    return dist0_sq / (gamma * alpha) * rate**k


def geometric_gap_envelope(
    d_sq: float,
    gamma: float,
    eta: float,
    b_h: float,
    dist0_sq: float,
    alpha: float,
    rate: float,
    k: int,
) -> float:
    scale = max(d_sq / (gamma * eta), b_h * dist0_sq / (gamma * alpha))
    return scale * rate**k


def geometric_objective_distance_envelope(
    dist0_sq: float, mu: float, gamma: float, eta: float, rate: float, k: int
) -> float:
    """||ybar_K - x*||^2 bound for strongly convex f in the threshold regime."""
    return 2.0 * dist0_sq / (mu * gamma * eta) * rate**k


def ipr_adaptive_infeasibility_envelope(
    d_sq: float,
    c_f: float,
    gamma_hat: float,
    gamma: float,
    alpha: float,
    order_m: float,
    inner_iters: int,
    k: int,
) -> float:
    """Envelope on dist(xhat_k, SOL) for the adaptive inner schedule.

    Args:
        d_sq: D_X^2.
        c_f: Bound on ||grad f|| over X.
        gamma_hat: Outer stepsize.
        gamma: Inner stepsize.
        alpha: Weak sharpness modulus.
        order_m: Weak sharpness order M.
        inner_iters: T_k of the outer step that produced xhat_k.
        k: Outer iteration, k >= 1.
    """
    d = math.sqrt(d_sq)
    constant = (
        IPR_ENVELOPE_D_FACTOR * d_sq + IPR_ENVELOPE_C_FACTOR * c_f * d * gamma_hat
    ) / (alpha * gamma)
    return constant ** (1.0 / order_m) * math.log(inner_iters) / k**1.5


def ipr_known_threshold_distance_bound(
    d_sq: float, gamma: float, alpha: float, k: int
) -> float:
    return 2.0 * d_sq / (gamma * alpha) / k**2


def outer_gap_lower_bound(b_h: float, dist: float) -> float:
    """Gap(x, SOL, H) >= -B_H dist(x, SOL)."""
    return -b_h * dist


def objective_gap_lower_bound(b_f: float, dist: float) -> float:
    """f(x) - f* >= -B_f dist(x, SOL)."""
    return -b_f * dist
