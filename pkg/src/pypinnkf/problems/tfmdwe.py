"""
    Time-fractional mixed diffusion-wave equation on x ∈ [0, π], t ∈ [0, 1]:

        D_t^α u = u_xx + f(x, t),   f = Γ(4)/Γ(4-α) t^(3-α) sin x + t^3 sin x

    with exact solution u = t^3 sin x. The Caputo derivative is discretized with the L1 scheme on a
    uniform history grid 0 = t_0 < ... < t_M = t per collocation point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import digamma, gamma

from pypinnkf.autodiff.graph import Node, as_node, constant, custom
from pypinnkf.autodiff.network import AnalyticField
from pypinnkf.core.structures import DomainError, FloatArray


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not (0.0 < alpha < 1.0):
        raise DomainError(f"Fractional order must lie in (0, 1), got {alpha}")
    return alpha


def l1_weights(alpha: float, steps: int) -> FloatArray:
    """b_k = (k+1)^(1-α) - k^(1-α), k = 0..M-1."""
    alpha = _check_alpha(alpha)
    if steps < 1:
        raise ValueError(f"Need at least one history step, got {steps}")
    k = np.arange(steps + 1, dtype=np.float64) ** (1.0 - alpha)
    return np.diff(k)


def _l1_weights_dalpha(alpha: float, steps: int) -> FloatArray:
    k = np.arange(steps + 1, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        term = np.where(k > 0, -(k ** (1.0 - alpha)) * np.log(k), 0.0)
    return np.diff(term)


@dataclass(frozen=True)
class CaputoQuadrature:
    """L1 quadrature of the Caputo derivative at time `t_end` on M uniform steps."""
    alpha: float
    steps: int
    t_end: float

    def __post_init__(self):
        _check_alpha(self.alpha)
        if self.steps < 1:
            raise ValueError(f"Need at least one history step, got {self.steps}")

    @property
    def dt(self) -> float:
        return self.t_end / self.steps

    @property
    def time_grid(self) -> FloatArray:
        return np.linspace(0.0, self.t_end, self.steps + 1)

    @property
    def weights(self) -> FloatArray:
        return l1_weights(self.alpha, self.steps)

    def apply(self, u_values) -> float:
        return caputo_l1(u_values, self.alpha, self.dt)


def caputo_l1(u_values, alpha: float, dt) -> FloatArray | float:
    """
    Δt^(-α)/Γ(2-α) · Σ_k b_k (u_{M-k} - u_{M-k-1}).

    `u_values` is the history u(t_0..t_M) (1-D) or one history per row (2-D, with `dt` scalar or
    per row). Rows with Δt = 0 (t = 0) return 0.
    """
    alpha = _check_alpha(alpha)
    U = np.asarray(u_values, dtype=np.float64)
    squeeze = U.ndim == 1
    U = np.atleast_2d(U)
    steps = U.shape[1] - 1
    b = l1_weights(alpha, steps)
    dt = np.broadcast_to(np.asarray(dt, dtype=np.float64), (U.shape[0],))
    if np.any(dt < 0):
        raise DomainError("History step must be non-negative")

    acc = np.diff(U, axis=1) @ b[::-1]
    with np.errstate(divide="ignore"):
        scale = np.where(dt > 0, dt ** (-alpha), 0.0) / gamma(2.0 - alpha)
    out = scale * acc
    return float(out[0]) if squeeze else out


def history_points(points: FloatArray, steps: int) -> FloatArray:
    """(n * (M+1), 2) rows (x_i, j t_i / M), point-major."""
    x = np.repeat(points[:, 0], steps + 1)
    frac = np.tile(np.arange(steps + 1, dtype=np.float64) / steps, points.shape[0])
    t = np.repeat(points[:, 1], steps + 1) * frac
    return np.column_stack([x, t])


def caputo_node(history: Node, alpha: Node | float, t: FloatArray, steps: int) -> Node:
    """
    Graph version of `caputo_l1` over an (n, M+1) history node, differentiable in the history
    values and, when `alpha` is a node, in the order.
    """
    alpha_node = as_node(alpha)
    a = _check_alpha(float(np.asarray(alpha_node.value).reshape(-1)[0]))
    U = history.value
    if U.ndim != 2 or U.shape[1] != steps + 1:
        raise ValueError(f"History must have shape (n, {steps + 1}), got {U.shape}")

    t = np.asarray(t, dtype=np.float64)
    dt = t / steps
    live = dt > 0
    b = l1_weights(a, steps)
    r = b[::-1]
    D = np.diff(U, axis=1)
    acc = D @ r
    with np.errstate(divide="ignore"):
        scale = np.where(live, dt ** (-a), 0.0) / gamma(2.0 - a)
    value = scale * acc

    # u-coefficients of Σ_j r_j (u_{j+1} - u_j)
    coef = np.zeros(steps + 1)
    coef[1:] += r
    coef[:-1] -= r

    def vjp_history(g):
        return (g * scale)[:, None] * coef[None, :]

    def vjp_alpha(g):
        db = _l1_weights_dalpha(a, steps)
        with np.errstate(divide="ignore"):
            dlog_scale = np.where(live, -np.log(np.where(live, dt, 1.0)), 0.0) + digamma(2.0 - a)
        dvalue = scale * (D @ db[::-1]) + value * dlog_scale
        return g * np.where(live, dvalue, 0.0)

    return custom(value, (history, alpha_node), (vjp_history, vjp_alpha), name="caputo")


def forcing(x, t, alpha: float) -> FloatArray:
    alpha = _check_alpha(alpha)
    x = np.asarray(x, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    return gamma(4.0) / gamma(4.0 - alpha) * t ** (3.0 - alpha) * np.sin(x) + t ** 3 * np.sin(x)


def forcing_node(x: FloatArray, t: FloatArray, alpha: Node | float, factor: FloatArray | None = None) -> Node:
    """
    f(x, t; α), optionally times a fixed per-point factor (1 + level·ξ) of the misspecified model.
    """
    alpha_node = as_node(alpha)
    a = _check_alpha(float(np.asarray(alpha_node.value).reshape(-1)[0]))
    mult = np.ones_like(x) if factor is None else np.asarray(factor, dtype=np.float64)
    value = forcing(x, t, a) * mult
    if not alpha_node.requires_grad:
        return constant(value)

    def vjp_alpha(g):
        live = t > 0
        with np.errstate(divide="ignore", invalid="ignore"):
            first = gamma(4.0) / gamma(4.0 - a) * t ** (3.0 - a) * np.sin(x)
            d = first * (digamma(4.0 - a) - np.log(np.where(live, t, 1.0)))
        return g * np.where(live, d, 0.0) * mult

    return custom(value, (alpha_node,), (vjp_alpha,), name="forcing")


def residual_tfmdwe(history: Node, u_xx: Node, alpha: Node | float, x: FloatArray, t: FloatArray,
                    forcing_noise: FloatArray | None = None) -> Node:
    """
    caputo_l1(history) - u_xx - f at each collocation point. `forcing_noise` is the per-point
    multiplicative factor of the misspecified forcing.
    """
    steps = history.value.shape[1] - 1
    return caputo_node(history, alpha, t, steps) - u_xx - forcing_node(x, t, alpha, forcing_noise)


def exact_solution(x, t) -> FloatArray:
    return np.asarray(t, dtype=np.float64) ** 3 * np.sin(np.asarray(x, dtype=np.float64))


def exact_field() -> AnalyticField:
    return AnalyticField(
        u=exact_solution,
        u_t=lambda x, t: 3.0 * t ** 2 * np.sin(x),
        u_x=lambda x, t: t ** 3 * np.cos(x),
        u_xx=lambda x, t: -(t ** 3) * np.sin(x),
    )
