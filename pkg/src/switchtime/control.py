"""Switching-time to control map and its exact derivative on a time mesh.

The control at time ``t`` is ``c(t) * psi`` with the integer multiplier

    c(t) = sum_i pattern[i] * chi_bar(tau[i], tau[i+1], t),

where ``chi_bar`` is the signed interval indicator (``-1`` on reversed
intervals). Because ``chi_bar(a, b, .)`` integrates against any ``v`` to
``V(b) - V(a)`` with ``V`` an antiderivative, the slab averages below are
smooth in ``tau`` even where the ordering of ``tau`` breaks.

Slab averages use the hat ``v_i`` on ``[t_{i-1}, t_i]`` with peak 1 at the
midpoint; ``int v_i = dt_i / 2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def chi_bar(a: float, b: float, t: float) -> int:
    if a <= t < b:
        return 1
    if b < t <= a:
        return -1
    return 0


def alternating_pattern(n: int) -> np.ndarray:
    """Weights of psi on [tau_i, tau_{i+1}), i = 1..n-1: on for odd i, off for even i."""
    if n < 2:
        raise ValueError("need at least two switching points")
    return np.array([1.0 if i % 2 == 1 else 0.0 for i in range(1, n)])


@dataclass(frozen=True)
class FormPattern:
    """A single form function ``psi`` switched on the intervals where ``weights`` is nonzero.

    ``weights[i-1]`` multiplies ``psi`` on ``[tau_i, tau_{i+1})``.
    """

    psi_nodal: np.ndarray
    weights: np.ndarray

    @classmethod
    def alternating(cls, psi_nodal: np.ndarray, n: int) -> "FormPattern":
        return cls(np.asarray(psi_nodal, dtype=float), alternating_pattern(n))

    @property
    def n(self) -> int:
        return self.weights.size + 1

    def endpoint_signs(self) -> np.ndarray:
        """``d c / d tau_j`` coefficients: ``weights_{j-1} - weights_j`` with zero padding."""
        w = np.concatenate([[0.0], self.weights, [0.0]])
        return w[:-1] - w[1:]


def control_scalar(tau: np.ndarray, pattern: FormPattern, t: float) -> float:
    return float(sum(w * chi_bar(tau[i], tau[i + 1], t) for i, w in enumerate(pattern.weights)))


def hat_value(t: np.ndarray, t_left: np.ndarray, t_right: np.ndarray) -> np.ndarray:
    """Averaging hat on ``[t_left, t_right]``; zero outside."""
    t = np.asarray(t, dtype=float)
    s = (t - t_left) / (t_right - t_left)
    return np.clip(1.0 - np.abs(2.0 * s - 1.0), 0.0, None)


def hat_fraction(x: np.ndarray, t_left: np.ndarray, t_right: np.ndarray) -> np.ndarray:
    """``int_{t_left}^{x} v / int v`` with x clipped to the slab; rises from 0 to 1."""
    s = np.clip((np.asarray(x, dtype=float) - t_left) / (t_right - t_left), 0.0, 1.0)
    return np.where(s <= 0.5, 2.0 * s * s, 1.0 - 2.0 * (1.0 - s) ** 2)


def hat_fraction_derivative(x: np.ndarray, t_left: np.ndarray, t_right: np.ndarray) -> np.ndarray:
    return 2.0 * hat_value(x, t_left, t_right) / (t_right - t_left)


def _clamp(tau: np.ndarray, horizon: float) -> np.ndarray:
    # the forcing only lives on [0, T]
    return np.clip(tau, 0.0, horizon)


def slab_weights(tau: np.ndarray, pattern: FormPattern, times: np.ndarray) -> np.ndarray:
    """Hat-averaged multiplier ``c`` on every slab of ``times``; shape ``(k,)``.

    ``tau`` may also be a stack of shape ``(B, n)``, giving ``(B, k)``.
    """
    tau = np.asarray(tau, dtype=float)
    tl, tr = times[:-1], times[1:]
    x = _clamp(tau, times[-1])[..., None]  # (..., n, 1)
    frac = hat_fraction(x, tl, tr)  # (..., n, k)
    signs = pattern.endpoint_signs()  # d/dtau_j of sum_i w_i (F(tau_{i+1}) - F(tau_i))
    return np.einsum("j,...jk->...k", signs, frac)


def slab_weight_jacobian(tau: np.ndarray, pattern: FormPattern, times: np.ndarray) -> np.ndarray:
    """``d slab_weights[i] / d tau_j`` as a ``(k, n)`` array (mostly zeros).

    Components outside ``(0, T)`` get zero: the clamp is flat there, and the hat
    vanishes at the endpoints so the one-sided limits agree.
    """
    tau = np.asarray(tau, dtype=float)
    tl, tr = times[:-1], times[1:]
    inside = (tau > 0.0) & (tau < times[-1])
    dfrac = hat_fraction_derivative(tau[:, None], tl, tr) * inside[:, None]  # (n, k)
    return (pattern.endpoint_signs()[:, None] * dfrac).T


def slab_weight(tau: np.ndarray, pattern: FormPattern, t_left: float, t_right: float) -> float:
    return float(slab_weights(tau, pattern, np.array([t_left, t_right]))[0])


def slab_weight_derivative(tau: np.ndarray, pattern: FormPattern, t_left: float, t_right: float, j: int) -> float:
    """Exact ``d slab_weight / d tau_j`` for a single slab (``j`` zero-based)."""
    jac = slab_weight_jacobian(tau, pattern, np.array([t_left, t_right]))
    return float(jac[0, j])
