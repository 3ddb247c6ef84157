"""Euclidean projection onto ordered switching times ``0 <= tau_1 <= ... <= tau_n <= T``.

The projection pools entries into consecutive blocks chosen by minimizing
running prefix means, replaces each entry by its block mean, and clips the
result to ``[0, T]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import product

import numpy as np


class KKTError(AssertionError):
    """A projection candidate violates one of the optimality conditions."""


@dataclass(frozen=True)
class PoolBlocks:
    breakpoints: tuple[int, ...]  # 0 = m_0 < m_1 < ... < m_l = n
    block_means: tuple[float, ...]

    def expand(self) -> np.ndarray:
        sizes = np.diff(self.breakpoints)
        return np.repeat(np.asarray(self.block_means, dtype=float), sizes)


def pool(tau: np.ndarray) -> PoolBlocks:
    tau = np.asarray(tau, dtype=float)
    n = tau.size
    breaks = [0]
    means = []
    start = 0
    while start < n:
        best_j, best_mean = start, tau[start]
        running = 0.0
        for j in range(start, n):
            running += tau[j]
            mean = running / (j - start + 1)
            if mean < best_mean:  # strict: the first minimizer wins
                best_j, best_mean = j, mean
        means.append(best_mean)
        start = best_j + 1
        breaks.append(start)
    return PoolBlocks(tuple(breaks), tuple(float(m) for m in means))


def project(tau: np.ndarray, horizon: float) -> np.ndarray:
    if horizon <= 0:
        raise ValueError("horizon T must be positive")
    tau = np.asarray(tau, dtype=float)
    if is_feasible(tau, horizon):
        return tau.copy()  # re-pooling ties would perturb block means by an ulp
    hat = pool(tau).expand()
    # block means increase in exact arithmetic; guard against one-ulp inversions
    hat = np.maximum.accumulate(hat)
    return np.clip(hat, 0.0, horizon)


def is_feasible(tau: np.ndarray, horizon: float, tol: float = 0.0) -> bool:
    tau = np.asarray(tau, dtype=float)
    return bool(tau[0] >= -tol and tau[-1] <= horizon + tol and np.all(np.diff(tau) >= -tol))


def _constraints(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Rows ``g`` and offsets ``c`` of ``g @ t >= c * T``."""
    g = np.zeros((n + 1, n))
    g[0, 0] = 1.0
    for i in range(1, n):
        g[i, i - 1], g[i, i] = -1.0, 1.0
    g[n, n - 1] = -1.0
    c = np.zeros(n + 1)
    c[n] = -1.0
    return g, c


@lru_cache(maxsize=None)
def _active_set_maps(n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """For every active set, the affine maps ``(tau, T) -> (t, lambda)`` of its equality-constrained solution.

    The KKT system of ``min 1/2 |t - tau|^2`` with the active rows held as
    equalities is ``t - G_S' lam_S = tau``, ``G_S t = c_S T``. Solved once per
    pattern; the full set of n+1 rows is singular (infeasible for T > 0) and skipped.
    """
    g, c = _constraints(n)
    t_tau, t_T, lam_tau, lam_T = [], [], [], []
    for active in product((False, True), repeat=n + 1):
        idx = np.flatnonzero(active)
        if idx.size == n + 1:
            continue
        gs = g[idx]
        s = idx.size
        kkt = np.block([[np.eye(n), -gs.T], [gs, np.zeros((s, s))]])
        inv = np.linalg.inv(kkt)
        rhs_tau = np.vstack([np.eye(n), np.zeros((s, n))])
        rhs_T = np.concatenate([np.zeros(n), c[idx]])
        sol_tau = inv @ rhs_tau
        sol_T = inv @ rhs_T
        lt = np.zeros((n + 1, n))
        lT = np.zeros(n + 1)
        lt[idx] = sol_tau[n:]
        lT[idx] = sol_T[n:]
        t_tau.append(sol_tau[:n])
        t_T.append(sol_T[:n])
        lam_tau.append(lt)
        lam_T.append(lT)
    return np.array(t_tau), np.array(t_T), np.array(lam_tau), np.array(lam_T)


def qp_oracle_project(tau: np.ndarray, horizon: float, tol: float = 1e-12) -> np.ndarray:
    """Projection by exhaustive active-set enumeration (for n <= 12).

    Returns the first pattern whose solution is primal feasible with
    non-negative multipliers; that point is the unique minimizer.
    """
    tau = np.asarray(tau, dtype=float)
    n = tau.size
    if n > 12:
        raise ValueError("the enumeration oracle is limited to n <= 12")
    t_tau, t_T, lam_tau, lam_T = _active_set_maps(n)
    t = t_tau @ tau + t_T * horizon  # (patterns, n)
    lam = lam_tau @ tau + lam_T * horizon  # (patterns, n+1)
    g, c = _constraints(n)
    scale = tol * max(1.0, horizon, float(np.max(np.abs(tau))))
    slack = t @ g.T - c * horizon
    ok = np.all(slack >= -scale, axis=1) & np.all(lam >= -scale, axis=1)
    hits = np.flatnonzero(ok)
    if hits.size == 0:
        raise RuntimeError("no KKT point found; the enumeration is broken")
    return np.clip(t[hits[0]], 0.0, horizon)


def kkt_verify(tau: np.ndarray, tau_star: np.ndarray, horizon: float, tol: float = 1e-10) -> np.ndarray:
    """Build the explicit multipliers for ``tau_star`` and check the KKT conditions.

    Returns ``lambda`` in R^{n+1}; raises :class:`KKTError` naming the first
    violated condition.
    """
    tau = np.asarray(tau, dtype=float)
    tau_star = np.asarray(tau_star, dtype=float)
    n = tau.size
    hat = pool(tau).expand()
    neg = np.minimum(hat, 0.0)
    over = np.maximum(hat - horizon, 0.0)

    lam = np.empty(n + 1)
    lam[0] = -neg.sum()
    lam[1:n] = lam[0] + np.cumsum(tau - tau_star)[: n - 1]
    lam[n] = over.sum()

    padded = np.concatenate([[0.0], tau_star, [horizon]])
    if np.any(np.diff(padded) < -tol):
        raise KKTError("feasibility: tau_star is not ordered within [0, T]")
    grad_eq = tau_star - tau + np.diff(lam)
    if np.max(np.abs(grad_eq)) > tol:
        raise KKTError(f"gradient equation: residual {np.max(np.abs(grad_eq)):.3e}")
    if np.min(lam) < -tol:
        raise KKTError(f"complementarity: negative multiplier {np.min(lam):.3e}")
    comp = lam * np.diff(padded)
    if np.max(np.abs(comp)) > tol:
        raise KKTError(f"complementarity: lambda_i * (tau_i - tau_(i-1)) = {np.max(np.abs(comp)):.3e}")
    return lam
