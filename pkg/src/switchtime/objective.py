"""Discrete reduced objective, its adjoint gradient, and checking tools.

The tracking term is the exact space-time L2 error of the piecewise-linear-in-time
interpolants of state and desired state:

    1/2 * sum_i dt_i/3 * (e_{i-1}' M e_{i-1} + e_{i-1}' M e_i + e_i' M e_i),

plus ``alpha/2 * |tau - tau_d|^2``. ``gradient`` is the exact derivative of
this discrete objective (discretize, then differentiate).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .control import FormPattern, hat_value, slab_weight_jacobian, slab_weights
from .parabolic import HeatModel, adjoint_solve, evaluate_adjoint_at, march
from .projection import project


@dataclass
class Problem:
    """Everything needed to evaluate the reduced objective.

    ``forcing`` is the M-weighted extra right-hand side per slab ``(k, N)``;
    ``y_desired`` the nodal desired state at every time point ``(k+1, N)``.
    """

    model: HeatModel
    pattern: FormPattern
    forcing: np.ndarray
    y0: np.ndarray
    y_desired: np.ndarray
    alpha: float = 0.0
    tau_d: np.ndarray | None = None

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        if self.tau_d is None:
            self.tau_d = np.zeros(self.pattern.n)
        self.tau_d = np.asarray(self.tau_d, dtype=float)
        self.m_psi = self.model.mass @ self.pattern.psi_nodal

    @property
    def n(self) -> int:
        return self.pattern.n

    @property
    def horizon(self) -> float:
        return self.model.time_mesh.horizon

    @property
    def times(self) -> np.ndarray:
        return self.model.time_mesh.times

    def state(self, tau: np.ndarray) -> np.ndarray:
        s = slab_weights(tau, self.pattern, self.times)
        return march(self.model, s, self.m_psi, self.forcing, self.y0)

    def states(self, taus: np.ndarray) -> np.ndarray:
        s = slab_weights(taus, self.pattern, self.times)  # (B, k)
        return march(self.model, s.T, self.m_psi, self.forcing, self.y0)


def _tracking(problem: Problem, y: np.ndarray) -> np.ndarray:
    """Half the squared space-time error; ``y`` is ``(k+1, N)`` or ``(k+1, N, B)``."""
    e = y - (problem.y_desired if y.ndim == 2 else problem.y_desired[..., None])
    kp1, n = e.shape[:2]
    flat = np.moveaxis(e, 1, 0).reshape(n, -1)
    me = np.moveaxis((problem.model.mass @ flat).reshape((n, kp1) + e.shape[2:]), 0, 1)
    quad = np.sum(e * me, axis=1)  # e_i' M e_i
    cross = np.sum(e[:-1] * me[1:], axis=1)  # e_{i-1}' M e_i
    dt = problem.model.time_mesh.dt
    if y.ndim == 3:
        dt = dt[:, None]
    return 0.5 * np.sum(dt / 3.0 * (quad[:-1] + cross + quad[1:]), axis=0)


def _tikhonov(problem: Problem, tau: np.ndarray) -> np.ndarray:
    return 0.5 * problem.alpha * np.sum((tau - problem.tau_d) ** 2, axis=-1)


def objective(tau: np.ndarray, problem: Problem) -> float:
    tau = np.asarray(tau, dtype=float)
    return float(_tracking(problem, problem.state(tau)) + _tikhonov(problem, tau))


def objective_many(taus: np.ndarray, problem: Problem) -> np.ndarray:
    """Objective at each row of ``taus`` with a single batched forward sweep."""
    taus = np.atleast_2d(np.asarray(taus, dtype=float))
    return _tracking(problem, problem.states(taus)) + _tikhonov(problem, taus)


def residual_weights(problem: Problem, y: np.ndarray) -> np.ndarray:
    """Derivative of the tracking term with respect to ``y_1..y_k``; shape ``(k, N)``."""
    me = (problem.model.mass @ (y - problem.y_desired).T).T
    dt = problem.model.time_mesh.dt[:, None]
    g = dt / 6.0 * (me[:-1] + 2.0 * me[1:])  # from slab i as right endpoint
    g[:-1] += dt[1:] / 6.0 * (2.0 * me[1:-1] + me[2:])  # from slab i+1 as left endpoint
    return g


def adjoint_state(tau: np.ndarray, problem: Problem) -> tuple[np.ndarray, np.ndarray]:
    """State and adjoint trajectories at ``tau``."""
    y = problem.state(tau)
    p = adjoint_solve(y, residual_weights(problem, y), problem.model)
    return y, p


def value_and_gradient(tau: np.ndarray, problem: Problem, convention: str = "exact") -> tuple[float, np.ndarray]:
    """Objective and gradient from one forward and one adjoint sweep.

    ``convention="exact"`` returns the derivative of the discrete objective.
    ``"interpolated"`` pairs ``psi`` with the time-interpolated adjoint at each
    switching time instead; it does not vanish when ``tau_j`` sits on a time
    node, where the exact derivative is flat.
    """
    tau = np.asarray(tau, dtype=float)
    y, p = adjoint_state(tau, problem)
    value = float(_tracking(problem, y) + _tikhonov(problem, tau))
    if convention == "exact":
        pairing = problem.model.time_mesh.dt * (p[:-1] @ problem.m_psi)  # step multipliers paired with psi
        jac = slab_weight_jacobian(tau, problem.pattern, problem.times)
        pde_part = jac.T @ pairing
    elif convention == "interpolated":
        pde_part = _interpolated_pairing(tau, problem, p)
    else:
        raise ValueError(f"unknown gradient convention {convention!r}")
    return value, pde_part + problem.alpha * (tau - problem.tau_d)


def _interpolated_pairing(tau: np.ndarray, problem: Problem, p: np.ndarray) -> np.ndarray:
    nodal = p @ problem.m_psi  # <psi, p_i> at every time point
    t = np.clip(tau, 0.0, problem.horizon)
    return problem.pattern.endpoint_signs() * np.interp(t, problem.times, nodal)


def gradient(tau: np.ndarray, problem: Problem, convention: str = "exact") -> np.ndarray:
    return value_and_gradient(tau, problem, convention)[1]


def gradient_from_adjoint(tau: np.ndarray, problem: Problem, convention: str = "slab") -> np.ndarray:
    """Assemble the gradient componentwise as ``(w_{j-1} - w_j) <psi, P(tau_j)>`` plus the Tikhonov part.

    ``convention`` selects how the adjoint is read off at a time point:
    ``"slab"`` uses the multiplier of the slab containing ``tau_j`` weighted by
    the normalized averaging hat (reproduces :func:`gradient` exactly),
    ``"linear"`` uses :func:`evaluate_adjoint_at` (agrees only up to O(dt)).
    """
    tau = np.asarray(tau, dtype=float)
    _, p = adjoint_state(tau, problem)
    times = problem.times
    horizon = problem.horizon
    signs = problem.pattern.endpoint_signs()
    out = problem.alpha * (tau - problem.tau_d)
    for j, t in enumerate(tau):
        if signs[j] == 0.0:
            continue
        if convention == "slab":
            if not 0.0 < t < horizon:
                continue
            i = min(int(np.searchsorted(times, t, side="right")), times.size - 1)
            value = 2.0 * hat_value(t, times[i - 1], times[i]) * p[i - 1]
        elif convention == "linear":
            value = evaluate_adjoint_at(p, times, t)
        else:
            raise ValueError(f"unknown convention {convention!r}")
        out[j] += signs[j] * (problem.m_psi @ value)
    return out


def fd_gradient(tau: np.ndarray, problem: Problem, step: float = 1e-6) -> np.ndarray:
    """Central differences of the objective, all 2n evaluations in one batch."""
    if step <= 0:
        raise ValueError("step must be positive")
    tau = np.asarray(tau, dtype=float)
    n = tau.size
    shifts = np.eye(n) * step
    values = objective_many(np.vstack([tau + shifts, tau - shifts]), problem)
    return (values[:n] - values[n:]) / (2.0 * step)


def stationarity_residual(
    tau: np.ndarray, problem: Problem, lipschitz: float, grad: np.ndarray | None = None, convention: str = "exact"
) -> float:
    """``|P(tau - grad/L) - tau|``; zero exactly at stationary points."""
    if lipschitz <= 0:
        raise ValueError("L must be positive")
    tau = np.asarray(tau, dtype=float)
    if grad is None:
        grad = gradient(tau, problem, convention)
    return float(np.linalg.norm(project(tau - grad / lipschitz, problem.horizon) - tau))


def kink_distance(tau: np.ndarray, times: np.ndarray) -> np.ndarray:
    """Distance of each component to the nearest time node or slab midpoint.

    The objective's second derivative in ``tau_j`` jumps at these points, so
    central differences straddling one lose their second-order accuracy.
    """
    marks = np.sort(np.concatenate([times, 0.5 * (times[:-1] + times[1:])]))
    idx = np.clip(np.searchsorted(marks, tau), 1, marks.size - 1)
    return np.minimum(np.abs(tau - marks[idx - 1]), np.abs(marks[idx] - tau))


def sample_interior_tau(rng: np.random.Generator, n: int, times: np.ndarray, margin: float, lo: float = 0.01, hi: float = 0.99) -> np.ndarray:
    """Sorted random switching times in ``(lo*T, hi*T)`` keeping ``margin`` away from the kink set."""
    horizon = times[-1]
    while True:
        tau = np.sort(rng.uniform(lo * horizon, hi * horizon, n))
        if np.min(kink_distance(tau, times)) > margin:
            return tau


def gradient_check(problem: Problem, tau: np.ndarray, step: float = 1e-6) -> dict:
    """Compare :func:`gradient` with :func:`fd_gradient` at ``tau``."""
    g = gradient(tau, problem)
    fd = fd_gradient(tau, problem, step)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.abs(g - fd) / np.abs(fd)
    return {
        "gradient": g,
        "fd": fd,
        "max_rel": float(np.max(rel)),
        "max_rel_to_norm": float(np.max(np.abs(g - fd)) / np.max(np.abs(fd))),
    }
