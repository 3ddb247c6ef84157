"""Implicit Euler for the semilinear heat equation and its exact discrete adjoint.

One step of the forward scheme reads

    (M/dt_i + A) y_i = M y_{i-1}/dt_i - M f(y_{i-1}) + s_i M psi + F_i,

with ``s_i`` the hat-averaged switching multiplier of slab ``i`` and ``F_i``
an already M-weighted forcing vector. The nonlinearity is lagged so every
step solves with the same matrix on a uniform mesh.

Trajectories are arrays of shape ``(k+1, N)``; batched variants carry a
trailing batch axis ``(k+1, N, B)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .control import FormPattern, slab_weights
from .sparse_linalg import CsrMatrix, FactorizedSpd, as_csr


@dataclass(frozen=True)
class TimeMesh:
    times: np.ndarray

    def __post_init__(self):
        if self.times.ndim != 1 or self.times.size < 2 or np.any(np.diff(self.times) <= 0):
            raise ValueError("time mesh must be strictly increasing with at least two points")

    @classmethod
    def uniform(cls, horizon: float, k: int) -> "TimeMesh":
        return cls(np.linspace(0.0, horizon, k + 1))

    @property
    def k(self) -> int:
        return self.times.size - 1

    @property
    def dt(self) -> np.ndarray:
        return np.diff(self.times)

    @property
    def horizon(self) -> float:
        return float(self.times[-1])


@dataclass(frozen=True)
class Nonlinearity:
    kind: str = "zero"

    def __post_init__(self):
        if self.kind not in ("zero", "sin", "arctan"):
            raise ValueError(f"unknown nonlinearity {self.kind!r}")

    def value(self, y: np.ndarray) -> np.ndarray:
        if self.kind == "sin":
            return np.sin(y)
        if self.kind == "arctan":
            return np.arctan(y)
        return np.zeros_like(y)

    def derivative(self, y: np.ndarray) -> np.ndarray:
        if self.kind == "sin":
            return np.cos(y)
        if self.kind == "arctan":
            return 1.0 / (1.0 + y * y)
        return np.zeros_like(y)

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero"


@dataclass
class HeatModel:
    """Assembled matrices, time mesh and nonlinearity; the step factorizations are cached.

    Treat as read-only once built; independent solves may share one instance.
    """

    mass: CsrMatrix
    stiffness: CsrMatrix
    time_mesh: TimeMesh
    nonlinearity: Nonlinearity = field(default_factory=Nonlinearity)
    _factors: dict = field(default_factory=dict, init=False, repr=False)

    @property
    def n_dofs(self) -> int:
        return self.mass.shape[0]

    def step_solver(self, dt: float) -> FactorizedSpd:
        key = float(dt)
        solver = self._factors.get(key)
        if solver is None:
            solver = FactorizedSpd(as_csr(self.mass / dt + self.stiffness))
            self._factors[key] = solver
        return solver

    def step_solvers(self) -> list[FactorizedSpd]:
        return [self.step_solver(dt) for dt in self.time_mesh.dt]


def march(model: HeatModel, weights: np.ndarray, m_psi: np.ndarray, forcing: np.ndarray, y0: np.ndarray) -> np.ndarray:
    """Run the forward scheme for given slab multipliers.

    ``weights`` has shape ``(k,)`` or ``(k, B)``; the result is ``(k+1, N)`` or
    ``(k+1, N, B)`` respectively.
    """
    weights = np.asarray(weights, dtype=float)
    batched = weights.ndim == 2
    w = weights if batched else weights[:, None]
    k = model.time_mesh.k
    nb = w.shape[1]
    m, f = model.mass, model.nonlinearity
    dts = model.time_mesh.dt
    solvers = model.step_solvers()

    y = np.empty((k + 1, model.n_dofs, nb))
    y[0] = np.asarray(y0, dtype=float)[:, None]
    for i in range(1, k + 1):
        prev = y[i - 1]
        rhs = m @ (prev / dts[i - 1]) + np.outer(m_psi, w[i - 1]) + forcing[i - 1][:, None]
        if not f.is_zero:
            rhs -= m @ f.value(prev)
        y[i] = solvers[i - 1].solve(rhs)
    return y if batched else y[..., 0]


def forward_solve(
    tau: np.ndarray,
    pattern: FormPattern,
    forcing: np.ndarray,
    y0: np.ndarray,
    model: HeatModel,
) -> np.ndarray:
    """State trajectory ``(k+1, N)`` for switching times ``tau``.

    ``forcing`` holds the M-weighted extra right-hand side per slab, shape ``(k, N)``.
    """
    s = slab_weights(tau, pattern, model.time_mesh.times)
    return march(model, s, model.mass @ pattern.psi_nodal, forcing, y0)


def linearized_forward(state: np.ndarray, perturbation: np.ndarray, model: HeatModel) -> np.ndarray:
    """Response of the scheme to a perturbation ``h`` (shape ``(k, N)``) of the step right-hand sides."""
    k = model.time_mesh.k
    m, f = model.mass, model.nonlinearity
    dts = model.time_mesh.dt
    solvers = model.step_solvers()
    dy = np.zeros((k + 1, model.n_dofs))
    for i in range(1, k + 1):
        prev = dy[i - 1]
        rhs = m @ (prev / dts[i - 1]) + perturbation[i - 1]
        if not f.is_zero:
            rhs -= m @ (f.derivative(state[i - 1]) * prev)
        dy[i] = solvers[i - 1].solve(rhs)
    return dy


def adjoint_solve(state: np.ndarray, residual_weights: np.ndarray, model: HeatModel) -> np.ndarray:
    """Backward sweep with the transpose of the linearized scheme.

    ``residual_weights[i-1]`` is the derivative of the discrete objective with
    respect to ``y_i`` (i = 1..k). With ``lam_i`` the multiplier of step ``i``,
    the result is ``p[i-1] = lam_i / dt_i`` (a grid function approximating the
    continuous adjoint) and ``p[k] = 0``, so that

        <linearized_forward(h)[1:], g> == sum_i dt_i <h[i-1], p[i-1]>.
    """
    k = model.time_mesh.k
    m, f = model.mass, model.nonlinearity
    dts = model.time_mesh.dt
    solvers = model.step_solvers()
    lam = np.zeros((k + 1, model.n_dofs))  # lam[i] multiplies step i; lam[0] unused
    for i in range(k, 0, -1):
        rhs = np.array(residual_weights[i - 1], dtype=float)
        if i < k:
            mp = m @ lam[i + 1]
            rhs += mp / dts[i]
            if not f.is_zero:
                rhs -= f.derivative(state[i]) * mp
        lam[i] = solvers[i - 1].solve(rhs)
    p = np.zeros_like(lam)
    p[:-1] = lam[1:] / dts[:, None]
    return p


def evaluate_adjoint_at(p: np.ndarray, times: np.ndarray, t: float) -> np.ndarray:
    """Piecewise-linear-in-time value of ``p`` at ``t``, held constant outside ``[0, T]``."""
    t = min(max(float(t), float(times[0])), float(times[-1]))
    i = int(np.searchsorted(times, t, side="right")) - 1
    if i >= times.size - 1:
        return p[-1].copy()
    theta = (t - times[i]) / (times[i + 1] - times[i])
    return (1.0 - theta) * p[i] + theta * p[i + 1]


def write_trajectory(path: str | Path, values: np.ndarray) -> None:
    """One line per time step, space-separated nodal values."""
    np.savetxt(path, np.asarray(values), fmt="%.17g")
