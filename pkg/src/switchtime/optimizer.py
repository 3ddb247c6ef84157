"""Projected (proximal) gradient method with doubling backtracking."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .projection import is_feasible, project

log = logging.getLogger(__name__)

CSV_SCHEMA = 1
MAX_DOUBLINGS = 60


class BacktrackingError(RuntimeError):
    pass


@dataclass
class OptimizerConfig:
    gamma: float = 0.5
    max_iters: int = 200
    tol_residual: float = 1e-8
    tol_relative_change: float = 1e-8
    L_init: float = 1.0
    warm_start_L: bool = False
    # trial step sizes evaluated per batched objective call; does not change the iterates
    trial_batch: int = 4

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        if self.tol_residual <= 0 or self.tol_relative_change <= 0:
            raise ValueError("tolerances must be positive")
        if self.L_init <= 0 or self.max_iters < 1 or self.trial_batch < 1:
            raise ValueError("invalid optimizer configuration")


@dataclass
class IterationRecord:
    iter: int
    objective: float
    residual: float
    L: float
    tau: np.ndarray
    n_backtracks: int


@dataclass
class OptimizeResult:
    tau: np.ndarray
    objective: float
    history: list[IterationRecord] = field(default_factory=list)
    stop_reason: str = ""

    @property
    def iterations(self) -> int:
        return len(self.history)

    @property
    def residual(self) -> float:
        return self.history[-1].residual if self.history else float("nan")


def optimize(
    tau0: np.ndarray,
    horizon: float,
    value_and_grad: Callable[[np.ndarray], tuple[float, np.ndarray]],
    objective_many: Callable[[np.ndarray], np.ndarray],
    config: OptimizerConfig | None = None,
    callback: Callable[[IterationRecord], None] | None = None,
) -> OptimizeResult:
    """Minimize over ordered switching times starting from a feasible ``tau0``.

    Each outer iteration takes one gradient and then doubles ``L`` (from
    ``L_init``) until

        J(tau) - J(P(tau - g/L)) >= gamma * L * |tau - P(tau - g/L)|^2.

    Trial points are evaluated ``trial_batch`` at a time; the accepted ``L`` is
    the first one passing the test, as in the sequential loop.

    Stops when the fixed-point residual drops below ``tol_residual``, the
    relative change below ``tol_relative_change``, or after ``max_iters``.
    """
    config = config or OptimizerConfig()
    tau = np.asarray(tau0, dtype=float).copy()
    if not is_feasible(tau, horizon):
        raise ValueError("tau0 must be feasible; project it first")

    history: list[IterationRecord] = []
    value, grad = value_and_grad(tau)
    L_start = config.L_init
    stop_reason = "max_iters"
    for it in range(config.max_iters):
        L, new_tau, new_value, n_back = _backtrack(tau, value, grad, horizon, L_start, objective_many, config)
        step = np.linalg.norm(new_tau - tau)
        record = IterationRecord(it, value, step, L, tau.copy(), n_back)
        history.append(record)
        if callback is not None:
            callback(record)
        log.debug("iter %d  J=%.6e  r=%.3e  L=%g", it, value, step, L)

        tau_norm = np.linalg.norm(tau)
        tau, value = new_tau, new_value
        if step < config.tol_residual:
            stop_reason = "residual"
            break
        if tau_norm > 0 and step / tau_norm < config.tol_relative_change:
            stop_reason = "relative_change"
            break
        if it + 1 == config.max_iters:
            break
        if config.warm_start_L:
            L_start = L
        value, grad = value_and_grad(tau)
    return OptimizeResult(tau, float(value), history, stop_reason)


def _backtrack(tau, value, grad, horizon, L_start, objective_many, config):
    doublings = 0
    L = L_start
    while doublings <= MAX_DOUBLINGS:
        Ls = L * 2.0 ** np.arange(config.trial_batch)
        trials = np.array([project(tau - grad / Lm, horizon) for Lm in Ls])
        values = objective_many(trials)
        for m, (Lm, trial, trial_value) in enumerate(zip(Ls, trials, values)):
            gap = np.sum((tau - trial) ** 2)
            # gap == 0: the trial is tau itself, stationary for this L
            if gap == 0.0 or value - trial_value >= config.gamma * Lm * gap:
                return float(Lm), trial, float(trial_value), doublings + m
        doublings += config.trial_batch
        L = Ls[-1] * 2.0
    raise BacktrackingError(f"no sufficient decrease after {MAX_DOUBLINGS} doublings; the gradient is likely wrong")


def check_descent(history: Sequence[IterationRecord] | Sequence[float], atol: float = 1e-14) -> bool:
    if not history:
        raise ValueError("empty history")
    values = np.array([h.objective if isinstance(h, IterationRecord) else h for h in history], dtype=float)
    return bool(np.all(np.diff(values) <= atol))


def all_feasible(history: Sequence[IterationRecord], horizon: float) -> bool:
    return all(is_feasible(r.tau, horizon) for r in history)


def write_history_csv(path: str | Path, history: Sequence[IterationRecord]) -> None:
    n = history[0].tau.size if history else 0
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema: {CSV_SCHEMA}\n")
        writer = csv.writer(fh)
        writer.writerow(["iteration", "objective", "residual", "L", "n_backtracks"] + [f"tau_{j + 1}" for j in range(n)])
        for r in history:
            writer.writerow([r.iter, repr(float(r.objective)), repr(float(r.residual)), repr(float(r.L)), r.n_backtracks] + [repr(float(x)) for x in r.tau])


def read_history_csv(path: str | Path) -> list[IterationRecord]:
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.DictReader(lines))
    out = []
    for row in rows:
        taus = [float(v) for k, v in row.items() if k.startswith("tau_")]
        out.append(
            IterationRecord(int(row["iteration"]), float(row["objective"]), float(row["residual"]), float(row["L"]), np.array(taus), int(row["n_backtracks"]))
        )
    return out
