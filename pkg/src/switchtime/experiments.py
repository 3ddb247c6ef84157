"""Heat-equation test cases with a known optimal switching pattern, and experiment drivers."""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from functools import lru_cache
from pathlib import Path

import numpy as np

from .control import FormPattern, slab_weights
from .fem import assemble, build_mesh, interpolate_nodal
from .objective import Problem, objective_many, value_and_gradient
from .optimizer import OptimizerConfig, OptimizeResult, optimize, write_history_csv
from .parabolic import HeatModel, Nonlinearity, TimeMesh, write_trajectory
from .projection import project

log = logging.getLogger(__name__)

SUMMARY_SCHEMA = 1

TAU_OPT = np.array([0.0, 0.1, 0.15, 0.25, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85])

# initial points of the five runs per case
INITIAL_POINTS = [
    np.array([0.05, 0.1, 0.15, 0.25, 0.4, 0.55, 0.65, 0.85, 0.9, 1.0]),
    np.array([0.0, 0.1, 0.15, 0.2, 0.55, 0.55, 0.65, 0.85, 0.9, 0.9]),
    np.array([0.05, 0.15, 0.15, 0.25, 0.55, 0.6, 0.7, 0.75, 0.8, 0.9]),
    np.array([0.05, 0.15, 0.25, 0.3, 0.45, 0.6, 0.7, 0.75, 0.9, 1.0]),
    np.array([0.05, 0.15, 0.25, 0.45, 0.6, 0.65, 0.7, 0.75, 0.9, 0.9]),
]

PRESETS = {"desk": (20, 250), "full": (40, 1000)}


@dataclass(frozen=True)
class ExperimentCase:
    case_id: str
    alpha: float
    exact_solution_mode: str  # "function_space" or "discretized"


CASES = {
    "i": ExperimentCase("i", 0.0, "function_space"),
    "ii": ExperimentCase("ii", 0.0, "discretized"),
    "iii": ExperimentCase("iii", 1e-6, "function_space"),
    "iv": ExperimentCase("iv", 1e-6, "discretized"),
}


@dataclass(frozen=True)
class ProblemSpec:
    nx: int = 20
    k: int = 250
    horizon: float = 1.0
    nonlinearity: str = "zero"
    tau_opt: tuple[float, ...] = tuple(TAU_OPT)

    @classmethod
    def preset(cls, name: str, **overrides) -> "ProblemSpec":
        try:
            nx, k = PRESETS[name]
        except KeyError:
            raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
        return cls(nx=nx, k=k, **overrides)

    @property
    def n(self) -> int:
        return len(self.tau_opt)


def sinsin(x1, x2):
    return np.sin(np.pi * x1) * np.sin(np.pi * x2)


def gaussian_source(x1, x2):
    return 10.0 * np.exp(-2.0 * ((x1 - 0.5) ** 2 + (x2 - 0.5) ** 2))


@lru_cache(maxsize=8)
def build_model(nx: int, k: int, horizon: float, nonlinearity: str):
    mesh = build_mesh(nx)
    mass, stiff = assemble(mesh)
    return mesh, HeatModel(mass, stiff, TimeMesh.uniform(horizon, k), Nonlinearity(nonlinearity))


def desired_state(mesh, times: np.ndarray) -> np.ndarray:
    """Nodal ``y_d(t_i) = t_i^2 sin(pi x1) sin(pi x2)``; shape ``(k+1, N)``."""
    return np.outer(times**2, interpolate_nodal(sinsin, mesh))


def hat_average_desired_rhs(times: np.ndarray) -> np.ndarray:
    """Hat average over each slab of ``2t + 2 pi^2 t^2`` (the time factor of dy_d/dt - Laplace y_d).

    The normalized symmetric hat has mean ``mid`` and variance ``dt^2/24``.
    """
    mid = 0.5 * (times[:-1] + times[1:])
    dt = np.diff(times)
    return 2.0 * mid + 2.0 * np.pi**2 * (mid**2 + dt**2 / 24.0)


def build_forcing_continuous(spec: ProblemSpec, mesh, model: HeatModel, pattern: FormPattern) -> np.ndarray:
    """M-weighted slab forcing from ``w = dy_d/dt - Laplace y_d - c_opt(t) psi`` in function space."""
    times = model.time_mesh.times
    phi = interpolate_nodal(sinsin, mesh)
    s_opt = slab_weights(np.array(spec.tau_opt), pattern, times)
    nodal = np.outer(hat_average_desired_rhs(times), phi) - np.outer(s_opt, pattern.psi_nodal)
    return (model.mass @ nodal.T).T


def build_forcing_discrete(spec: ProblemSpec, mesh, model: HeatModel, pattern: FormPattern) -> np.ndarray:
    """M-weighted slab forcing that makes ``y_i = y_d(t_i)`` solve the scheme exactly at ``tau_opt``."""
    times = model.time_mesh.times
    yd = desired_state(mesh, times)
    m, a = model.mass, model.stiffness
    dt = model.time_mesh.dt[:, None]
    s_opt = slab_weights(np.array(spec.tau_opt), pattern, times)
    my = (m @ yd.T).T
    forcing = my[1:] / dt + (a @ yd[1:].T).T - my[:-1] / dt - np.outer(s_opt, m @ pattern.psi_nodal)
    f = model.nonlinearity
    if not f.is_zero:
        forcing += (m @ f.value(yd[:-1]).T).T
    return forcing


def build_problem(case: ExperimentCase | str, spec: ProblemSpec) -> Problem:
    if isinstance(case, str):
        case = CASES[case]
    mesh, model = build_model(spec.nx, spec.k, spec.horizon, spec.nonlinearity)
    pattern = FormPattern.alternating(interpolate_nodal(gaussian_source, mesh), spec.n)
    if case.exact_solution_mode == "function_space":
        forcing = build_forcing_continuous(spec, mesh, model, pattern)
    elif case.exact_solution_mode == "discretized":
        forcing = build_forcing_discrete(spec, mesh, model, pattern)
    else:
        raise ValueError(f"unknown exact solution mode {case.exact_solution_mode!r}")
    return Problem(
        model=model,
        pattern=pattern,
        forcing=forcing,
        y0=np.zeros(model.n_dofs),
        y_desired=desired_state(mesh, model.time_mesh.times),
        alpha=case.alpha,
        tau_d=np.array(spec.tau_opt),
    )


def solve_problem(
    problem: Problem,
    tau0: np.ndarray,
    config: OptimizerConfig | None = None,
    gradient: str = "interpolated",
    callback=None,
) -> OptimizeResult:
    """Project ``tau0`` and run the projected gradient method.

    ``gradient="interpolated"`` (default) steps along the adjoint read off at
    the switching times. The exact discrete derivative (``"exact"``) vanishes
    whenever a switching time sits on a time node, so runs started on the node
    grid would never move those components.
    """
    start = project(np.asarray(tau0, dtype=float), problem.horizon)
    return optimize(
        start,
        problem.horizon,
        lambda t: value_and_gradient(t, problem, gradient),
        lambda ts: objective_many(ts, problem),
        config,
        callback=callback,
    )


def run_case(
    case: str,
    tau0: np.ndarray,
    spec: ProblemSpec,
    config: OptimizerConfig | None = None,
    out_dir: str | Path | None = None,
    dump_trajectory: bool = False,
    gradient: str = "interpolated",
) -> dict:
    """Run one experiment; writes ``history.csv`` and ``summary.json`` when ``out_dir`` is given."""
    config = config or OptimizerConfig()
    problem = build_problem(case, spec)
    t0 = time.perf_counter()
    result = solve_problem(problem, tau0, config, gradient)
    wall = time.perf_counter() - t0
    summary = {
        "schema": SUMMARY_SCHEMA,
        "case": case,
        "tau0": [float(x) for x in tau0],
        "nx": spec.nx,
        "k": spec.k,
        "nonlinearity": spec.nonlinearity,
        "gamma": config.gamma,
        "gradient": gradient,
        "final_tau": [float(x) for x in result.tau],
        "objective": result.objective,
        "residual": result.residual,
        "stop_reason": result.stop_reason,
        "iterations": result.iterations,
        "wall_time_s": wall,
    }
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_history_csv(out / "history.csv", result.history)
        (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
        if dump_trajectory:
            write_trajectory(out / "trajectory.txt", problem.state(result.tau))
    summary["history"] = result.history
    return summary


def _run_one(args):
    case, idx, spec, config, out_dir, gradient = args
    sub = None if out_dir is None else Path(out_dir) / f"table_{table_number(case, idx):02d}"
    summary = run_case(case, INITIAL_POINTS[idx], spec, config, sub, gradient=gradient)
    summary["table"] = table_number(case, idx)
    return summary


def table_number(case: str, start_index: int) -> int:
    return 5 * list(CASES).index(case) + start_index + 1


def run_all(
    spec: ProblemSpec,
    config: OptimizerConfig | None = None,
    out_dir: str | Path | None = None,
    jobs: int = 1,
    gradient: str = "interpolated",
) -> list[dict]:
    """All cases times all initial points, numbered case by case, then by initial point."""
    config = config or OptimizerConfig()
    tasks = [(case, idx, spec, config, out_dir, gradient) for case in CASES for idx in range(len(INITIAL_POINTS))]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_one, tasks))
    return [_run_one(t) for t in tasks]


def _ode_objective(tau1: float, tau2: float, psi1: float, slope: float, horizon: float) -> float:
    """``g(y(tau2))`` for ``y' = chi_[tau1, tau2) psi1``, ``y(0) = 0``, ``g(z) = slope * z``."""
    if tau1 <= tau2 and tau2 > 0 and tau1 < horizon:
        t = min(max(tau2, 0.0), horizon)
        y = psi1 * max(t - max(tau1, 0.0), 0.0)
    else:
        y = 0.0
    return slope * y


def ode_counterexample(psi1: float, g_slope: float, tau_bar: float, horizon: float = 1.0) -> tuple[float, float]:
    """One-sided derivatives of ``tau -> g(y_tau(tau_2))`` at ``(tau_bar, tau_bar)`` along ``(0, -1)`` and ``(0, +1)``.

    Difference quotients on a shrinking step sequence, extrapolated to zero
    step with one Richardson stage.
    """
    if not 0.0 < tau_bar < horizon:
        raise ValueError("tau_bar must lie in (0, T)")
    base = _ode_objective(tau_bar, tau_bar, psi1, g_slope, horizon)
    steps = 1e-3 * 0.5 ** np.arange(6)

    def limit(sign: float) -> float:
        q = np.array([(_ode_objective(tau_bar, tau_bar + sign * h, psi1, g_slope, horizon) - base) / h for h in steps])
        rich = 2.0 * q[1:] - q[:-1]
        return float(rich[-1])

    return limit(-1.0), limit(1.0)


def with_overrides(spec: ProblemSpec, **kw) -> ProblemSpec:
    return replace(spec, **{k: v for k, v in kw.items() if v is not None})
