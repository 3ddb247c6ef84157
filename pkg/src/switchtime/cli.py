"""Command-line entry point.

Every flag may also come from a ``--config`` file with one ``key = value`` per
line (``#`` starts a comment, vectors are comma-separated). Flags given on the
command line override the file.

Exit codes: 0 success, 1 solver error or failed check, 2 invalid configuration.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .experiments import CASES, INITIAL_POINTS, PRESETS, ProblemSpec, build_problem, ode_counterexample, run_all, run_case
from .objective import gradient_check, sample_interior_tau
from .optimizer import BacktrackingError, OptimizerConfig, check_descent
from .projection import project
from .sparse_linalg import SolverError

EXIT_OK, EXIT_SOLVER, EXIT_CONFIG = 0, 1, 2


class ConfigError(ValueError):
    pass


def parse_vector(text: str) -> np.ndarray:
    parts = text.replace(",", " ").split()
    if not parts:
        raise argparse.ArgumentTypeError("empty vector")
    try:
        return np.array([float(p) for p in parts])
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a real vector: {text!r}") from exc


def load_config(path: str | Path) -> dict[str, str]:
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    out = {}
    for num, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"{path}:{num}: expected 'key = value'")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _common(p: argparse.ArgumentParser, optimizer: bool = True) -> None:
    p.add_argument("--preset", choices=sorted(PRESETS), default="desk")
    p.add_argument("--nonlinearity", choices=["zero", "sin", "arctan"], default="zero")
    if optimizer:
        p.add_argument("--gamma", type=float, default=0.5)
        p.add_argument("--max-iters", type=int, default=200)
        p.add_argument("--gradient", choices=["interpolated", "exact"], default="interpolated")
        p.add_argument("--out-dir", type=Path, default=None)


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    config_parent = argparse.ArgumentParser(add_help=False)
    config_parent.add_argument("--config", type=Path, default=None, help="key = value file supplying any flag")
    config_parent.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="switchtime", description="Switching-time optimization for the heat equation.")
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    p = sub.add_parser("run", parents=[config_parent], help="optimize one case from one initial point")
    p.add_argument("--case", choices=sorted(CASES), default="i")
    p.add_argument("--tau0", type=parse_vector, default=None, help="initial switching times (default: --start)")
    p.add_argument("--start", type=int, choices=range(1, len(INITIAL_POINTS) + 1), default=1, help="index of a built-in initial point")
    p.add_argument("--trajectory", action="store_true", help="also write trajectory.txt")
    _common(p)
    subs["run"] = p

    p = sub.add_parser("run-all", parents=[config_parent], help="all cases from all built-in initial points")
    p.add_argument("--jobs", type=int, default=1)
    _common(p)
    subs["run-all"] = p

    p = sub.add_parser("project", parents=[config_parent], help="project a vector onto ordered times in [0, T]")
    p.add_argument("--tau", type=parse_vector, default=None)
    p.add_argument("--horizon", type=float, default=1.0)
    subs["project"] = p

    p = sub.add_parser("check-gradient", parents=[config_parent], help="compare the adjoint gradient with central differences")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--case", choices=sorted(CASES), default="i")
    p.add_argument("--step", type=float, default=1e-6)
    p.add_argument("--rtol", type=float, default=1e-5)
    p.add_argument("--margin", type=float, default=2e-5, help="minimum distance of every tau_j from time nodes and slab midpoints")
    _common(p, optimizer=False)
    subs["check-gradient"] = p

    p = sub.add_parser("demo-ode", parents=[config_parent], help="one-sided derivatives of the scalar ODE example")
    p.add_argument("--psi1", type=float, default=1.0)
    p.add_argument("--slope", type=float, default=1.0)
    p.add_argument("--tau-bar", type=float, default=0.5)
    subs["demo-ode"] = p
    return parser, subs


def parse_args(argv: list[str] | None) -> argparse.Namespace:
    parser, subs = build_parser()
    args = parser.parse_args(argv)
    if args.config is None:
        return args
    cfg = load_config(args.config)
    p = subs[args.command]
    known = {a.dest for a in p._actions}
    unknown = sorted(set(cfg) - known)
    if unknown:
        raise ConfigError(f"unknown config keys for {args.command}: {', '.join(unknown)}")
    for action in p._actions:
        if action.dest in cfg and action.const is True and action.nargs == 0:  # store_true flags
            cfg[action.dest] = cfg[action.dest].lower() in ("1", "true", "yes", "on")
    # string defaults are converted by argparse just like command-line values
    p.set_defaults(**cfg)
    return parser.parse_args(argv)


def _optimizer_config(args) -> OptimizerConfig:
    return OptimizerConfig(gamma=args.gamma, max_iters=args.max_iters)


def _spec(args) -> ProblemSpec:
    return ProblemSpec.preset(args.preset, nonlinearity=args.nonlinearity)


def cmd_run(args) -> int:
    tau0 = args.tau0 if args.tau0 is not None else INITIAL_POINTS[args.start - 1]
    spec = _spec(args)
    if tau0.size != spec.n:
        raise ConfigError(f"tau0 needs {spec.n} entries, got {tau0.size}")
    summary = run_case(args.case, tau0, spec, _optimizer_config(args), args.out_dir, args.trajectory, args.gradient)
    summary.pop("history")
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def cmd_run_all(args) -> int:
    results = run_all(_spec(args), _optimizer_config(args), args.out_dir, args.jobs, args.gradient)
    ok = True
    for r in results:
        descent = check_descent(r["history"])
        ok &= descent
        tau = " ".join(f"{x:.3f}" for x in r["final_tau"])
        print(f"table {r['table']:2d}  case {r['case']:>3}  J={r['objective']:.4e}  iters={r['iterations']:3d}  {r['stop_reason']:<15}  descent={descent}  tau=({tau})")
    return EXIT_OK if ok else EXIT_SOLVER


def cmd_project(args) -> int:
    if args.tau is None:
        raise ConfigError("--tau is required")
    if args.horizon <= 0:
        raise ConfigError("--horizon must be positive")
    print(" ".join(repr(float(x)) for x in project(args.tau, args.horizon)))
    return EXIT_OK


def cmd_check_gradient(args) -> int:
    problem = build_problem(args.case, _spec(args))
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    failures = 0
    for _ in range(args.count):
        tau = sample_interior_tau(rng, problem.n, problem.times, args.margin)
        res = gradient_check(problem, tau, args.step)
        worst = max(worst, res["max_rel"])
        failures += res["max_rel"] > args.rtol
    print(f"samples={args.count} failures={failures} max_rel={worst:.3e} rtol={args.rtol:g}")
    return EXIT_OK if failures == 0 else EXIT_SOLVER


def cmd_demo_ode(args) -> int:
    left, right = ode_counterexample(args.psi1, args.slope, args.tau_bar)
    print(f"left={left:.6g} right={right:.6g}")
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "run-all": cmd_run_all,
    "project": cmd_project,
    "check-gradient": cmd_check_gradient,
    "demo-ode": cmd_demo_ode,
}


def main(argv: list[str] | None = None) -> int:
    try:
        args = parse_args(argv)
    except SystemExit as exc:  # argparse usage errors
        return EXIT_CONFIG if exc.code else EXIT_OK
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, BacktrackingError, RuntimeError, FloatingPointError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
