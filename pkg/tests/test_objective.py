import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from switchtime.control import FormPattern
from switchtime.experiments import TAU_OPT, ProblemSpec, build_problem
from switchtime.fem import assemble, build_mesh
from switchtime.objective import (
    Problem,
    fd_gradient,
    gradient,
    gradient_check,
    gradient_from_adjoint,
    kink_distance,
    objective,
    objective_many,
    sample_interior_tau,
    stationarity_residual,
    value_and_gradient,
)
from switchtime.parabolic import HeatModel, TimeMesh


def quadratic_problem(n=4, alpha=1.0, tau_d=None, k=20):
    """psi = 0, no forcing, zero desired state: only the Tikhonov term remains."""
    mass, stiff = assemble(build_mesh(4))
    model = HeatModel(mass, stiff, TimeMesh.uniform(1.0, k))
    dofs = model.n_dofs
    return Problem(
        model=model,
        pattern=FormPattern.alternating(np.zeros(dofs), n),
        forcing=np.zeros((k, dofs)),
        y0=np.zeros(dofs),
        y_desired=np.zeros((k + 1, dofs)),
        alpha=alpha,
        tau_d=np.zeros(n) if tau_d is None else tau_d,
    )


def test_negative_alpha_rejected():
    with pytest.raises(ValueError):
        quadratic_problem(alpha=-1.0)


def test_quadratic_objective():
    tau = np.array([0.1, 0.2, 0.5, 0.9])
    assert objective(tau, quadratic_problem()) == pytest.approx(0.5 * np.sum(tau**2))


def test_quadratic_gradient_exact(rng):
    tau_d = np.array([0.2, 0.3, 0.4, 0.5])
    problem = quadratic_problem(alpha=0.7, tau_d=tau_d)
    tau = np.sort(rng.uniform(0, 1, 4))
    for conv in ("exact", "interpolated"):
        np.testing.assert_allclose(gradient(tau, problem, conv), 0.7 * (tau - tau_d), atol=1e-15)
    np.testing.assert_allclose(fd_gradient(tau, problem), 0.7 * (tau - tau_d), atol=1e-9)


def test_manufactured_optimum_case_ii():
    problem = build_problem("ii", ProblemSpec(nx=10, k=60))
    value, grad = value_and_gradient(TAU_OPT, problem)
    assert value < 1e-12
    assert np.linalg.norm(grad) < 1e-8


def test_case_i_optimum_is_small_but_nonzero():
    coarse = objective(TAU_OPT, build_problem("i", ProblemSpec(nx=6, k=40)))
    fine = objective(TAU_OPT, build_problem("i", ProblemSpec(nx=12, k=160)))
    assert 0 < fine < coarse


@pytest.mark.parametrize("kind", ["zero", "sin", "arctan"])
@pytest.mark.parametrize("case", ["i", "iii"])
def test_gradient_matches_fd(small_problems, kind, case):
    problem = small_problems[(kind, case)]
    r = np.random.default_rng(7)
    for _ in range(5):
        tau = sample_interior_tau(r, problem.n, problem.times, 1e-4)
        res = gradient_check(problem, tau, step=1e-7)
        assert res["max_rel_to_norm"] < 1e-6


def test_fd_oracle_truncation_on_small_components():
    """Where strict per-component agreement fails at step 1e-6, refining the step restores it.

    Seed 0 on the desk preset, case (i), f = 0 contains one such sample: its
    smallest gradient component is ~2000 times below the largest, and the
    central-difference truncation error scales like step^2.
    """
    problem = build_problem("i", ProblemSpec.preset("desk"))
    r = np.random.default_rng(0)
    samples = [sample_interior_tau(r, problem.n, problem.times, 2e-5) for _ in range(100)]
    coarse = [gradient_check(problem, t, 1e-6) for t in samples]
    bad = [i for i, c in enumerate(coarse) if c["max_rel"] > 1e-5]
    assert bad, "expected at least one sample limited by the oracle"
    for i in bad:
        assert coarse[i]["max_rel_to_norm"] < 1e-7
        fine = gradient_check(problem, samples[i], 1e-7)
        assert fine["max_rel"] < 1e-5
        assert fine["max_rel"] < coarse[i]["max_rel"] / 10


def test_exact_gradient_flat_on_time_nodes(small_problems):
    problem = small_problems[("zero", "i")]
    tau = problem.times[[2, 5, 9, 12, 20, 22, 25, 30, 33, 38]]
    assert np.all(gradient(tau, problem) == 0)
    assert np.any(gradient(tau, problem, "interpolated") != 0)


def test_gradient_near_node_degrades_gracefully(small_problems):
    problem = small_problems[("sin", "i")]
    tau = np.sort(np.random.default_rng(3).uniform(0.05, 0.95, problem.n))
    tau[4] = problem.times[18] + 1e-9  # one component hugs a node
    res = gradient_check(problem, tau, 1e-6)
    assert np.all(np.isfinite(res["fd"]))
    assert res["max_rel_to_norm"] < 1e-2


def test_unknown_convention(small_problems):
    with pytest.raises(ValueError):
        gradient(TAU_OPT, small_problems[("zero", "i")], "bogus")


def test_gradient_from_adjoint_slab_matches(small_problems, rng):
    problem = small_problems[("arctan", "iii")]
    tau = np.sort(rng.uniform(0.01, 0.99, problem.n))
    np.testing.assert_allclose(gradient_from_adjoint(tau, problem, "slab"), gradient(tau, problem), rtol=1e-10, atol=1e-13)


def test_gradient_from_adjoint_linear_is_interpolated(small_problems, rng):
    problem = small_problems[("zero", "i")]
    tau = np.sort(rng.uniform(0.01, 0.99, problem.n))
    np.testing.assert_allclose(gradient_from_adjoint(tau, problem, "linear"), gradient(tau, problem, "interpolated"), rtol=1e-12, atol=1e-15)


def test_objective_many_matches_single(small_problems, rng):
    problem = small_problems[("sin", "iii")]
    taus = np.sort(rng.uniform(0, 1, (3, problem.n)), axis=1)
    np.testing.assert_allclose(objective_many(taus, problem), [objective(t, problem) for t in taus], rtol=1e-12)


def test_stationarity_residual_examples():
    c = np.array([0.1, 0.3, 0.6, 0.8])
    problem = quadratic_problem(tau_d=c)
    assert stationarity_residual(c, problem, 1.0) == 0.0
    assert stationarity_residual(c + 0.05, problem, 1.0) > 0
    with pytest.raises(ValueError):
        stationarity_residual(c, problem, 0.0)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=10))
def test_kink_distance(raw):
    times = np.linspace(0, 1, 11)
    tau = np.array(raw)
    marks = np.sort(np.concatenate([times, times[:-1] + 0.05]))
    brute = np.min(np.abs(tau[:, None] - marks[None]), axis=1)
    np.testing.assert_allclose(kink_distance(tau, times), brute, atol=1e-15)
