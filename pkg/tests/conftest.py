import numpy as np
import pytest

from switchtime.experiments import ProblemSpec, build_problem, run_all

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def report():
    """Record the outcome of an acceptance criterion for the terminal summary."""

    def _report(number: int, ok: bool, detail: str) -> bool:
        ACCEPTANCE[number] = (bool(ok), detail)
        return bool(ok)

    return _report


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def small_spec():
    return ProblemSpec(nx=6, k=40)


@pytest.fixture(scope="session")
def small_problems(small_spec):
    """Case (i) and (iii) problems on a tiny mesh for every nonlinearity."""
    from dataclasses import replace

    return {(f, c): build_problem(c, replace(small_spec, nonlinearity=f)) for f in ("zero", "sin", "arctan") for c in ("i", "iii")}


@pytest.fixture(scope="session")
def desk_runs():
    """All 20 runs on the desk preset; shared by the descent and stopping tests."""
    return run_all(ProblemSpec.preset("desk"))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
