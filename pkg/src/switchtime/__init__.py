"""Switching-time optimization for the heat equation by projected gradients."""

from .control import FormPattern, chi_bar, control_scalar, slab_weight, slab_weight_derivative, slab_weights
from .experiments import CASES, INITIAL_POINTS, TAU_OPT, ProblemSpec, build_problem, ode_counterexample, run_all, run_case
from .fem import TriMesh, assemble, build_mesh, interpolate_nodal, poisson_nodal_error
from .objective import Problem, fd_gradient, gradient, gradient_check, gradient_from_adjoint, objective, stationarity_residual, value_and_gradient
from .optimizer import IterationRecord, OptimizerConfig, check_descent, optimize
from .parabolic import HeatModel, Nonlinearity, TimeMesh, adjoint_solve, evaluate_adjoint_at, forward_solve
from .projection import kkt_verify, pool, project, qp_oracle_project
from .sparse_linalg import SolverError, solve_spd, spmv

__version__ = "0.1.0"
