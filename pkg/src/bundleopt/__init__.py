"""Randomized-smoothing toolbox.

Monte-Carlo smoothing of objectives and dynamics (gradient and Jacobian
bundles with first- and zero-order estimators), quasi-dynamic contact
models (complementarity, convex cone relaxation, penalty with Stribeck
friction), a dense strictly-convex QP solver, benchmark dynamical systems,
and an iterative LQR-style trajectory optimizer that plans through contact
by linearizing with the Jacobian bundle.
"""

from .contact import (Contact1DParams, Contact1DState, Contact2DParams,
                      Contact2DState, ContactPush1D, ContactPush2D,
                      PenaltyParams, PenaltyStep1DParams, StepDiagnostics,
                      penalty_forces, penalty_step_1d, smoothed_penalty_forces,
                      step_1d, step_2d_anitescu, step_2d_exact)
from .errors import ConfigurationError, DivergedError, SingularRegressionError
from .functions import TEST_FUNCTION_IDS, TestFunction, get_test_function
from .irs_lqr import (GradientMode, MpcProblem, MpcResult, ResultRecord,
                      TrajectoryIterate, assemble_mpc_qp, irs_lqr_run,
                      linearize_trajectory, mpc_solve, rollout, run_comparison,
                      trajectory_cost)
from .oracle import convolution_oracle
from .qp import QpProblem, QpSolution, SolverOptions, kkt_residual, solve_qp
from .smoothing import (BundleEstimate, PerturbationBatch, SmoothingDistribution,
                        bundled_objective_estimate, first_order_gradient_bundle,
                        jacobian_bundle_first_order, jacobian_bundle_zero_order,
                        sample_perturbations, variance_schedule,
                        zero_order_gradient_bundle)
from .systems import (DubinsCar, DynamicalSystem, LinearizedDynamics, LinearSystem,
                      Pendulum, Quadrotor, dubins_step, linearize_exact,
                      pendulum_step, quadrotor_step)
from .tasks import TaskSetup, build_task

__version__ = "0.1.0"
