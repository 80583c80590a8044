"""Sparse identification of linear systems from one closed-loop trajectory."""

__version__ = "0.1.0"

from .models import NoiseSpec, SystemModel, UnstableSystemError, make_rng, noise_eta
from .stationary import (
    StationaryStats,
    build_joint_covariance,
    estimate_stability_constants,
    solve_discrete_lyapunov,
    stationary_stats,
)
from .simulation import (
    RegressionData,
    TrajectoryData,
    assemble_regression,
    sample_noise,
    sample_stationary_initial_state,
    simulate_closed_loop,
)
from .lasso import EstimateResult, LassoOptions, estimate_lasso, kkt_residual, lasso_column, soft_threshold
from .refit import RefinedEstimate, UnderdeterminedError, full_least_squares, restricted_least_squares
from .diagnostics import AssumptionReport, assumption_report, mutual_coherence, oracle_l0, support_sets
from .bounds import (
    TheoryParams,
    deterministic_error_bound,
    paper_lambda,
    theorem1_error_bound,
    theorem1_lambda,
    theorem1_min_T,
    theory_params,
)
