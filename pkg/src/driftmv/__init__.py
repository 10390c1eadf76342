"""Particle solver for mean-variance hedging with a hidden two-point drift.

The package simulates the nonlinear filter of the drift, prices the
mean-variance optimal wealth by nested branch ensembles, and estimates the
hedging integrand from per-path derivative recursions instead of
resimulation. A compiled kernel backend accelerates the hot loops when
available; the pure NumPy fallback produces bitwise-identical numbers.
"""

__version__ = "0.1.0"

from .backend import BACKEND, available_backends
from .baseline import DoubleGrid, old_eta, old_solve_drift, old_solve_example
from .malliavin import (MalliavinBranch, branch_s2_s3, continuous_malliavin_pi,
                        malliavin_branch, malliavin_pi_step,
                        theta_and_derivative)
from .model import (DegenerateVarianceError, ModelParams, MomentEstimates,
                    compute_c1_c2, exact_posterior, log_rho_increment,
                    truncated_diffusion)
from .paths import (BranchEnsemble, EnsembleSpec, GridSpec, OuterPath,
                    branch_increments, euler_filter_step, grow_branch_ensemble,
                    make_grid, outer_path_from_increments, replicate_seed,
                    sample_increments, simulate_outer_path)
from .scheme import (SchemeOutput, estimate_N, estimate_rho_moments,
                     solve_path)
from .validation import (BudgetReport, ConvergenceFit, ErrorReport,
                         FilterOracleReport, branch_drho_root,
                         budget_martingale_check, constant_drift_moments,
                         constant_drift_oracle, convergence_fit, error_report,
                         example_driver_increments, example_h_path,
                         example_solve_new, example_true_solution,
                         filter_oracle_check)

__all__ = [
    "__version__",
    "BACKEND", "available_backends",
    "DoubleGrid", "old_eta", "old_solve_drift", "old_solve_example",
    "MalliavinBranch", "branch_s2_s3", "continuous_malliavin_pi",
    "malliavin_branch", "malliavin_pi_step", "theta_and_derivative",
    "DegenerateVarianceError", "ModelParams", "MomentEstimates",
    "compute_c1_c2", "exact_posterior", "log_rho_increment",
    "truncated_diffusion",
    "BranchEnsemble", "EnsembleSpec", "GridSpec", "OuterPath",
    "branch_increments", "euler_filter_step", "grow_branch_ensemble",
    "make_grid", "outer_path_from_increments", "replicate_seed",
    "sample_increments", "simulate_outer_path",
    "SchemeOutput", "estimate_N", "estimate_rho_moments", "solve_path",
    "BudgetReport", "ConvergenceFit", "ErrorReport", "FilterOracleReport",
    "branch_drho_root", "budget_martingale_check", "constant_drift_moments",
    "constant_drift_oracle", "convergence_fit", "error_report",
    "example_driver_increments", "example_h_path", "example_solve_new",
    "example_true_solution", "filter_oracle_check",
]
