"""volterra_lab: a numerical laboratory for singular-kernel stochastic
Volterra equations, their deterministic moment/log-Laplace companions, and
the duality and uniqueness structure around them."""

from .errors import (ConstructionError, DegeneratePathError, DivergenceError,
                     DomainError, NumericalError, ParameterError,
                     VolterraLabError)
from .kernels import (FractionalHeat, SingularPower, SmoothKernel,
                      TestFunction, alpha_theta_convert, c_theta,
                      frac_heat_kernel_eval, kernel_l2_partial,
                      kernel_space_increment_l2, kernel_time_increment_l2,
                      power_kernel_eval, semigroup_at_origin,
                      test_function_mass)
from .noise import (GENERATOR_TAG, BrownianPath, TimeGrid, coarsen_path,
                    derive_path_seed, sample_brownian_increments,
                    sample_increment_block)
from .sie_solver import (DiffusionCoefficient, PicardResult, SiePath,
                         SieProblem, c_alpha, constant_sigma_variance,
                         euler_chunk, euler_solve, forcing_profile,
                         iter_euler_chunks, picard_solve,
                         singular_lag_weights, transform_forward,
                         transform_inverse)
from .det_volterra import (LogLaplaceSolution, MomentOracle,
                           semigroup_profile, solve_linear_moment,
                           solve_log_laplace)
from .duality import DualityReport, duality_report, laplace_lhs_mc, laplace_rhs
from .yw_mollifiers import (FamilyAudit, MollifierFamily, PropertyCheck,
                            a_sequence, build_family, phi_n_eval,
                            phi_prime_n_eval, psi_n_eval, verify_family)
from .regularity import (HolderEstimate, MomentIncrementReport,
                         holder_estimate, moment_increment_check,
                         xi_admissible_range, xi_improvement)
from .presets import g_preset, kappa_preset, phi_preset, sigma_preset
from .experiments import (CSV_HEADER, SCHEMA_VERSION, ExperimentConfig,
                          ReportRow, load_config, render_csv, run_experiment)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "VolterraLabError", "ParameterError", "DomainError", "ConstructionError",
    "NumericalError", "DivergenceError", "DegeneratePathError",
    # kernels
    "SingularPower", "FractionalHeat", "SmoothKernel", "TestFunction",
    "power_kernel_eval", "frac_heat_kernel_eval", "c_theta",
    "alpha_theta_convert", "kernel_l2_partial", "semigroup_at_origin",
    "test_function_mass", "kernel_time_increment_l2",
    "kernel_space_increment_l2",
    # noise
    "TimeGrid", "BrownianPath", "GENERATOR_TAG", "derive_path_seed",
    "sample_brownian_increments", "sample_increment_block", "coarsen_path",
    # SIE solver
    "DiffusionCoefficient", "SieProblem", "SiePath", "PicardResult",
    "euler_chunk", "euler_solve", "picard_solve", "iter_euler_chunks",
    "c_alpha",
    "constant_sigma_variance", "singular_lag_weights", "forcing_profile",
    "transform_forward", "transform_inverse",
    # deterministic Volterra
    "MomentOracle", "LogLaplaceSolution", "solve_linear_moment",
    "solve_log_laplace", "semigroup_profile",
    # duality
    "DualityReport", "duality_report", "laplace_lhs_mc", "laplace_rhs",
    # mollifiers
    "MollifierFamily", "PropertyCheck", "FamilyAudit", "a_sequence",
    "build_family", "psi_n_eval", "phi_n_eval", "phi_prime_n_eval",
    "verify_family",
    # regularity
    "HolderEstimate", "MomentIncrementReport", "holder_estimate",
    "moment_increment_check", "xi_admissible_range", "xi_improvement",
    # presets and experiments
    "sigma_preset", "g_preset", "phi_preset", "kappa_preset",
    "ExperimentConfig", "ReportRow", "run_experiment", "render_csv",
    "load_config", "CSV_HEADER", "SCHEMA_VERSION",
]
