"""Point-process intensity inference with inequality-constrained Gaussian processes."""

from .constraints import ConstraintSpec, ConstraintSystem, build_constraint_system, check_satisfied
from .cox_inference import (
    IntensitySummary,
    MhConfig,
    PointPattern,
    PosteriorChain,
    estimate_hyperparams,
    initial_coefficients,
    log_likelihood,
    log_unnormalized_posterior,
    mh_infer,
    posterior_intensity,
    sample_prior_coefficients,
)
from .eval_metrics import MetricReport, acceptance_rate, ess_univariate, q_squared, smse
from .finite_gp import (
    KnotGrid,
    basis_matrix,
    evaluate_intensity,
    hat_basis,
    integration_weights,
    intensity_measure,
    make_grid,
)
from .kernel import KernelParams, covariance_matrix, se_kernel, tensor_kernel
from .point_process import IntensitySpec, gamma_hazard, simulate_poisson, toy_intensity, weibull_hazard
from .tmvn import (
    OrthantEstimate,
    TmvnProblem,
    TruncatedGaussianSampler,
    box_log_probability,
    orthant_log_probability,
    proposal_log_ratio,
    region_log_ratio,
    sample_tmvn_hmc,
)

__all__ = [
    "ConstraintSpec",
    "ConstraintSystem",
    "IntensitySpec",
    "IntensitySummary",
    "KernelParams",
    "KnotGrid",
    "MetricReport",
    "MhConfig",
    "OrthantEstimate",
    "PointPattern",
    "PosteriorChain",
    "TmvnProblem",
    "TruncatedGaussianSampler",
    "acceptance_rate",
    "basis_matrix",
    "box_log_probability",
    "build_constraint_system",
    "check_satisfied",
    "covariance_matrix",
    "ess_univariate",
    "estimate_hyperparams",
    "evaluate_intensity",
    "gamma_hazard",
    "hat_basis",
    "initial_coefficients",
    "integration_weights",
    "intensity_measure",
    "log_likelihood",
    "log_unnormalized_posterior",
    "make_grid",
    "mh_infer",
    "orthant_log_probability",
    "posterior_intensity",
    "proposal_log_ratio",
    "q_squared",
    "region_log_ratio",
    "sample_prior_coefficients",
    "sample_tmvn_hmc",
    "se_kernel",
    "simulate_poisson",
    "smse",
    "tensor_kernel",
    "toy_intensity",
    "weibull_hazard",
]

__version__ = "0.1.0"
