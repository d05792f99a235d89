"""poissonnet: Poisson models for weighted directed networks.

Fits per-node out/in propensities, a density offset and edge-covariate
effects by maximum likelihood, with closed-form asymptotic inference
(standard errors, confidence intervals, bias-corrected covariate
estimates) and a Monte-Carlo harness for coverage studies.
"""

from .estimator import NetworkPoissonRegression
from .graph import (
    CovariateTensor,
    DegreeSequences,
    NodeAttributeTable,
    WeightedDigraph,
    build_covariates,
    degrees,
)
from .inference import (
    InferenceReport,
    approx_fisher_inverse,
    bias_corrected_gamma,
    bias_term,
    compute_inference,
    contrast_zscore,
    gamma_information,
    mu_standard_error,
    theta_standard_errors,
)
from .kernel import (
    ALPHA_N_BETA_N_ZERO,
    MU_ZERO_BETA_N_ZERO,
    NORMALIZATIONS,
    REF_NODE_FIRST,
    DivergenceError,
    FisherBlocks,
    ParamState,
    SingularFisherError,
    covariate_score,
    degree_score,
    fisher_blocks,
    log_likelihood,
    profile_hessian,
    rate,
    rate_matrix,
)
from .simulation import (
    SimDesign,
    SimulationReport,
    gen_covariates,
    gen_parameters,
    run_study,
    sample_network,
)
from .solver import FitResult, SolverConfig, fit, fit_joint, fit_theta_given_gamma

__version__ = "0.1.0"

__all__ = [
    "ALPHA_N_BETA_N_ZERO",
    "CovariateTensor",
    "DegreeSequences",
    "DivergenceError",
    "FisherBlocks",
    "FitResult",
    "InferenceReport",
    "MU_ZERO_BETA_N_ZERO",
    "NORMALIZATIONS",
    "NetworkPoissonRegression",
    "NodeAttributeTable",
    "ParamState",
    "REF_NODE_FIRST",
    "SimDesign",
    "SimulationReport",
    "SingularFisherError",
    "SolverConfig",
    "WeightedDigraph",
    "approx_fisher_inverse",
    "bias_corrected_gamma",
    "bias_term",
    "build_covariates",
    "compute_inference",
    "contrast_zscore",
    "covariate_score",
    "degree_score",
    "degrees",
    "fisher_blocks",
    "fit",
    "fit_joint",
    "fit_theta_given_gamma",
    "gamma_information",
    "gen_covariates",
    "gen_parameters",
    "log_likelihood",
    "mu_standard_error",
    "profile_hessian",
    "rate",
    "rate_matrix",
    "run_study",
    "sample_network",
    "theta_standard_errors",
]
