"""Approximate Bayesian inference for covariate-dependent copula dependence.

The library estimates how Kendall's tau or Spearman's rho between two
variables changes with covariates, without committing to a copula family.
Per-level rank estimates are Fisher transformed and smoothed by a Gaussian
process, Bayesian regression splines or exponentially tilted empirical
likelihood.
"""

__version__ = "0.1.0"

from .copulas import (
    CopulaSpec,
    Family,
    feasible_range,
    functional_to_theta,
    kendall_tau,
    pseudo_observe,
    sample_copula,
    spearman_rho,
    theta_to_rho,
    theta_to_tau,
)
from .curve import PosteriorCurve
from .dependence import (
    FisherSeries,
    GroupedSample,
    PooledSample,
    WeightScheme,
    conditional_rho_hat,
    conditional_tau_hat,
    fisher_transform,
    inverse_fisher,
    unconditional_estimates,
)
from .el import (
    CalibrationDesign,
    el_predict_curve,
    et_el_weights,
    linearised_el_posterior,
    localized_el_curve,
    localized_el_posterior,
)
from .errors import (
    CondCopError,
    ConfigError,
    DataError,
    DegenerateWeightsError,
    DomainError,
    EstimationError,
    ExtrapolationError,
    InsufficientDataError,
    NumericError,
)
from .gp import GPModelConfig, MHConfig, fit_gp, integrated_loglik
from .splines import (
    SplineConfig,
    build_basis,
    fit_splines,
    gibbs_fit,
    spline_predict_curve,
)

__all__ = [
    "__version__",
    "CopulaSpec",
    "Family",
    "feasible_range",
    "functional_to_theta",
    "kendall_tau",
    "pseudo_observe",
    "sample_copula",
    "spearman_rho",
    "theta_to_rho",
    "theta_to_tau",
    "FisherSeries",
    "GroupedSample",
    "PooledSample",
    "WeightScheme",
    "conditional_rho_hat",
    "conditional_tau_hat",
    "fisher_transform",
    "inverse_fisher",
    "unconditional_estimates",
    "CalibrationDesign",
    "el_predict_curve",
    "et_el_weights",
    "linearised_el_posterior",
    "localized_el_curve",
    "localized_el_posterior",
    "CondCopError",
    "ConfigError",
    "DataError",
    "DegenerateWeightsError",
    "DomainError",
    "EstimationError",
    "ExtrapolationError",
    "InsufficientDataError",
    "NumericError",
    "PosteriorCurve",
    "GPModelConfig",
    "MHConfig",
    "fit_gp",
    "integrated_loglik",
    "SplineConfig",
    "build_basis",
    "fit_splines",
    "gibbs_fit",
    "spline_predict_curve",
]
