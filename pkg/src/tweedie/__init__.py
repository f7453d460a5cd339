"""Posterior functionals under additive noise, computed from the observed marginal density."""

from .core import (
    DensityTooSmall, DimensionMismatch, DomainError, EvalResult, FunctionalSpec,
    InvalidPrior, MgfDomain, NoiseSpec, NoMass, NonConvergence, ParamOutOfRange,
    PriorSpec, SeriesDivergence, TooFewSamples, TweedieError, Unsupported,
    validate_functional, validate_noise,
)
from .densities import density_deriv, exact_density, kde_fit, right_deriv
from .functionals import evaluate
from .gaussian import (
    HeteroJointSpec, gauss_cdf, gauss_functional, gauss_hinge_abs,
    gauss_multivariate, hetero_condition,
)
from .laplace_mech import lm_cov, lm_functional_1d, lm_mean_vec, lm_mgf
from .noise_catalog import expectation_form_kernel, posterior_mean, unbiased_mean_functional
from .oracle import OracleReport, ValidationCase, noise_pdf, oracle_posterior, run_validation, sample_joint

__version__ = "0.1.0"
