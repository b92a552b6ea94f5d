"""Predictive density estimation under KL loss in the two-sample Gaussian model."""

__version__ = "0.1.0"

from .core_model import ModelConfig, combine_w, gaussian_logpdf, kl_gaussian, sample_isotropic
from .errors import ConfigError, DimensionError, QuadratureError
from .priors import (
    PriorFamilySpec,
    RadialPrior,
    blyth_j,
    build_prior,
    make_blyth,
    make_gaussian_prior,
    make_power,
    make_uniform,
    sample_from_proper,
)
