"""Two-sample isotropic Gaussian model.

X | mu ~ N_p(mu, v_x I) is observed, Y | mu ~ N_p(mu, v_y I) is to be
predicted. Everything here is closed form and works in the log domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class ModelConfig:
    """Dimension and the two known sampling variances."""

    p: int
    v_x: float
    v_y: float

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 1:
            raise ValueError(f"p must be a positive integer, got {self.p!r}")
        for name in ("v_x", "v_y"):
            val = getattr(self, name)
            if not (np.isfinite(val) and val > 0):
                raise ValueError(f"{name} must be positive and finite, got {val!r}")

    @property
    def v_w(self) -> float:
        """Variance of the precision-weighted combination of X and Y."""
        return self.v_x * self.v_y / (self.v_x + self.v_y)

    @property
    def log_bound(self) -> float:
        """log C, where C = (2 pi v_y)^(-p/2) bounds every p(y | mu)."""
        return -0.5 * self.p * math.log(2.0 * math.pi * self.v_y)

    @property
    def bound(self) -> float:
        return math.exp(self.log_bound)


def as_points(z, p: int) -> np.ndarray:
    """Coerce ``z`` to a float array whose last axis has length ``p``."""
    arr = np.asarray(z, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.shape[-1] != p:
        raise DimensionError(f"expected vectors of length {p}, got shape {arr.shape}")
    return arr


def _check_var(v):
    if not (np.isfinite(v) and v > 0):
        raise ValueError(f"variance must be positive and finite, got {v!r}")


def gaussian_logpdf(z, mean, v: float, p: int):
    """log N_p(z; mean, v I). Vectorised over leading axes of ``z``."""
    _check_var(v)
    z = as_points(z, p)
    mean = as_points(mean, p)
    sq = np.sum((z - mean) ** 2, axis=-1)
    out = -0.5 * p * (LOG_2PI + math.log(v)) - sq / (2.0 * v)
    return float(out) if np.ndim(out) == 0 else out


def kl_gaussian(mean_a, v_a: float, mean_b, v_b: float, p: int):
    """KL( N(mean_a, v_a I) || N(mean_b, v_b I) )."""
    _check_var(v_a)
    _check_var(v_b)
    mean_a = as_points(mean_a, p)
    mean_b = as_points(mean_b, p)
    sq = np.sum((mean_a - mean_b) ** 2, axis=-1)
    ratio = v_a / v_b
    # log1p keeps the variance term accurate when v_a ~ v_b
    var_term = 0.5 * p * (ratio - 1.0 - math.log1p(ratio - 1.0))
    out = var_term + sq / (2.0 * v_b)
    return float(out) if np.ndim(out) == 0 else out


def combine_w(x, y, model: ModelConfig):
    """W = (v_y X + v_x Y) / (v_x + v_y), distributed N(mu, v_w I)."""
    x = as_points(x, model.p)
    y = as_points(y, model.p)
    return (model.v_y * x + model.v_x * y) / (model.v_x + model.v_y)


def sample_isotropic(rng, mean, v: float, n: int) -> np.ndarray:
    """``n`` draws from N_p(mean, v I) as an (n, p) array.

    ``rng`` is a ``numpy.random.Generator``; draws are a location-scale
    transform of standard normals, so equal seeds give ``mean + sqrt(v) * xi``
    for the same ``xi`` regardless of ``mean`` and ``v``.
    """
    _check_var(v)
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    xi = rng.standard_normal((int(n), mean.shape[0]))
    return mean + math.sqrt(v) * xi
