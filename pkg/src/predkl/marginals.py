"""Marginal densities m(z; v) = int N(z; mu, v I) pi(mu) dmu for radial priors.

Because the prior is spherically symmetric, m depends on z only through
t = ||z||. All evaluators work with the radial profile u(t) = log m(t; v)
and its first two derivatives; vector-valued quantities are assembled from
those.
"""

from __future__ import annotations

import math
import threading
from typing import Optional

import numpy as np

from . import _kernels_py, kernels
from .core_model import LOG_2PI, as_points
from .errors import QuadratureError
from .priors import RadialPrior

__all__ = [
    "CLOSED_FORM_GAUSSIAN",
    "CLOSED_FORM_UNIFORM",
    "RADIAL_QUADRATURE",
    "MarginalEvaluator",
    "grad_log_marginal",
    "laplacian_sqrt_ratio",
    "log_marginal",
    "round_radius",
]

CLOSED_FORM_UNIFORM = "closed-form-uniform"
CLOSED_FORM_GAUSSIAN = "closed-form-gaussian"
RADIAL_QUADRATURE = "radial-quadrature"

SIGNIFICANT_DIGITS = 12
# radii below this multiple of sqrt(v) use the t -> 0 limit of the Laplacian
ORIGIN_SWITCH = 1e-8


def round_radius(t):
    """Round radii to 12 significant digits (the memo/evaluation key)."""
    t = np.abs(np.asarray(t, dtype=float))
    flat = t.reshape(-1)
    out = flat.copy()
    pos = flat > 0
    if np.any(pos):
        exp10 = np.floor(np.log10(flat[pos]))
        scale = 10.0 ** (SIGNIFICANT_DIGITS - 1 - exp10)
        out[pos] = np.round(flat[pos] * scale) / scale
    return out.reshape(t.shape)


class MarginalEvaluator:
    """Evaluates u(t) = log m(t; v) and its radial derivatives.

    ``method`` is chosen automatically (closed form for the uniform and
    Gaussian priors, radial quadrature otherwise) unless forced. Radii are
    rounded to 12 significant digits before every evaluation so that memo
    hits and misses return identical numbers.
    """

    def __init__(self, prior: RadialPrior, p: int, method: Optional[str] = None,
                 rel_tol: float = 1e-7, max_panels: int = 4096):
        if int(p) != p or p < 1:
            raise ValueError(f"p must be a positive integer, got {p!r}")
        if prior.origin_exponent >= p:
            raise ValueError(f"{prior.name} is not locally integrable in dimension {p}")
        self.prior = prior
        self.p = int(p)
        self.rel_tol = float(rel_tol)
        self.max_panels = int(max_panels)
        if method is None:
            if prior.is_uniform:
                method = CLOSED_FORM_UNIFORM
            elif prior.is_gaussian:
                method = CLOSED_FORM_GAUSSIAN
            else:
                method = RADIAL_QUADRATURE
        if method == CLOSED_FORM_UNIFORM and not prior.is_uniform:
            raise ValueError("closed-form uniform marginal requested for a non-uniform prior")
        if method == CLOSED_FORM_GAUSSIAN and not prior.is_gaussian:
            raise ValueError("closed-form Gaussian marginal requested for a non-Gaussian prior")
        if method not in (CLOSED_FORM_UNIFORM, CLOSED_FORM_GAUSSIAN, RADIAL_QUADRATURE):
            raise ValueError(f"unknown method {method!r}")
        self.method = method
        self._memo = {}
        self._lock = threading.Lock()

    def __repr__(self):
        return f"MarginalEvaluator({self.prior.name}, p={self.p}, method={self.method})"

    # -- radial profile -------------------------------------------------
    def radial(self, t, v: float, derivs: bool = True):
        """Arrays ``(u, du, d2u)`` at radii ``t`` (derivatives zero if not requested)."""
        if not (np.isfinite(v) and v > 0):
            raise ValueError(f"v must be positive and finite, got {v!r}")
        t = round_radius(t)
        shape = t.shape
        t = t.reshape(-1)
        if self.method == CLOSED_FORM_UNIFORM:
            z = np.zeros_like(t)
            return z.reshape(shape), z.reshape(shape), z.reshape(shape)
        if self.method == CLOSED_FORM_GAUSSIAN:
            s = v + self.prior.kernel_code[2]
            u = -0.5 * self.p * (LOG_2PI + math.log(s)) - t * t / (2.0 * s)
            return u.reshape(shape), (-t / s).reshape(shape), np.full(shape, -1.0 / s)
        u, d1, d2 = self._quadrature(t, float(v), derivs)
        return u.reshape(shape), d1.reshape(shape), d2.reshape(shape)

    def _quadrature(self, t, v, derivs):
        prior = self.prior
        if prior.kernel_code is not None:
            logm, d1, d2, rel, status = kernels.radial_moments_coded(
                t, v, self.p, prior.kernel_code, rel_tol=self.rel_tol,
                max_panels=self.max_panels, want_derivs=derivs)
        else:
            logm, d1, d2, rel, status = _kernels_py.radial_moments(
                t, v, self.p, lambda x, r: prior.log_h(r), prior.support_radius,
                prior.origin_exponent, rel_tol=self.rel_tol, max_panels=self.max_panels,
                want_derivs=derivs)
        bad = np.flatnonzero(status)
        if bad.size:
            i = bad[0]
            raise QuadratureError(
                f"radial quadrature did not reach rel_tol={self.rel_tol:g} at t={t[i]:.6g}, v={v:g} "
                f"within {self.max_panels} panels",
                partial=float(logm[i]), bound=float(rel[i]))
        if not np.all(np.isfinite(logm)):
            i = int(np.flatnonzero(~np.isfinite(logm))[0])
            raise QuadratureError(f"marginal is not finite at t={t[i]:.6g}, v={v:g}",
                                  partial=float(logm[i]), bound=math.inf)
        return logm, d1, d2

    def log_m(self, t: float, v: float) -> float:
        """Memoised scalar log m(t; v)."""
        key = (float(round_radius(t)), float(v))
        with self._lock:
            hit = self._memo.get(key)
        if hit is not None:
            return hit
        val = float(self.radial(np.array([key[0]]), v, derivs=False)[0][0])
        with self._lock:
            self._memo[key] = val
        return val

    def laplacian_ratio_radial(self, t, v: float):
        """(lap sqrt m)/sqrt m at radii ``t`` from the radial derivatives."""
        t = np.abs(np.asarray(t, dtype=float))
        _, d1, d2 = self.radial(t, v)
        near = t < ORIGIN_SWITCH * math.sqrt(v)
        with np.errstate(divide="ignore", invalid="ignore"):
            lap = 0.5 * d2 + 0.5 * (self.p - 1) * d1 / t + 0.25 * d1 * d1
        # at the origin u' = 0 and u'/t -> u''
        lap = np.where(near, 0.5 * self.p * d2, lap)
        if self.method == CLOSED_FORM_UNIFORM:
            lap = np.zeros_like(lap)
        return lap


def _radius(ev: MarginalEvaluator, z):
    z = as_points(z, ev.p)
    return z, np.linalg.norm(z, axis=-1)


def _scalar(arr):
    return float(arr) if np.ndim(arr) == 0 else arr


def log_marginal(ev: MarginalEvaluator, z, v: float):
    """log m(z; v) for a point or a stack of points."""
    z, t = _radius(ev, z)
    if t.ndim == 0:
        return ev.log_m(float(t), v)
    return ev.radial(t, v, derivs=False)[0]


def grad_log_marginal(ev: MarginalEvaluator, z, v: float):
    """Gradient of log m in z; radial, and zero at the origin."""
    z, t = _radius(ev, z)
    _, d1, _ = ev.radial(t, v)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(t > 0, d1 / t, 0.0)
    return z * np.asarray(scale)[..., None]


def laplacian_sqrt_ratio(ev: MarginalEvaluator, z, v: float):
    """(Laplacian of sqrt m) / sqrt m at z."""
    z, t = _radius(ev, z)
    return _scalar(ev.laplacian_ratio_radial(t, v))
