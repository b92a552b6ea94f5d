"""Predictive density procedures and point estimators.

Bayes predictive densities are always evaluated in marginal-ratio form,

    log p(y | x) = log m(w; v_w) - log m(x; v_x) + log N(y; x, (v_x + v_y) I),

with w the precision-weighted combination of x and y. One radial
quadrature per point suffices and the uniform prior is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core_model import ModelConfig, as_points, combine_w, gaussian_logpdf, sample_isotropic
from .marginals import MarginalEvaluator, grad_log_marginal
from .montecarlo import RiskEstimate, sample_blocks, seed_sequence, summarize
from .priors import RadialPrior

__all__ = [
    "DensityEstimate",
    "PredictiveProcedure",
    "bayes_predictive_logdensity",
    "gaussian_density",
    "piecewise_density",
    "plugin_logdensity",
    "posterior_logscore_risk",
    "posterior_mean",
]


@dataclass
class DensityEstimate:
    """A predictive density g on R^p given by its log-density.

    ``support`` and ``breakpoints`` are hints for 1-D quadrature; ``bounded``
    asserts g <= C for the model it was built for.
    """

    logdensity: Callable[[np.ndarray], np.ndarray]
    p: int = 1
    support: tuple = (-math.inf, math.inf)
    breakpoints: tuple = ()
    bounded: bool = False
    label: str = ""

    def density(self, y):
        return np.exp(self.logdensity(y))


def gaussian_density(mean, v: float, p: int = 1, label: str = "") -> DensityEstimate:
    mean = as_points(mean, p)
    return DensityEstimate(lambda y: gaussian_logpdf(np.asarray(y, float).reshape(-1, p), mean, v, p),
                           p=p, bounded=False, label=label or f"N({mean.tolist()}, {v:g})")


def piecewise_density(edges, values, label: str = "") -> DensityEstimate:
    """1-D density equal to ``values[i]`` on ``[edges[i], edges[i+1])`` and 0 elsewhere."""
    edges = np.asarray(edges, dtype=float)
    values = np.asarray(values, dtype=float)
    if edges.ndim != 1 or values.shape != (edges.size - 1,):
        raise ValueError("need len(values) == len(edges) - 1")
    if np.any(np.diff(edges) <= 0) or np.any(values < 0):
        raise ValueError("edges must increase and values must be nonnegative")
    with np.errstate(divide="ignore"):
        logv = np.log(values)

    def logdensity(y):
        y = np.asarray(y, dtype=float).reshape(-1)
        idx = np.searchsorted(edges, y, side="right") - 1
        inside = (idx >= 0) & (idx < values.size)
        out = np.full(y.shape, -math.inf)
        out[inside] = logv[idx[inside]]
        return out

    return DensityEstimate(logdensity, p=1, support=(float(edges[0]), float(edges[-1])),
                           breakpoints=tuple(float(e) for e in edges), label=label)


def plugin_logdensity(x, y, model: ModelConfig, center=None):
    """log N(y; mu_hat(x), v_y I); ``center`` defaults to the MLE mu_hat(x) = x."""
    x = as_points(x, model.p)
    mean = x if center is None else as_points(center(x), model.p)
    return gaussian_logpdf(y, mean, model.v_y, model.p)


def _evaluator(prior, p, ev):
    if ev is not None:
        if ev.p != p or ev.prior is not prior:
            raise ValueError("evaluator does not match the prior/dimension")
        return ev
    return MarginalEvaluator(prior, p)


def bayes_predictive_logdensity(prior: RadialPrior, x, y, model: ModelConfig,
                                ev: Optional[MarginalEvaluator] = None):
    """log of the (generalised) Bayes predictive density at y given x."""
    ev = _evaluator(prior, model.p, ev)
    x = as_points(x, model.p)
    y = as_points(y, model.p)
    w = combine_w(x, y, model)
    tw = np.linalg.norm(w, axis=-1)
    tx = np.linalg.norm(x, axis=-1)
    lw = ev.radial(tw, model.v_w, derivs=False)[0]
    lx = ev.radial(tx, model.v_x, derivs=False)[0]
    out = lw - lx + gaussian_logpdf(y, x, model.v_x + model.v_y, model.p)
    return float(out) if np.ndim(out) == 0 else out


def posterior_mean(prior: RadialPrior, z, v: float, ev: Optional[MarginalEvaluator] = None):
    """E[mu | Z = z] = z + v grad log m(z; v)."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    ev = _evaluator(prior, z.shape[-1], ev)
    return z + v * grad_log_marginal(ev, z, v)


@dataclass
class PredictiveProcedure:
    """A rule x -> g(. | x): ``plugin-mle``, ``plugin-custom`` or ``bayes``."""

    kind: str
    prior: Optional[RadialPrior] = None
    center: Optional[Callable] = None
    label: str = ""
    _evs: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in ("plugin-mle", "plugin-custom", "bayes"):
            raise ValueError(f"unknown procedure kind {self.kind!r}")
        if self.kind == "bayes" and self.prior is None:
            raise ValueError("a Bayes rule needs a prior")
        if self.kind == "plugin-custom" and self.center is None:
            raise ValueError("a custom plug-in rule needs a center function")
        if not self.label:
            self.label = f"bayes[{self.prior.name}]" if self.kind == "bayes" else self.kind

    @classmethod
    def plugin_mle(cls):
        return cls("plugin-mle")

    @classmethod
    def plugin(cls, center, label=""):
        return cls("plugin-custom", center=center, label=label)

    @classmethod
    def bayes(cls, prior: RadialPrior):
        return cls("bayes", prior=prior)

    def evaluator(self, p: int) -> MarginalEvaluator:
        if p not in self._evs:
            self._evs[p] = MarginalEvaluator(self.prior, p)
        return self._evs[p]

    def gaussian_form(self, model: ModelConfig):
        """``(mean_fn, variance)`` when every g(. | x) is N(mean_fn(x), variance I), else None."""
        if self.kind == "plugin-mle":
            return (lambda x: x), model.v_y
        if self.kind == "plugin-custom":
            return self.center, model.v_y
        if self.prior.is_uniform:
            return (lambda x: x), model.v_x + model.v_y
        if self.prior.is_gaussian:
            tau2 = self.prior.kernel_code[2]
            s = tau2 / (tau2 + model.v_x)
            return (lambda x: s * x), s * model.v_x + model.v_y
        return None

    def logdensity(self, x, y, model: ModelConfig):
        if self.kind == "bayes":
            return bayes_predictive_logdensity(self.prior, x, y, model, self.evaluator(model.p))
        return plugin_logdensity(x, y, model, None if self.kind == "plugin-mle" else self.center)

    def estimate(self, x, model: ModelConfig) -> DensityEstimate:
        """g(. | x) as a ``DensityEstimate`` (bounded by C for the built-in kinds)."""
        x = as_points(x, model.p)
        return DensityEstimate(lambda y: self.logdensity(x, as_points(y, model.p), model),
                               p=model.p, bounded=True, label=self.label)


def posterior_logscore_risk(prior: RadialPrior, mu, model: ModelConfig, n: int, rng=None,
                            workers: int = 1) -> RiskEstimate:
    """-E log pi(mu | X) over X ~ N(mu, v_x I): the v_y -> 0 limit of the KL risk."""
    mu = as_points(mu, model.p)
    log_prior = float(prior.log_density(mu))
    if not math.isfinite(log_prior):
        raise ValueError(f"prior density vanishes at mu={mu.tolist()}")
    ev = MarginalEvaluator(prior, model.p)
    ss = seed_sequence(rng)

    def block(g, size):
        x = sample_isotropic(g, mu, model.v_x, size)
        lx = ev.radial(np.linalg.norm(x, axis=1), model.v_x, derivs=False)[0]
        return -(gaussian_logpdf(x, mu, model.v_x, model.p) + log_prior - lx)

    return summarize(sample_blocks(block, n, ss, workers), "posterior-logscore", ss, workers)
