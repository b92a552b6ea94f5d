"""Monte Carlo engines for KL and quadratic risks and the KL/quadratic bridge.

Every estimator draws one pool of standard normals per sample and rescales
it (common random numbers), so differences of near-equal expectations are
estimated from paired samples.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, Optional

import numpy as np

from .core_model import ModelConfig, as_points, combine_w, gaussian_logpdf, kl_gaussian
from .estimators import PredictiveProcedure
from .marginals import MarginalEvaluator
from .montecarlo import RiskEstimate, child, sample_blocks, seed_record, seed_sequence, summarize
from .priors import RadialPrior, make_blyth, radial_mass, sample_from_proper

__all__ = [
    "BridgeReport",
    "average_risk_gap",
    "bridge_rhs",
    "gauss_legendre",
    "kl_risk",
    "kl_risk_diff",
    "quadratic_risk",
    "stein_quadratic_diff",
    "verify_bridge",
]


def gauss_legendre(lo: float, hi: float, nodes: int):
    x, w = np.polynomial.legendre.leggauss(int(nodes))
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1.0), half * w


def _points(mu, p):
    return as_points(mu, p).reshape(p)


def kl_risk(model: ModelConfig, mu, proc: PredictiveProcedure, n: int, rng=None,
            workers: int = 1, inner: int = 1) -> RiskEstimate:
    """E_X KL(p(. | mu) || g(. | X)) over X ~ N(mu, v_x I).

    Gaussian procedures use the closed-form divergence. Otherwise the
    divergence from N(X, v_x + v_y) is closed form and the remaining ratio
    term E_Y[log m(X; v_x) - log m(W; v_w)] uses ``inner`` draws of Y per X.
    """
    p = model.p
    mu = _points(mu, p)
    ss = seed_sequence(rng)
    form = proc.gaussian_form(model)
    if form is not None:
        mean_fn, var = form

        def block(g, size):
            x = mu + math.sqrt(model.v_x) * g.standard_normal((size, p))
            return kl_gaussian(mu, model.v_y, mean_fn(x), var, p)
    else:
        ev = proc.evaluator(p)
        inner = int(inner)

        def block(g, size):
            x = mu + math.sqrt(model.v_x) * g.standard_normal((size, p))
            y = mu + math.sqrt(model.v_y) * g.standard_normal((size, inner, p))
            base = kl_gaussian(mu, model.v_y, x, model.v_x + model.v_y, p)
            lx = ev.radial(np.linalg.norm(x, axis=1), model.v_x, derivs=False)[0]
            w = combine_w(x[:, None, :], y, model)
            lw = ev.radial(np.linalg.norm(w, axis=-1), model.v_w, derivs=False)[0]
            return base + lx - lw.mean(axis=1)

    return summarize(sample_blocks(block, n, ss, workers), f"kl-risk[{proc.label}]", ss, workers)


def quadratic_risk(v: float, mu, estimator: Callable, n: int, rng=None,
                   workers: int = 1) -> RiskEstimate:
    """E ||estimator(Z) - mu||^2 over Z ~ N(mu, v I); ``estimator`` maps (n, p) -> (n, p)."""
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    p = mu.size
    ss = seed_sequence(rng)

    def block(g, size):
        z = mu + math.sqrt(v) * g.standard_normal((size, p))
        return np.sum((estimator(z) - mu) ** 2, axis=1)

    return summarize(sample_blocks(block, n, ss, workers), "quadratic-risk", ss, workers)


def kl_risk_diff(model: ModelConfig, mu, prior: RadialPrior, n: int, rng=None,
                 workers: int = 1) -> RiskEstimate:
    """R_KL(mu, uniform-Bayes) - R_KL(mu, pi-Bayes) = E log m(W; v_w) - E log m(X; v_x)."""
    p = model.p
    mu = _points(mu, p)
    ev = MarginalEvaluator(prior, p)
    ss = seed_sequence(rng)
    sw, sx = math.sqrt(model.v_w), math.sqrt(model.v_x)

    def block(g, size):
        xi = g.standard_normal((size, p))
        lw = ev.radial(np.linalg.norm(mu + sw * xi, axis=1), model.v_w, derivs=False)[0]
        lx = ev.radial(np.linalg.norm(mu + sx * xi, axis=1), model.v_x, derivs=False)[0]
        return lw - lx

    return summarize(sample_blocks(block, n, ss, workers), "kl-risk-diff", ss, workers)


def stein_quadratic_diff(v: float, mu, prior: RadialPrior, n: int, rng=None,
                         workers: int = 1, p: Optional[int] = None) -> RiskEstimate:
    """R_Q(mu, MLE) - R_Q(mu, posterior mean) = -4 v^2 E[lap sqrt m / sqrt m]."""
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    p = mu.size if p is None else p
    mu = _points(mu, p)
    ev = MarginalEvaluator(prior, p)
    ss = seed_sequence(rng)
    sv = math.sqrt(v)

    def block(g, size):
        z = mu + sv * g.standard_normal((size, p))
        return -4.0 * v * v * ev.laplacian_ratio_radial(np.linalg.norm(z, axis=1), v)

    return summarize(sample_blocks(block, n, ss, workers), "stein-quadratic-diff", ss, workers)


@dataclass(frozen=True)
class BridgeRHS:
    """v-quadrature of the quadratic risk differences with its error bound."""

    value: float
    std_error: float
    refinement: float
    nodes: int
    n: int
    seed: Optional[dict] = None

    @property
    def error_bound(self) -> float:
        return self.std_error + self.refinement

    def to_dict(self) -> dict:
        out = asdict(self)
        out["error_bound"] = self.error_bound
        return out


REFINE_SAMPLES = 1 << 12


def bridge_rhs(model: ModelConfig, mu, prior: RadialPrior, n_per_node: int, nodes: int = 16,
               rng=None, workers: int = 1) -> BridgeRHS:
    """(1/2) int_{v_w}^{v_x} v^-2 [R_Q(MLE) - R_Q(pi)] dv by Gauss-Legendre.

    The same standard normals are reused at every node, so each sample
    yields a full quadrature and the standard error accounts for the
    correlation between nodes. The refinement term is |Q(nodes) - Q(2 nodes)|
    on the first ``REFINE_SAMPLES`` draws (same pool, so the difference is
    quadrature error rather than sampling noise).
    """
    if nodes < 4:
        raise ValueError("need at least 4 quadrature nodes")
    p = model.p
    mu = _points(mu, p)
    ev = MarginalEvaluator(prior, p)
    ss = seed_sequence(rng)

    def rule(k):
        vs, ws = gauss_legendre(model.v_w, model.v_x, k)

        def block(g, size):
            xi = g.standard_normal((size, p))
            acc = np.zeros(size)
            for v, w in zip(vs, ws):
                t = np.linalg.norm(mu + math.sqrt(v) * xi, axis=1)
                # (1/2) v^-2 (-4 v^2 lap) = -2 lap
                acc += -2.0 * w * ev.laplacian_ratio_radial(t, v)
            return acc
        return block

    main = sample_blocks(rule(nodes), n_per_node, ss, workers)
    m = min(int(n_per_node), REFINE_SAMPLES)
    coarse = main[:m] if m <= main.size else sample_blocks(rule(nodes), m, ss, workers)
    fine = sample_blocks(rule(2 * nodes), m, ss, workers)
    est = summarize(main, "bridge-rhs", ss, workers)
    refinement = float(abs(np.mean(fine) - np.mean(coarse)))
    return BridgeRHS(value=est.value, std_error=est.std_error, refinement=refinement,
                     nodes=int(nodes), n=est.n, seed=seed_record(ss))


@dataclass(frozen=True)
class BridgeReport:
    lhs: RiskEstimate
    rhs: BridgeRHS
    discrepancy: float
    passed: bool
    diagnosis: str = ""

    def to_dict(self) -> dict:
        return {"lhs": self.lhs.to_dict(), "rhs": self.rhs.to_dict(),
                "discrepancy": self.discrepancy, "passed": self.passed, "diagnosis": self.diagnosis}


def verify_bridge(model: ModelConfig, mu, prior: RadialPrior, budget: int, rng=None,
                  workers: int = 1, nodes: int = 16) -> BridgeReport:
    """KL risk difference versus the v-integral of quadratic risk differences.

    Passes when |lhs - rhs| <= 3 (lhs.std_error + rhs.error_bound).
    """
    ss = seed_sequence(rng)
    try:
        lhs = kl_risk_diff(model, mu, prior, budget, child(ss, 0), workers)
        rhs = bridge_rhs(model, mu, prior, budget, nodes, child(ss, 1), workers)
    except (ArithmeticError, RuntimeError, ValueError) as exc:
        nan = RiskEstimate(math.nan, math.nan, 0, seed_record(ss), "kl-risk-diff", workers)
        return BridgeReport(nan, BridgeRHS(math.nan, math.nan, math.nan, nodes, 0),
                            math.nan, False, f"{type(exc).__name__}: {exc}")
    disc = abs(lhs.value - rhs.value)
    tol = 3.0 * (lhs.std_error + rhs.error_bound)
    ok = bool(disc <= tol)
    note = "" if ok else f"discrepancy {disc:.3g} exceeds 3 combined errors {tol:.3g}"
    return BridgeReport(lhs, rhs, disc, ok, note)


def average_risk_gap(model: ModelConfig, base_prior: RadialPrior, blyth_n: int, budget: int,
                     rng=None, workers: int = 1, nodes: int = 16,
                     compare: Optional[RadialPrior] = None) -> RiskEstimate:
    """Blyth-weighted average KL risk gap between the base and truncated Bayes rules.

    Evaluates (1/2) int v^-2 [B_Q(pi_n, base) - B_Q(pi_n, pi_n)] dv where B_Q
    averages quadratic risk against the (unnormalised) Blyth prior pi_n. The
    outer draw is mu from the normalised pi_n; the result is rescaled by the
    mass of pi_n. ``compare`` replaces the base estimator (default: the base
    prior's posterior mean).
    """
    p = model.p
    if p > 2:
        raise ValueError("the Blyth experiment is limited to p <= 2")
    blyth = make_blyth(base_prior, blyth_n, p)
    if not blyth.proper:
        raise ValueError("the Blyth prior is not proper in this dimension")
    first = compare if compare is not None else base_prior
    ev_a = MarginalEvaluator(first, p)
    ev_b = MarginalEvaluator(blyth, p)
    mass = radial_mass(blyth, p)
    vs, ws = gauss_legendre(model.v_w, model.v_x, nodes)
    ss = seed_sequence(rng)

    def post_mean(ev, z, v):
        t = np.linalg.norm(z, axis=1)
        d1 = ev.radial(t, v)[1]
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(t > 0, d1 / t, 0.0)
        return z + v * scale[:, None] * z

    def block(g, size):
        mu = sample_from_proper(blyth, p, g, size)
        xi = g.standard_normal((size, p))
        acc = np.zeros(size)
        for v, w in zip(vs, ws):
            z = mu + math.sqrt(v) * xi
            la = np.sum((post_mean(ev_a, z, v) - mu) ** 2, axis=1)
            lb = np.sum((post_mean(ev_b, z, v) - mu) ** 2, axis=1)
            acc += 0.5 * w / (v * v) * (la - lb)
        return mass * acc

    est = summarize(sample_blocks(block, budget, ss, workers), "average-risk-gap", ss, workers,
                    blyth_n=int(blyth_n), prior_mass=mass)
    return est
