"""Spherically symmetric priors pi(mu) = h(||mu||).

A prior is described by its radial log-profile ``log_h`` and derivative
``dlog_h`` plus the tail metadata the admissibility checks reason with:
``h(r) ~ r**-tail_exponent`` at infinity and ``h(r) ~ r**-origin_exponent``
at zero, and ``|dlog_h(r)| ~ r**grad_power`` at either end (``None`` when the
gradient vanishes identically).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from . import kernels

__all__ = [
    "PriorFamilySpec",
    "RadialPrior",
    "blyth_j",
    "build_prior",
    "make_blyth",
    "make_gaussian_prior",
    "make_harmonic",
    "make_power",
    "make_uniform",
    "radial_mass",
    "sample_from_proper",
]


@dataclass(frozen=True)
class PriorFamilySpec:
    """Declarative prior description (what the config grammar parses into).

    ``kind`` is one of ``uniform``, ``power`` (``b``), ``harmonic``,
    ``gaussian`` (``tau2``) or ``blyth`` (``base`` and ``n``).
    """

    kind: str
    b: Optional[float] = None
    tau2: Optional[float] = None
    base: Optional["PriorFamilySpec"] = None
    n: Optional[int] = None

    def label(self) -> str:
        if self.kind == "power":
            return f"power(b={self.b:g})"
        if self.kind == "gaussian":
            return f"gaussian(tau2={self.tau2:g})"
        if self.kind == "blyth":
            return f"blyth({self.base.label()}, n={self.n})"
        return self.kind

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.b is not None:
            out["b"] = self.b
        if self.tau2 is not None:
            out["tau2"] = self.tau2
        if self.base is not None:
            out["base"] = self.base.to_dict()
        if self.n is not None:
            out["n"] = self.n
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "PriorFamilySpec":
        base = cls.from_dict(d["base"]) if d.get("base") else None
        return cls(kind=d["kind"], b=d.get("b"), tau2=d.get("tau2"), base=base, n=d.get("n"))


@dataclass(frozen=True)
class RadialPrior:
    log_h: Callable[[np.ndarray], np.ndarray]
    dlog_h: Callable[[np.ndarray], np.ndarray]
    tail_exponent: float
    origin_exponent: float
    proper: bool
    name: str = "custom"
    kernel_code: Optional[tuple] = None
    support_radius: float = math.inf
    breaks: tuple = ()
    grad_tail_power: Optional[float] = None
    grad_origin_power: Optional[float] = None
    spec: Optional[PriorFamilySpec] = field(default=None, compare=False)

    def h(self, r):
        return np.exp(self.log_h(r))

    @property
    def is_uniform(self) -> bool:
        return self.kernel_code is not None and self.kernel_code[0] == kernels.UNIFORM \
            and not math.isfinite(self.support_radius)

    @property
    def is_gaussian(self) -> bool:
        return self.kernel_code is not None and self.kernel_code[0] == kernels.GAUSSIAN \
            and not math.isfinite(self.support_radius)

    def log_density(self, mu):
        """log pi(mu) for points ``mu`` (last axis is the dimension)."""
        mu = np.asarray(mu, dtype=float)
        return self.log_h(np.linalg.norm(np.atleast_1d(mu), axis=-1))


def _arr(r):
    return np.asarray(r, dtype=float)


def make_uniform() -> RadialPrior:
    """pi(mu) = 1."""
    return RadialPrior(
        log_h=lambda r: np.zeros_like(_arr(r)),
        dlog_h=lambda r: np.zeros_like(_arr(r)),
        tail_exponent=0.0,
        origin_exponent=0.0,
        proper=False,
        name="uniform",
        kernel_code=(kernels.UNIFORM, 0.0, 0.0, math.inf),
        spec=PriorFamilySpec("uniform"),
    )


def make_power(b: float, p: int) -> RadialPrior:
    """pi(mu) = ||mu||**-b; ``b = p - 2`` is the harmonic prior."""
    b = float(b)
    if b >= p:
        raise ValueError(f"power prior needs b < p to be locally finite (b={b}, p={p})")
    if b == 0.0:
        base = make_uniform()
        return RadialPrior(**{**base.__dict__, "name": "power(b=0)", "spec": PriorFamilySpec("power", b=0.0)})

    def log_h(r):
        r = _arr(r)
        with np.errstate(divide="ignore"):
            return -b * np.log(r)

    def dlog_h(r):
        r = _arr(r)
        with np.errstate(divide="ignore"):
            return -b / r

    name = "harmonic" if b == p - 2 else f"power(b={b:g})"
    return RadialPrior(
        log_h=log_h,
        dlog_h=dlog_h,
        tail_exponent=b,
        origin_exponent=b,
        proper=False,
        name=name,
        kernel_code=(kernels.POWER, b, 0.0, math.inf),
        grad_tail_power=-1.0,
        grad_origin_power=-1.0,
        spec=PriorFamilySpec("power", b=b),
    )


def make_harmonic(p: int) -> RadialPrior:
    if p < 3:
        raise ValueError("the harmonic prior needs p >= 3")
    prior = make_power(p - 2, p)
    return RadialPrior(**{**prior.__dict__, "spec": PriorFamilySpec("harmonic")})


def make_gaussian_prior(tau2: float, p: int) -> RadialPrior:
    """N_p(0, tau2 I) density, the conjugate (proper) oracle prior."""
    tau2 = float(tau2)
    if not (tau2 > 0 and math.isfinite(tau2)):
        raise ValueError(f"tau2 must be positive, got {tau2!r}")
    const = -0.5 * p * math.log(2.0 * math.pi * tau2)
    return RadialPrior(
        log_h=lambda r: const - _arr(r) ** 2 / (2.0 * tau2),
        dlog_h=lambda r: -_arr(r) / tau2,
        tail_exponent=math.inf,
        origin_exponent=0.0,
        proper=True,
        name=f"gaussian(tau2={tau2:g})",
        kernel_code=(kernels.GAUSSIAN, 0.0, tau2, math.inf),
        grad_tail_power=1.0,
        grad_origin_power=1.0,
        spec=PriorFamilySpec("gaussian", tau2=tau2),
    )


def blyth_j(mu_norm, n: int):
    """Blyth cut-off: 1 inside the unit ball, 1 - log r / log n out to n, 0 beyond."""
    if int(n) != n or n < 2:
        raise ValueError(f"n must be an integer >= 2, got {n!r}")
    r = _arr(mu_norm)
    with np.errstate(divide="ignore"):
        out = np.clip(1.0 - np.log(np.maximum(r, 1.0)) / math.log(n), 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def make_blyth(base: RadialPrior, n: int, p: int) -> RadialPrior:
    """pi_n = j_n**2 * pi: the compactly supported Blyth modification of ``base``."""
    if int(n) != n or n < 2:
        raise ValueError(f"n must be an integer >= 2, got {n!r}")
    n = int(n)
    log_n = math.log(n)
    if math.isfinite(base.support_radius):
        raise ValueError("base prior is already truncated")

    def log_h(r):
        r = _arr(r)
        j = blyth_j(r, n)
        with np.errstate(divide="ignore"):
            return np.where(j > 0, 2.0 * np.log(np.where(j > 0, j, 1.0)), -np.inf) + base.log_h(r)

    def dlog_h(r):
        # left limits at the breaks r = 1 and r = n
        r = _arr(r)
        with np.errstate(divide="ignore", invalid="ignore"):
            cut = np.where(r > 1.0, -2.0 / (r * (log_n - np.log(r))), 0.0)
            cut = np.where(r >= n, -np.inf, cut)
        return cut + base.dlog_h(r)

    code = None
    if base.kernel_code is not None:
        code = base.kernel_code[:3] + (float(n),)
    return RadialPrior(
        log_h=log_h,
        dlog_h=dlog_h,
        tail_exponent=math.inf,
        origin_exponent=base.origin_exponent,
        proper=base.origin_exponent < p,
        name=f"blyth({base.name}, n={n})",
        kernel_code=code,
        support_radius=float(n),
        breaks=(1.0, float(n)),
        grad_tail_power=base.grad_tail_power,
        grad_origin_power=base.grad_origin_power,
        spec=PriorFamilySpec("blyth", base=base.spec, n=n),
    )


def build_prior(spec: PriorFamilySpec, p: int) -> RadialPrior:
    kind = spec.kind
    if kind == "uniform":
        return make_uniform()
    if kind == "harmonic":
        return make_harmonic(p)
    if kind == "power":
        if spec.b is None:
            raise ValueError("power prior needs b")
        return make_power(spec.b, p)
    if kind == "gaussian":
        if spec.tau2 is None:
            raise ValueError("gaussian prior needs tau2")
        return make_gaussian_prior(spec.tau2, p)
    if kind == "blyth":
        if spec.base is None or spec.n is None:
            raise ValueError("blyth prior needs base and n")
        return make_blyth(build_prior(spec.base, p), spec.n, p)
    raise ValueError(f"unknown prior kind {kind!r}")


def _log_radial(prior, p, r):
    return prior.log_h(r) + (p - 1) * np.log(r)


def radial_mass(prior: RadialPrior, p: int) -> float:
    """Total prior mass  S_p * int_0^inf h(r) r**(p-1) dr  (inf if improper)."""
    if not prior.proper:
        return math.inf
    top = _effective_radius(prior, p)
    q = p - prior.origin_exponent

    # substitute u = r**q so the origin singularity disappears
    def f(u):
        r = u ** (1.0 / q)
        return math.exp(float(prior.log_h(r)) + prior.origin_exponent * math.log(r)) / q if r > 0 else (
            math.exp(float(prior.log_h(1e-300))) / q if prior.origin_exponent == 0 else 0.0)

    pts = [b ** q for b in prior.breaks if 0 < b < top]
    val, _ = integrate.quad(f, 0.0, top ** q, points=pts or None, limit=500, epsabs=0, epsrel=1e-12)
    return math.exp(kernels.log_sphere_area(p)) * val


def _effective_radius(prior: RadialPrior, p: int) -> float:
    if math.isfinite(prior.support_radius):
        return prior.support_radius
    r, peak = 1.0, -math.inf
    while r < 1e8:
        val = float(_log_radial(prior, p, r)) + math.log(r)
        peak = max(peak, val)
        if val < peak - 60.0:
            return r
        r *= 1.5
    raise ValueError("could not bracket the prior's radial mass")


def sample_from_proper(prior: RadialPrior, p: int, rng, n: int, cells: int = 65536) -> np.ndarray:
    """``n`` i.i.d. draws from the normalised prior, shape (n, p).

    Radius by inverse CDF on a table in ``u = r**q`` (``q = p - origin``),
    direction uniform on the sphere.
    """
    if not prior.proper:
        raise ValueError(f"{prior.name} is improper; cannot sample from it")
    if int(n) != n or n < 1:
        raise ValueError("n must be a positive integer")
    q = p - prior.origin_exponent
    top = _effective_radius(prior, p)
    u_edges = np.linspace(0.0, top ** q, cells + 1)
    gx, gw = np.polynomial.legendre.leggauss(8)
    mid = 0.5 * (u_edges[:-1] + u_edges[1:])
    half = 0.5 * (u_edges[1] - u_edges[0])
    u = mid[:, None] + half * gx[None, :]
    r = u ** (1.0 / q)
    with np.errstate(divide="ignore"):
        logf = prior.log_h(r) + prior.origin_exponent * np.log(r)
    f = np.exp(logf - np.max(logf[np.isfinite(logf)]))
    mass = half * (f * gw).sum(axis=1)
    cdf = np.concatenate([[0.0], np.cumsum(mass)])
    if not cdf[-1] > 0:
        raise ValueError("prior has zero normaliser on its tabulated support")
    cdf /= cdf[-1]
    n = int(n)
    draws = np.interp(rng.random(n), cdf, u_edges)
    radius = draws ** (1.0 / q)
    direction = rng.standard_normal((n, p))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    return radius[:, None] * direction
