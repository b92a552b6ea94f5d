"""Pure numpy implementation of the radial marginal kernels.

This is the reference for ``_kernels.pyx`` and the fallback when the compiled
module is unavailable. Both follow the same algorithm node for node:

* the spherical average of ``exp(s cos theta)`` over the unit sphere in R^p,
  ``A_p(s) = 0F1(; p/2; s^2/4)``, is returned scaled as ``log A_p(s) - s``.
  Power series below ``SERIES_SWITCH``, Hankel asymptotic expansion of the
  modified Bessel function above it;
* the marginal ``m(t; v)`` at radius ``t`` is a one-dimensional integral over
  the prior radius, taken in ``x = log r`` with Gauss-Kronrod (10, 21) panels.
  Panel edges are fixed by ``panel_edges``; every panel is split into
  ``2**level`` pieces and the level is raised until the Kronrod-Gauss
  discrepancy is below ``rel_tol`` of the integral.

Prior codes are ``(kind, b, tau2, cap)`` with kind 0 = uniform,
1 = power ``r**-b``, 2 = Gaussian with variance ``tau2``; a finite ``cap``
multiplies the prior by the squared Blyth cut-off ``(1 - log r / log cap)**2``
on ``1 <= r <= cap`` and zero beyond.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln

SERIES_SWITCH = 20.0
WINDOW = 12.0  # half-width of the Gaussian window, in units of sqrt(v)
FLOOR_MASS = 1e-16

UNIFORM, POWER, GAUSSIAN = 0, 1, 2

_XK = np.array([
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
    0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
    0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
    0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
    0.0,
    -0.148874338981631210884826001129720, -0.294392862701460198131126603103866,
    -0.433395394129247190799265943165784, -0.562757134668604683339000099272694,
    -0.679409568299024406234327365114874, -0.780817726586416897063717578345042,
    -0.865063366688984510732096688423493, -0.930157491355708226001207180059508,
    -0.973906528517171720077964012084452, -0.995657163025808080735527280689003,
])
_WK = np.array([
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
    0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077958109831074, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
    0.147739104901338491374841515972068, 0.142775938577060080797094273138717,
    0.134709217311473325928054001771707, 0.123491976262065851077958109831074,
    0.109387158802297641899210590325805, 0.093125454583697605535065465083366,
    0.075039674810919952767043140916190, 0.054755896574351996031381300244580,
    0.032558162307964727478818972459390, 0.011694638867371874278064396062192,
])
# Gauss 10-point weights live on the odd Kronrod nodes
_WG = np.zeros(21)
_WG[1::2] = [
    0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
    0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
    0.295524224714752870173892994651338, 0.295524224714752870173892994651338,
    0.269266719309996355091226921569469, 0.219086362515982043995534934228163,
    0.149451349150580593145776339657697, 0.066671344308688137593568809893332,
]

NODES = _XK
KRONROD_WEIGHTS = _WK
GAUSS_WEIGHTS = _WG


def log_sphere_area(p: int) -> float:
    """log of the surface area of the unit sphere in R^p."""
    return math.log(2.0) + 0.5 * p * math.log(math.pi) - float(gammaln(0.5 * p))


def _series_pair(s, p):
    b = 0.5 * p
    x = 0.25 * s * s
    t1 = np.ones_like(s)
    t2 = np.ones_like(s)
    s1 = np.ones_like(s)
    s2 = np.ones_like(s)
    for k in range(1, 200):
        t1 = t1 * x / ((b + k - 1.0) * k)
        t2 = t2 * x / ((b + k) * k)
        s1 = s1 + t1
        s2 = s2 + t2
        if np.all(t1 <= 1e-17 * s1):
            break
    return np.log(s1) - s, np.log(s2) - s


def _asymptotic_one(s, p):
    b = 0.5 * p
    nu = b - 1.0
    mu4 = 4.0 * nu * nu
    term = np.ones_like(s)
    total = np.ones_like(s)
    active = np.ones(s.shape, dtype=bool)
    for k in range(1, 60):
        nxt = -term * (mu4 - (2.0 * k - 1.0) ** 2) / (8.0 * k * s)
        active &= np.abs(nxt) < np.abs(term)
        term = np.where(active, nxt, 0.0)
        total = total + term
        active &= np.abs(term) > 1e-17 * np.abs(total)
        if not active.any():
            break
    return (float(gammaln(b)) + (1.0 - b) * np.log(0.5 * s)
            - 0.5 * np.log(2.0 * math.pi * s) + np.log(total))


def angular_pair_scaled(s, p: int):
    """``(log A_p(s) - s, log A_{p+2}(s) - s)`` for ``s >= 0``."""
    s = np.asarray(s, dtype=float)
    flat = s.reshape(-1)
    la1 = np.empty_like(flat)
    la2 = np.empty_like(flat)
    small = flat <= SERIES_SWITCH
    if small.any():
        la1[small], la2[small] = _series_pair(flat[small], p)
    big = ~small
    if big.any():
        la1[big] = _asymptotic_one(flat[big], p)
        la2[big] = _asymptotic_one(flat[big], p + 2)
    return la1.reshape(s.shape), la2.reshape(s.shape)


def log_angular_scaled(s, p: int):
    """``log A_p(s) - s`` where A_p is the spherical average of exp(s cos)."""
    return angular_pair_scaled(s, p)[0]


def coded_log_h(code, p: int):
    """Vectorised ``log h(r)`` (as a function of ``x = log r``) for a code."""
    kind, b, tau2, cap = code
    log_cap = math.log(cap) if math.isfinite(cap) else math.inf
    gauss_const = -0.5 * p * math.log(2.0 * math.pi * tau2) if kind == GAUSSIAN else 0.0

    def log_h(x, r):
        if kind == POWER:
            out = -b * x
        elif kind == GAUSSIAN:
            out = gauss_const - r * r / (2.0 * tau2)
        else:
            out = np.zeros_like(x)
        if math.isfinite(log_cap):
            j = np.where(x > 0.0, 1.0 - x / log_cap, 1.0)
            with np.errstate(divide="ignore"):
                out = out + np.where(j > 0.0, 2.0 * np.log(np.maximum(j, 0.0)), -np.inf)
        return out

    return log_h


def origin_floor(p: int, origin_exponent: float) -> float:
    gap = p - origin_exponent
    return max(FLOOR_MASS ** (1.0 / gap), 1e-300)


def panel_edges(t, v, cap, floor, center, scale):
    """Sorted radial panel edges, shape (n, 9); duplicates mark empty panels.

    ``center``/``scale`` locate the bulk of the radial posterior (its mode and
    a width no smaller than its spread).
    """
    t = np.asarray(t, dtype=float)
    c = np.minimum(center, cap)
    sc = np.broadcast_to(np.asarray(scale, dtype=float), t.shape)
    hi = np.minimum(center + WINDOW * sc, cap)
    lo = np.maximum(c - WINDOW * sc, floor)
    cand = np.stack([
        c - 4.0 * sc, c - sc, c + sc, c + 4.0 * sc,
        np.full_like(t, 1.0 if math.isfinite(cap) else -1.0),
        np.full_like(t, cap), 1e-2 * sc,
    ], axis=1)
    inside = (cand > lo[:, None]) & (cand < hi[:, None])
    cand = np.where(inside, cand, hi[:, None])
    edges = np.concatenate([lo[:, None], cand, hi[:, None]], axis=1)
    return np.sort(edges, axis=1)


def coded_center(t, v, code):
    """Posterior-bulk location and width for a coded prior."""
    kind, _b, tau2, _cap = code
    if kind == GAUSSIAN:
        shrink = tau2 / (tau2 + v)
        return t * shrink, math.sqrt(v * shrink)
    return t, math.sqrt(v)


def scan_center(t, v, p, log_h, cap, floor, npts=129, stages=3):
    """Grid search for the radial posterior mode of a generic prior.

    Each stage re-grids two spacings either side of the previous maximum.
    """
    tt = t[:, None]
    top = np.log(np.minimum(t + WINDOW * math.sqrt(v) + 1.0, cap))
    lo = np.full_like(t, math.log(floor))
    hi = top
    u = np.linspace(0.0, 1.0, npts)
    rows = np.arange(t.size)
    for _ in range(stages):
        x = lo[:, None] + (hi - lo)[:, None] * u[None, :]
        x = np.minimum(x, top[:, None] - 1e-12)
        r = np.exp(x)
        li = log_h(x, r) + p * x - (tt - r) ** 2 / (2.0 * v) + log_angular_scaled(r * tt / v, p)
        best = np.argmax(li, axis=1)
        xb = x[rows, best]
        step = (hi - lo) / (npts - 1)
        lo = np.maximum(xb - 2.0 * step, math.log(floor))
        hi = np.minimum(xb + 2.0 * step, top)
    return np.exp(xb), math.sqrt(v)


def _level_sums(t, v, p, log_h, xa, xb, level, want):
    """Kronrod/Gauss sums and moments on ``2**level`` splits of each panel."""
    m, npan = xa.shape
    nsub = 1 << level
    width = (xb - xa) / nsub
    live = width > 0.0
    j = np.arange(nsub)
    starts = xa[:, :, None] + width[:, :, None] * j
    half = 0.5 * width[:, :, None, None]
    x = starts[..., None] + half + half * NODES
    r = np.exp(x)
    tt = t[:, None, None, None]
    s = r * tt / v
    if want:
        la, la2 = angular_pair_scaled(s, p)
    else:
        la = log_angular_scaled(s, p)
    li = log_h(x, r) + p * x - (tt - r) ** 2 / (2.0 * v) + la
    li = np.where(live[:, :, None, None], li, -np.inf)
    shift = np.max(li, axis=(1, 2, 3))
    f = np.exp(li - shift[:, None, None, None])
    hw = np.where(live[:, :, None, None], half, 0.0)
    kron = np.sum(hw * f * KRONROD_WEIGHTS, axis=-1)
    gauss = np.sum(hw * f * GAUSS_WEIGHTS, axis=-1)
    total = kron.sum(axis=(1, 2))
    err = np.abs(kron - gauss).sum(axis=(1, 2))
    d1 = d2 = None
    if want:
        q = np.exp(la2 - la)
        ratio = s * q / p
        a = -tt / v + (r / v) * ratio
        da = -1.0 / v + (r / v) ** 2 * (1.0 - (p - 1.0) / p * q - ratio * ratio)
        wk = hw * f * KRONROD_WEIGHTS
        m1 = np.sum(wk * a, axis=(1, 2, 3))
        m2 = np.sum(wk * (da + a * a), axis=(1, 2, 3))
        d1 = m1 / total
        d2 = m2 / total - d1 * d1
    return shift, total, err, d1, d2


def radial_moments(t, v, p, log_h, cap, origin_exponent, rel_tol=1e-7,
                   max_panels=4096, want_derivs=True, chunk=2048, center=None):
    """log m(t; v) and its first two radial derivatives.

    Returns ``(logm, d1, d2, rel_err, status)``; ``status`` is 0 when the
    tolerance was met and 1 when ``max_panels`` was exhausted (values are
    then the partial estimate). ``center(t)`` returns the posterior-bulk
    location and width; by default it is found by a grid scan.
    """
    t = np.ascontiguousarray(np.abs(np.asarray(t, dtype=float)).reshape(-1))
    n = t.size
    logm = np.empty(n)
    d1 = np.zeros(n)
    d2 = np.zeros(n)
    rel = np.empty(n)
    status = np.zeros(n, dtype=np.int64)
    log_k = -0.5 * p * math.log(2.0 * math.pi * v) + log_sphere_area(p)
    floor = origin_floor(p, origin_exponent)
    for start in range(0, n, chunk):
        idx = np.arange(start, min(start + chunk, n))
        tc = t[idx]
        if center is None:
            c, sc = scan_center(tc, v, p, log_h, cap, floor)
        else:
            c, sc = center(tc)
        edges = np.log(panel_edges(tc, v, cap, floor, c, sc))
        xa, xb = edges[:, :-1], edges[:, 1:]
        npan = np.count_nonzero(xb > xa, axis=1)
        level = 0
        pending = np.arange(idx.size)
        while pending.size:
            rows = idx[pending]
            shift, total, err, g1, g2 = _level_sums(
                t[rows], v, p, log_h, xa[pending], xb[pending], level, want_derivs)
            logm[rows] = log_k + shift + np.log(total)
            rel[rows] = err / total
            if want_derivs:
                d1[rows] = g1
                d2[rows] = g2
            done = rel[rows] <= rel_tol
            capped = npan[pending] * (1 << (level + 1)) > max_panels
            status[rows[~done & capped]] = 1
            pending = pending[~done & ~capped]
            level += 1
    return logm, d1, d2, rel, status


def radial_moments_coded(t, v, p, code, rel_tol=1e-7, max_panels=4096, want_derivs=True):
    kind, b, _tau2, cap = code
    origin = b if kind == POWER else 0.0
    return radial_moments(t, v, p, coded_log_h(code, p), cap, origin,
                          rel_tol=rel_tol, max_panels=max_panels, want_derivs=want_derivs,
                          center=lambda tc: coded_center(tc, v, code))
