# cython: language_level=3
"""Compiled radial marginal kernels.

Same algorithm as ``_kernels_py`` (which documents it); this module only
handles coded priors and runs the per-radius loop without the GIL.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, sqrt, fabs, lgamma, INFINITY, M_PI
from libc.stdlib cimport malloc, free

from ._kernels_py import (
    NODES, KRONROD_WEIGHTS, GAUSS_WEIGHTS, SERIES_SWITCH, WINDOW, FLOOR_MASS,
    UNIFORM, POWER, GAUSSIAN, log_sphere_area, origin_floor,
)

cnp.import_array()

cdef double XK[21]
cdef double WK[21]
cdef double WG[21]
for _i in range(21):
    XK[_i] = NODES[_i]
    WK[_i] = KRONROD_WEIGHTS[_i]
    WG[_i] = GAUSS_WEIGHTS[_i]

cdef double C_SWITCH = SERIES_SWITCH
cdef double C_WINDOW = WINDOW
cdef int C_POWER = POWER
cdef int C_GAUSSIAN = GAUSSIAN


DEF NSER = 200
DEF NASY = 60


cdef struct Coef:
    int p
    double rec1[NSER]   # 1 / ((b + k - 1) k)
    double rec2[NSER]   # 1 / ((b + k) k)
    double asy1[NASY]   # -(4 nu^2 - (2k - 1)^2) / (8k) for nu = p/2 - 1
    double asy2[NASY]   # same for p + 2
    double lead1        # lgamma(b) for the Hankel prefactor
    double lead2


cdef void make_coef(Coef* c, int p) noexcept nogil:
    cdef double b = 0.5 * p
    cdef double nu1 = b - 1.0, nu2 = b
    cdef int k
    c.p = p
    c.rec1[0] = 0.0
    c.rec2[0] = 0.0
    for k in range(1, NSER):
        c.rec1[k] = 1.0 / ((b + k - 1.0) * k)
        c.rec2[k] = 1.0 / ((b + k) * k)
    c.asy1[0] = 0.0
    c.asy2[0] = 0.0
    for k in range(1, NASY):
        c.asy1[k] = -(4.0 * nu1 * nu1 - (2.0 * k - 1.0) * (2.0 * k - 1.0)) / (8.0 * k)
        c.asy2[k] = -(4.0 * nu2 * nu2 - (2.0 * k - 1.0) * (2.0 * k - 1.0)) / (8.0 * k)
    c.lead1 = lgamma(b)
    c.lead2 = lgamma(b + 1.0)


cdef inline void series_pair(double s, const Coef* c, double* la1, double* la2) noexcept nogil:
    cdef double x = 0.25 * s * s
    cdef double t1 = 1.0, t2 = 1.0, s1 = 1.0, s2 = 1.0
    cdef int k
    for k in range(1, NSER):
        t1 = t1 * x * c.rec1[k]
        t2 = t2 * x * c.rec2[k]
        s1 += t1
        s2 += t2
        if t1 <= 1e-17 * s1:
            break
    la1[0] = log(s1) - s
    la2[0] = log(s2) - s


cdef inline double asymptotic_sum(double inv_s, const double* coef) noexcept nogil:
    cdef double term = 1.0, total = 1.0, nxt
    cdef int k
    for k in range(1, NASY):
        nxt = term * coef[k] * inv_s
        if not (fabs(nxt) < fabs(term)):
            break
        term = nxt
        total += term
        if not (fabs(term) > 1e-17 * fabs(total)):
            break
    return total


cdef inline void angular_pair(double s, const Coef* c, double* la1, double* la2) noexcept nogil:
    cdef double inv_s, common
    cdef double b = 0.5 * c.p
    if s <= C_SWITCH:
        series_pair(s, c, la1, la2)
    else:
        inv_s = 1.0 / s
        common = log(0.5 * s)
        la1[0] = (c.lead1 + (1.0 - b) * common - 0.5 * log(2.0 * M_PI * s)
                  + log(asymptotic_sum(inv_s, c.asy1)))
        la2[0] = (c.lead2 - b * common - 0.5 * log(2.0 * M_PI * s)
                  + log(asymptotic_sum(inv_s, c.asy2)))


cdef inline double angular_one(double s, const Coef* c) noexcept nogil:
    cdef double x, t1 = 1.0, s1 = 1.0
    cdef double b = 0.5 * c.p
    cdef int k
    if s <= C_SWITCH:
        x = 0.25 * s * s
        for k in range(1, NSER):
            t1 = t1 * x * c.rec1[k]
            s1 += t1
            if t1 <= 1e-17 * s1:
                break
        return log(s1) - s
    return (c.lead1 + (1.0 - b) * log(0.5 * s) - 0.5 * log(2.0 * M_PI * s)
            + log(asymptotic_sum(1.0 / s, c.asy1)))


def angular_pair_scaled(s, int p):
    """``(log A_p(s) - s, log A_{p+2}(s) - s)`` for ``s >= 0``."""
    arr = np.ascontiguousarray(np.asarray(s, dtype=np.float64))
    cdef double[::1] flat = arr.reshape(-1)
    cdef Py_ssize_t n = flat.shape[0], i
    cdef Coef coef
    make_coef(&coef, p)
    out1 = np.empty(n)
    out2 = np.empty(n)
    cdef double[::1] o1 = out1
    cdef double[::1] o2 = out2
    with nogil:
        for i in range(n):
            angular_pair(flat[i], &coef, &o1[i], &o2[i])
    return out1.reshape(arr.shape), out2.reshape(arr.shape)


def log_angular_scaled(s, int p):
    """``log A_p(s) - s`` where A_p is the spherical average of exp(s cos)."""
    return angular_pair_scaled(s, p)[0]


cdef inline double coded_log_h(double x, double r, int kind, double b, double tau2,
                               double gauss_const, double log_cap) noexcept nogil:
    cdef double out = 0.0, j
    if kind == C_POWER:
        out = -b * x
    elif kind == C_GAUSSIAN:
        out = gauss_const - r * r / (2.0 * tau2)
    if log_cap < INFINITY and x > 0.0:
        j = 1.0 - x / log_cap
        if j > 0.0:
            out += 2.0 * log(j)
        else:
            out = -INFINITY
    return out


cdef void sort_small(double* a, int n) noexcept nogil:
    cdef int i, j
    cdef double key
    for i in range(1, n):
        key = a[i]
        j = i - 1
        while j >= 0 and a[j] > key:
            a[j + 1] = a[j]
            j -= 1
        a[j + 1] = key


cdef int one_radius(double t, double v, int p, int kind, double b, double tau2, double cap,
                    double gauss_const, double log_cap, double floor, double rel_tol,
                    int max_panels, bint want, const Coef* coef, double* li, double* av, double* ddv,
                    double* out) noexcept nogil:
    """Fills out[0..3] = (log integral (unscaled by K), d1, d2, rel_err)."""
    cdef double sv = sqrt(v)
    cdef double center = t, scale = sv, shrink
    if kind == C_GAUSSIAN:
        shrink = tau2 / (tau2 + v)
        center = t * shrink
        scale = sqrt(v * shrink)
    cdef double c = center if center < cap else cap
    cdef double hi = center + C_WINDOW * scale
    if hi > cap:
        hi = cap
    cdef double lo = c - C_WINDOW * scale
    if lo < floor:
        lo = floor
    cdef double cand[7]
    cand[0] = c - 4.0 * scale
    cand[1] = c - scale
    cand[2] = c + scale
    cand[3] = c + 4.0 * scale
    cand[4] = 1.0 if cap < INFINITY else -1.0  # Blyth break radius
    cand[5] = cap
    cand[6] = 1e-2 * scale
    cdef double edges[9]
    cdef int ne = 0, i, k, lev, nsub, q, npan, idx, nn
    edges[ne] = lo
    ne += 1
    for i in range(7):
        if cand[i] > lo and cand[i] < hi:
            edges[ne] = cand[i]
            ne += 1
    edges[ne] = hi
    ne += 1
    sort_small(edges, ne)
    cdef double xe[9]
    for i in range(ne):
        xe[i] = log(edges[i])
    npan = 0
    for i in range(ne - 1):
        if xe[i + 1] > xe[i]:
            npan += 1

    cdef double width, start, half, x, r, s, la, la2, qq, ratio, a, da, shift
    cdef double kron, gauss, total, err, m1, m2, f, fk, d1 = 0.0, d2 = 0.0
    lev = 0
    while True:
        nsub = 1 << lev
        nn = 0
        shift = -INFINITY
        for i in range(ne - 1):
            width = (xe[i + 1] - xe[i]) / nsub
            if not (width > 0.0):
                continue
            for q in range(nsub):
                start = xe[i] + width * q
                half = 0.5 * width
                for k in range(21):
                    x = start + half + half * XK[k]
                    r = exp(x)
                    s = r * t / v
                    if want:
                        angular_pair(s, coef, &la, &la2)
                        qq = exp(la2 - la)
                        ratio = s * qq / p
                        a = -t / v + (r / v) * ratio
                        da = -1.0 / v + (r / v) * (r / v) * (1.0 - (p - 1.0) / p * qq - ratio * ratio)
                        av[nn] = a
                        ddv[nn] = da + a * a
                    else:
                        la = angular_one(s, coef)
                    li[nn] = (coded_log_h(x, r, kind, b, tau2, gauss_const, log_cap)
                              + p * x - (t - r) * (t - r) / (2.0 * v) + la)
                    if li[nn] > shift:
                        shift = li[nn]
                    nn += 1
        total = 0.0
        err = 0.0
        m1 = 0.0
        m2 = 0.0
        idx = 0
        for i in range(ne - 1):
            width = (xe[i + 1] - xe[i]) / nsub
            if not (width > 0.0):
                continue
            half = 0.5 * width
            for q in range(nsub):
                kron = 0.0
                gauss = 0.0
                for k in range(21):
                    f = exp(li[idx] - shift)
                    fk = half * f * WK[k]
                    kron += fk
                    gauss += half * f * WG[k]
                    if want:
                        m1 += fk * av[idx]
                        m2 += fk * ddv[idx]
                    idx += 1
                total += kron
                err += fabs(kron - gauss)
        if want:
            d1 = m1 / total
            d2 = m2 / total - d1 * d1
        out[0] = shift + log(total)
        out[1] = d1
        out[2] = d2
        out[3] = err / total
        if out[3] <= rel_tol:
            return 0
        if npan * (1 << (lev + 1)) > max_panels:
            return 1
        lev += 1


def radial_moments_coded(t, double v, int p, code, double rel_tol=1e-7,
                         int max_panels=4096, bint want_derivs=True):
    """See ``_kernels_py.radial_moments``; coded priors only."""
    kind_py, b_py, tau2_py, cap_py = code
    cdef int kind = int(kind_py)
    cdef double b = float(b_py), tau2 = float(tau2_py), cap = float(cap_py)
    cdef double origin = b if kind == C_POWER else 0.0
    cdef double floor = origin_floor(p, origin)
    cdef double log_cap = log(cap) if cap < INFINITY else INFINITY
    cdef double gauss_const = -0.5 * p * log(2.0 * M_PI * tau2) if kind == C_GAUSSIAN else 0.0
    cdef double log_k = -0.5 * p * log(2.0 * M_PI * v) + log_sphere_area(p)
    tarr = np.ascontiguousarray(np.abs(np.asarray(t, dtype=np.float64)).reshape(-1))
    cdef double[::1] tv = tarr
    cdef Py_ssize_t n = tv.shape[0], i
    logm = np.empty(n)
    d1 = np.zeros(n)
    d2 = np.zeros(n)
    rel = np.empty(n)
    status = np.zeros(n, dtype=np.int64)
    cdef double[::1] o_m = logm, o_1 = d1, o_2 = d2, o_r = rel
    cdef long long[::1] o_s = status
    cdef Py_ssize_t cap_nodes = (max_panels + 9) * 21
    cdef double* li = <double*> malloc(cap_nodes * sizeof(double))
    cdef double* av = <double*> malloc(cap_nodes * sizeof(double))
    cdef double* ddv = <double*> malloc(cap_nodes * sizeof(double))
    cdef double out[4]
    cdef int st
    cdef Coef coef
    make_coef(&coef, p)
    if li == NULL or av == NULL or ddv == NULL:
        free(li); free(av); free(ddv)
        raise MemoryError()
    try:
        with nogil:
            for i in range(n):
                st = one_radius(tv[i], v, p, kind, b, tau2, cap, gauss_const, log_cap, floor,
                                rel_tol, max_panels, want_derivs, &coef, li, av, ddv, out)
                o_m[i] = log_k + out[0]
                o_1[i] = out[1]
                o_2[i] = out[2]
                o_r[i] = out[3]
                o_s[i] = st
    finally:
        free(li)
        free(av)
        free(ddv)
    return logm, d1, d2, rel, status
