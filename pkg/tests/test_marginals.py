import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from predkl.errors import QuadratureError
from predkl.marginals import (
    CLOSED_FORM_GAUSSIAN,
    RADIAL_QUADRATURE,
    MarginalEvaluator,
    grad_log_marginal,
    laplacian_sqrt_ratio,
    log_marginal,
    round_radius,
)
from predkl.priors import RadialPrior, make_blyth, make_gaussian_prior, make_harmonic, make_power, make_uniform


def harmonic3_logm(t, v):
    """log m for pi = 1/||mu|| in three dimensions: E 1/||mu|| with mu ~ N(z, v I)."""
    t = np.asarray(t, float)
    with np.errstate(invalid="ignore", divide="ignore"):
        val = np.where(t > 0, special.erf(t / math.sqrt(2 * v)) / t, math.sqrt(2 / (math.pi * v)))
    return np.log(val)


def random_rotation(rng, p):
    q, r = np.linalg.qr(rng.normal(size=(p, p)))
    return q * np.sign(np.diag(r))


class TestLogMarginal:
    def test_uniform_is_zero(self):
        ev = MarginalEvaluator(make_uniform(), 3)
        assert log_marginal(ev, [1.0, 2.0, 3.0], 0.4) == 0.0

    def test_gaussian_closed_form(self):
        ev = MarginalEvaluator(make_gaussian_prior(1.0, 1), 1)
        assert ev.method == CLOSED_FORM_GAUSSIAN
        assert log_marginal(ev, [0.0], 1.0) == pytest.approx(-0.5 * math.log(4 * math.pi), rel=1e-14)

    @pytest.mark.parametrize("v", [0.1, 0.5, 1.0, 3.0])
    def test_harmonic_against_erf(self, v):
        ev = MarginalEvaluator(make_harmonic(3), 3)
        t = np.concatenate([[0.0, 1e-9], np.logspace(-3, 2.5, 30)])
        np.testing.assert_allclose(ev.radial(t, v, derivs=False)[0], harmonic3_logm(t, v), rtol=1e-7, atol=1e-10)

    def test_harmonic_derivatives_against_erf(self):
        ev = MarginalEvaluator(make_harmonic(3), 3)
        t = np.linspace(0.2, 6.0, 15)
        _, d1, d2 = ev.radial(t, 1.0)
        h = 1e-4
        fd1 = (harmonic3_logm(t + h, 1.0) - harmonic3_logm(t - h, 1.0)) / (2 * h)
        fd2 = (harmonic3_logm(t + h, 1.0) - 2 * harmonic3_logm(t, 1.0) + harmonic3_logm(t - h, 1.0)) / h ** 2
        np.testing.assert_allclose(d1, fd1, rtol=1e-6, atol=1e-8)
        np.testing.assert_allclose(d2, fd2, rtol=1e-4, atol=1e-6)

    def test_harmonic_against_monte_carlo(self):
        # m(z; v) = E[1 / ||mu||] for mu ~ N(z, v I): sample the Gaussian factor directly
        z, v, n = np.array([2.0, 0.0, 0.0]), 1.0, 200000
        draws = z + np.random.default_rng(21).normal(size=(n, 3)) * math.sqrt(v)
        w = 1.0 / np.linalg.norm(draws, axis=1)
        est, se = w.mean(), w.std(ddof=1) / math.sqrt(n)
        ev = MarginalEvaluator(make_harmonic(3), 3)
        assert abs(math.exp(log_marginal(ev, z, v)) - est) < 3 * se

    @pytest.mark.parametrize("tau2", [0.5, 2.0])
    @pytest.mark.parametrize("p", [1, 3])
    def test_forced_quadrature_matches_gaussian(self, tau2, p):
        prior = make_gaussian_prior(tau2, p)
        quad = MarginalEvaluator(prior, p, method=RADIAL_QUADRATURE)
        closed = MarginalEvaluator(prior, p)
        t = np.array([0.0, 0.3, 1.0, 2.5, 6.0, 15.0])
        for v in (0.25, 1.0, 4.0):
            a = quad.radial(t, v)
            b = closed.radial(t, v)
            for x, y in zip(a, b):
                np.testing.assert_allclose(x, y, rtol=1e-6, atol=1e-9)

    def test_generic_and_coded_paths_agree(self):
        coded = make_blyth(make_power(1.0, 3), 6, 3)
        generic = RadialPrior(coded.log_h, coded.dlog_h, coded.tail_exponent, coded.origin_exponent,
                              coded.proper, support_radius=coded.support_radius, breaks=coded.breaks)
        t = np.array([0.0, 0.5, 2.0, 5.0, 9.0])
        a = MarginalEvaluator(coded, 3).radial(t, 0.7)
        b = MarginalEvaluator(generic, 3).radial(t, 0.7)
        for x, y in zip(a, b):
            np.testing.assert_allclose(x, y, rtol=1e-6, atol=1e-9)

    @pytest.mark.parametrize("prior,p", [(make_harmonic(3), 3), (make_power(1.5, 3), 3),
                                         (make_blyth(make_uniform(), 8, 1), 1),
                                         (make_gaussian_prior(1.0, 2), 2)])
    def test_rotation_invariance(self, prior, p):
        ev = MarginalEvaluator(prior, p)
        rng = np.random.default_rng(4)
        z = rng.normal(size=p) * 2
        base = log_marginal(ev, z, 0.8)
        for _ in range(3):
            zr = random_rotation(rng, p) @ z if p > 1 else -z
            assert log_marginal(ev, zr, 0.8) == pytest.approx(base, rel=1e-10, abs=1e-12)

    def test_finite_between_v_w_and_v_x(self):
        ev = MarginalEvaluator(make_harmonic(5), 5)
        t = np.array([0.0, 0.5, 3.0, 30.0])
        for v in np.linspace(0.5, 1.0, 6):
            assert np.all(np.isfinite(ev.radial(t, v)[0]))

    def test_memo_does_not_change_values(self):
        ev = MarginalEvaluator(make_harmonic(3), 3)
        first = ev.log_m(1.2345, 0.9)
        again = ev.log_m(1.2345, 0.9)
        fresh = float(MarginalEvaluator(make_harmonic(3), 3).radial(np.array([1.2345]), 0.9, derivs=False)[0][0])
        assert first == again == fresh

    def test_quadrature_failure_is_explicit(self):
        ev = MarginalEvaluator(make_harmonic(3), 3, rel_tol=1e-15, max_panels=1)
        with pytest.raises(QuadratureError) as info:
            ev.radial(np.array([2.0]), 1.0)
        assert info.value.partial is not None

    def test_nonintegrable_origin_rejected(self):
        prior = RadialPrior(lambda r: -3.0 * np.log(r), lambda r: -3.0 / r, 3.0, 3.0, False)
        with pytest.raises(ValueError):
            MarginalEvaluator(prior, 3)


class TestGradient:
    def test_gaussian_closed_form(self):
        ev = MarginalEvaluator(make_gaussian_prior(1.0, 1), 1)
        np.testing.assert_allclose(grad_log_marginal(ev, [2.0], 1.0), [-1.0])

    def test_uniform_and_origin_zero(self):
        np.testing.assert_array_equal(grad_log_marginal(MarginalEvaluator(make_uniform(), 2), [3.0, 4.0], 1.0), 0.0)
        np.testing.assert_array_equal(grad_log_marginal(MarginalEvaluator(make_harmonic(3), 3), np.zeros(3), 1.0), 0.0)

    def test_matches_finite_differences(self):
        ev = MarginalEvaluator(make_harmonic(4), 4)
        z = np.array([0.7, -1.1, 0.4, 2.0])
        h = 1e-4
        fd = [(log_marginal(ev, z + h * e, 1.3) - log_marginal(ev, z - h * e, 1.3)) / (2 * h) for e in np.eye(4)]
        np.testing.assert_allclose(grad_log_marginal(ev, z, 1.3), fd, rtol=1e-5)


class TestLaplacian:
    def test_uniform_zero(self):
        assert laplacian_sqrt_ratio(MarginalEvaluator(make_uniform(), 3), [1.0, 0.0, 0.0], 1.0) == 0.0

    def test_gaussian_at_origin(self):
        ev = MarginalEvaluator(make_gaussian_prior(1.0, 1), 1)
        assert laplacian_sqrt_ratio(ev, [0.0], 1.0) == pytest.approx(-0.25)

    def test_matches_finite_differences(self):
        ev = MarginalEvaluator(make_harmonic(3), 3)
        z = np.array([1.0, 0.5, -0.3])
        h = 1e-3

        def sqrt_m(x):
            return math.exp(0.5 * log_marginal(ev, x, 1.0))

        lap = sum(sqrt_m(z + h * e) - 2 * sqrt_m(z) + sqrt_m(z - h * e) for e in np.eye(3)) / h ** 2
        assert laplacian_sqrt_ratio(ev, z, 1.0) == pytest.approx(lap / sqrt_m(z), rel=1e-5)

    def test_continuous_at_origin(self):
        ev = MarginalEvaluator(make_harmonic(3), 3)
        near = ev.laplacian_ratio_radial(np.array([0.0, 1e-6, 1e-4]), 1.0)
        np.testing.assert_allclose(near, near[0], rtol=1e-6)

    def test_heat_flow_identity_gaussian(self):
        # d/dv E log m(Z; v) = E[2 lap sqrt m / sqrt m] for Z ~ N(mu, v), p = 1
        ev = MarginalEvaluator(make_gaussian_prior(1.0, 1), 1)
        rng = np.random.default_rng(8)
        xi = rng.normal(size=200000)
        mu, v, h = 0.5, 0.8, 1e-4

        def mean_logm(vv):
            return ev.radial(np.abs(mu + math.sqrt(vv) * xi), vv, derivs=False)[0]

        deriv = (mean_logm(v + h) - mean_logm(v - h)) / (2 * h)
        rhs = 2 * ev.laplacian_ratio_radial(np.abs(mu + math.sqrt(v) * xi), v)
        diff = deriv - rhs
        assert abs(diff.mean()) < 3 * diff.std(ddof=1) / math.sqrt(diff.size) + 1e-6


class TestRounding:
    @settings(max_examples=100, deadline=None)
    @given(st.floats(1e-200, 1e200))
    def test_twelve_digits(self, x):
        assert round_radius(x) == pytest.approx(x, rel=1e-11)

    def test_shape_preserved(self):
        assert round_radius(np.zeros((2, 3))).shape == (2, 3)
        assert round_radius(0.0) == 0.0
