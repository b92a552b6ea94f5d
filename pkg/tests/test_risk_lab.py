import math

import numpy as np
import pytest

from predkl.core_model import ModelConfig
from predkl.estimators import PredictiveProcedure, posterior_mean
from predkl.montecarlo import BLOCK, RiskEstimate, child, from_seed_record, seed_record, seed_sequence
from predkl.priors import make_blyth, make_gaussian_prior, make_harmonic, make_uniform
from predkl.risk_lab import (
    average_risk_gap,
    bridge_rhs,
    gauss_legendre,
    kl_risk,
    kl_risk_diff,
    quadratic_risk,
    stein_quadratic_diff,
    verify_bridge,
)

# E log m(W; v_w) - E log m(X; v_x) for the N(0, 1) prior at mu = 0, v_x = v_y = 1:
# f(v) = -0.5 log(2 pi (v + 1)) - v / (2 (v + 1)), and f(1/2) - f(1) = 0.5 log(4/3) + 1/12
GAUSS_DIFF = 0.5 * math.log(4.0 / 3.0) + 1.0 / 12.0


def test_oracle_value():
    assert GAUSS_DIFF == pytest.approx(0.2271744, abs=1e-7)
    assert abs(GAUSS_DIFF - 0.22718) < 1e-5


class TestKLRisk:
    def test_plugin_anchor(self):
        est = kl_risk(ModelConfig(1, 1.0, 1.0), [3.0], PredictiveProcedure.plugin_mle(), 50000, 1)
        assert est.within(0.5)

    def test_uniform_bayes_anchor(self):
        est = kl_risk(ModelConfig(3, 1.0, 1.0), [0.0, 1.0, 0.0], PredictiveProcedure.bayes(make_uniform()), 50000, 2)
        assert est.within(1.5 * math.log(2.0))

    def test_uniform_constant_risk(self):
        model = ModelConfig(2, 1.5, 1.0)
        proc = PredictiveProcedure.bayes(make_uniform())
        a = kl_risk(model, [0.0, 0.0], proc, 40000, 3)
        b = kl_risk(model, [5.0, 0.0], proc, 40000, 4)
        assert abs(a.value - b.value) <= 3 * math.hypot(a.std_error, b.std_error)

    def test_uniform_bayes_dominates_plugin(self):
        model = ModelConfig(2, 2.0, 1.0)
        for r in (0.0, 1.0, 4.0):
            mu = [r, 0.0]
            pl = kl_risk(model, mu, PredictiveProcedure.plugin_mle(), 40000, 5)
            ba = kl_risk(model, mu, PredictiveProcedure.bayes(make_uniform()), 40000, 5)
            assert ba.value < pl.value
            gap = 0.5 * model.p * (model.v_x / model.v_y - math.log1p(model.v_x / model.v_y))
            diff = pl.value - ba.value
            assert abs(diff - gap) <= 3 * math.hypot(pl.std_error, ba.std_error)

    def test_non_gaussian_rule_matches_difference_form(self):
        # kl_risk(uniform) - kl_risk(harmonic) equals kl_risk_diff in expectation
        model = ModelConfig(3, 1.0, 1.0)
        mu = [1.0, 0.0, 0.0]
        ku = kl_risk(model, mu, PredictiveProcedure.bayes(make_uniform()), 20000, 6)
        kh = kl_risk(model, mu, PredictiveProcedure.bayes(make_harmonic(3)), 20000, 7, inner=4)
        d = kl_risk_diff(model, mu, make_harmonic(3), 20000, 8)
        se = math.sqrt(ku.std_error ** 2 + kh.std_error ** 2 + d.std_error ** 2)
        assert abs((ku.value - kh.value) - d.value) <= 3 * se

    def test_gaussian_prior_closed_form_agrees_with_inner_mc(self):
        model = ModelConfig(1, 1.0, 1.0)
        prior = make_gaussian_prior(1.0, 1)
        closed = kl_risk(model, [0.5], PredictiveProcedure.bayes(prior), 40000, 9)
        generic = PredictiveProcedure("bayes", prior=prior)
        generic.gaussian_form = lambda m: None
        mc = kl_risk(model, [0.5], generic, 40000, 10, inner=4)
        assert abs(closed.value - mc.value) <= 3 * math.hypot(closed.std_error, mc.std_error)


class TestQuadraticRisk:
    def test_mle(self):
        est = quadratic_risk(2.0, [1.0, 2.0, 3.0], lambda z: z, 40000, 1)
        assert est.within(6.0)

    def test_gaussian_posterior_mean(self):
        prior = make_gaussian_prior(1.0, 1)
        est = quadratic_risk(1.0, [0.0], lambda z: posterior_mean(prior, z, 1.0), 40000, 2)
        assert est.within(0.25)

    def test_uniform_posterior_mean_is_mle(self):
        a = quadratic_risk(1.0, [1.0, 1.0], lambda z: z, 5000, 3)
        b = quadratic_risk(1.0, [1.0, 1.0], lambda z: posterior_mean(make_uniform(), z, 1.0), 5000, 3)
        assert a.value == b.value


class TestKLRiskDiff:
    def test_uniform_zero(self):
        est = kl_risk_diff(ModelConfig(2, 1.0, 1.0), [1.0, 0.0], make_uniform(), 1000, 0)
        assert est.value == 0.0

    def test_gaussian_oracle(self):
        est = kl_risk_diff(ModelConfig(1, 1.0, 1.0), [0.0], make_gaussian_prior(1.0, 1), 100000, 1)
        assert est.within(GAUSS_DIFF)

    def test_harmonic_positive_at_origin(self):
        est = kl_risk_diff(ModelConfig(3, 1.0, 1.0), [0.0, 0.0, 0.0], make_harmonic(3), 20000, 2)
        assert est.value > 2 * est.std_error


class TestSteinDiff:
    def test_uniform_zero(self):
        assert stein_quadratic_diff(1.0, [0.0, 0.0], make_uniform(), 1000, 0).value == 0.0

    def test_gaussian_oracle(self):
        est = stein_quadratic_diff(1.0, [0.0], make_gaussian_prior(1.0, 1), 100000, 1)
        assert est.within(0.75)

    def test_harmonic_matches_direct_difference(self):
        prior = make_harmonic(3)
        mu, v, n = [2.0, 0.0, 0.0], 1.0, 100000
        stein = stein_quadratic_diff(v, mu, prior, n, 3)
        mle = quadratic_risk(v, mu, lambda z: z, n, 4)
        bayes = quadratic_risk(v, mu, lambda z: posterior_mean(prior, z, v), n, 4)
        # same seed for both direct risks: pair them per sample
        direct = mle.value - bayes.value
        paired_se = _paired_se(v, mu, prior, n, 4)
        assert abs(stein.value - direct) <= 3 * math.hypot(stein.std_error, paired_se)


def _paired_se(v, mu, prior, n, seed):
    mu = np.asarray(mu, float)
    ss = seed_sequence(seed)
    parts = []
    for i, start in enumerate(range(0, n, BLOCK)):
        g = np.random.default_rng(child(ss, i))
        z = mu + math.sqrt(v) * g.standard_normal((min(BLOCK, n - start), mu.size))
        parts.append(np.sum((z - mu) ** 2, 1) - np.sum((posterior_mean(prior, z, v) - mu) ** 2, 1))
    d = np.concatenate(parts)
    return d.std(ddof=1) / math.sqrt(n)


class TestBridge:
    def test_gauss_legendre_exact_for_polynomials(self):
        x, w = gauss_legendre(0.5, 1.0, 8)
        assert np.sum(w * x ** 7) == pytest.approx((1.0 - 0.5 ** 8) / 8, rel=1e-14)

    def test_uniform_zero(self):
        rep = verify_bridge(ModelConfig(3, 1.0, 1.0), [1.0, 0.0, 0.0], make_uniform(), 2000, 0)
        assert rep.lhs.value == 0.0 and rep.rhs.value == 0.0 and rep.passed

    def test_gaussian_both_sides(self):
        rep = verify_bridge(ModelConfig(1, 1.0, 1.0), [0.0], make_gaussian_prior(1.0, 1), 100000, 1)
        assert rep.passed
        assert rep.lhs.value == pytest.approx(GAUSS_DIFF, abs=0.005)
        assert rep.rhs.value == pytest.approx(GAUSS_DIFF, abs=0.005)

    def test_rhs_stable_under_node_doubling(self):
        model, mu, prior = ModelConfig(1, 2.0, 1.0), [1.0], make_gaussian_prior(1.0, 1)
        a = bridge_rhs(model, mu, prior, 20000, 16, 5)
        b = bridge_rhs(model, mu, prior, 20000, 32, 5)
        assert abs(a.value - b.value) <= a.error_bound + b.error_bound
        assert a.refinement < 1e-8

    def test_node_minimum(self):
        with pytest.raises(ValueError):
            bridge_rhs(ModelConfig(1, 1.0, 1.0), [0.0], make_uniform(), 10, 3)

    @pytest.mark.parametrize("v_x,v_y", [(1.0, 1.0), (2.0, 1.0), (1.0, 2.0)])
    def test_gaussian_variance_grid(self, v_x, v_y):
        rep = verify_bridge(ModelConfig(1, v_x, v_y), [2.0], make_gaussian_prior(1.0, 1), 40000, 6)
        assert rep.passed, rep.diagnosis

    def test_failed_component_is_diagnosed(self):
        rep = verify_bridge(ModelConfig(1, 1.0, 1.0), [0.0], make_blyth(make_uniform(), 2, 1), 10, 0, nodes=2)
        assert not rep.passed
        assert "ValueError" in rep.diagnosis

    @pytest.mark.slow
    def test_harmonic_sign_transfer(self):
        model, mu, prior = ModelConfig(3, 1.0, 1.0), [1.0, 0.0, 0.0], make_harmonic(3)
        x, _ = gauss_legendre(model.v_w, model.v_x, 4)
        stein = [stein_quadratic_diff(v, mu, prior, 5000, 11) for v in x]
        assert all(s.value >= 0 for s in stein)
        d = kl_risk_diff(model, mu, prior, 20000, 12)
        assert d.value >= -2 * d.std_error


class TestAverageRiskGap:
    def test_degenerate_comparison_is_zero(self):
        model = ModelConfig(1, 1.0, 1.0)
        blyth = make_blyth(make_uniform(), 4, 1)
        est = average_risk_gap(model, make_uniform(), 4, 2000, 0, compare=blyth)
        assert est.value == 0.0

    def test_nonnegative(self):
        est = average_risk_gap(ModelConfig(1, 1.0, 1.0), make_uniform(), 4, 8000, 1)
        assert est.value >= -2 * est.std_error
        assert est.extra["prior_mass"] > 0

    def test_dimension_limit(self):
        with pytest.raises(ValueError):
            average_risk_gap(ModelConfig(3, 1.0, 1.0), make_uniform(), 4, 100, 0)


class TestReproducibility:
    def test_worker_count_bit_identical(self):
        model = ModelConfig(3, 1.0, 1.0)
        a = kl_risk_diff(model, [1.0, 0.0, 0.0], make_harmonic(3), 3 * BLOCK + 17, 42, workers=1)
        b = kl_risk_diff(model, [1.0, 0.0, 0.0], make_harmonic(3), 3 * BLOCK + 17, 42, workers=4)
        assert a.value == b.value and a.std_error == b.std_error

    def test_same_seed_same_result(self):
        proc = PredictiveProcedure.plugin_mle()
        a = kl_risk(ModelConfig(2, 1.0, 1.0), [0.0, 0.0], proc, 5000, 7)
        b = kl_risk(ModelConfig(2, 1.0, 1.0), [0.0, 0.0], proc, 5000, 7)
        assert a == b
        c = kl_risk(ModelConfig(2, 1.0, 1.0), [0.0, 0.0], proc, 5000, 8)
        assert a.value != c.value

    def test_se_scaling(self):
        proc = PredictiveProcedure.plugin_mle()
        model = ModelConfig(1, 1.0, 1.0)
        small = np.mean([kl_risk(model, [0.0], proc, 5000, s).std_error for s in range(6)])
        large = np.mean([kl_risk(model, [0.0], proc, 10000, s).std_error for s in range(6)])
        assert 0.6 * math.sqrt(2) <= small / large <= 1.0 * math.sqrt(2) * 1.1

    def test_seed_record_round_trip(self):
        ss = child(seed_sequence(123), 4)
        again = from_seed_record(seed_record(ss))
        assert np.array_equal(np.random.default_rng(ss).random(4), np.random.default_rng(again).random(4))

    def test_estimate_dict_round_trip(self):
        est = kl_risk(ModelConfig(1, 1.0, 1.0), [0.0], PredictiveProcedure.plugin_mle(), 100, 1)
        assert RiskEstimate.from_dict(est.to_dict()) == est
