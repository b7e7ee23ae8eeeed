"""Asymmetric exponential power model: density, two-piece CDF, L-moment fit."""

import math

import numpy as np
import pytest
from scipy import integrate, stats

from prodtail.aep import (
    AEPParams,
    aep_cdf,
    aep_fit_lmoments,
    aep_logpdf,
    aep_pdf,
    aep_quantile,
    aep_sample,
    sample_lmoments,
    theoretical_lmoments,
)
from prodtail.errors import InvalidParameterError, SampleSizeError

LAPLACE = AEPParams(0.0, 1.0, 1.0, 1.0)
NORMALISH = AEPParams(0.0, 1.0, 2.0, 1.0)
SKEWED = AEPParams(0.5, 2.0, 1.3, 1.7)


class TestDensity:
    def test_laplace_mode(self):
        assert aep_pdf(LAPLACE, 0.0) == pytest.approx(0.5, abs=1e-15)

    def test_h2_mode(self):
        assert aep_pdf(NORMALISH, 0.0) == pytest.approx(1.0 / math.sqrt(math.pi), abs=1e-15)

    @pytest.mark.parametrize("p", [LAPLACE, NORMALISH, SKEWED, AEPParams(-2.0, 0.5, 0.7, 0.6)])
    def test_integrates_to_one(self, p):
        total, _ = integrate.quad(lambda x: aep_pdf(p, x), -np.inf, np.inf, limit=300)
        assert total == pytest.approx(1.0, abs=1e-8)

    def test_continuity_at_location(self):
        eps = 1e-9
        left = aep_pdf(SKEWED, SKEWED.xi - eps)
        right = aep_pdf(SKEWED, SKEWED.xi + eps)
        assert left == pytest.approx(right, rel=1e-6)

    def test_positive_everywhere(self):
        xs = np.linspace(-50, 50, 101)
        assert np.all(aep_pdf(SKEWED, xs) > 0.0)

    def test_param_validation(self):
        for bad in [dict(sigma=0.0), dict(h=-1.0), dict(kappa=0.0)]:
            kwargs = dict(xi=0.0, sigma=1.0, h=1.0, kappa=1.0) | bad
            with pytest.raises(InvalidParameterError):
                AEPParams(**kwargs)


class TestCdfQuantile:
    @pytest.mark.parametrize("x", [-5.0, -1.0, 0.5, 2.0, 10.0])
    def test_cdf_matches_quadrature(self, x):
        num, _ = integrate.quad(lambda t: aep_pdf(SKEWED, t), -np.inf, x, limit=300)
        assert aep_cdf(SKEWED, x) == pytest.approx(num, abs=1e-9)

    def test_left_mass_at_location(self):
        k = SKEWED.kappa
        assert aep_cdf(SKEWED, SKEWED.xi) == pytest.approx(k * k / (1 + k * k), abs=1e-14)

    def test_quantile_round_trip(self):
        qs = np.array([0.001, 0.05, 0.3, 0.7, 0.95, 0.999])
        xs = aep_quantile(SKEWED, qs)
        assert np.allclose(aep_cdf(SKEWED, xs), qs, atol=1e-12)

    def test_bad_levels(self):
        with pytest.raises(InvalidParameterError):
            aep_quantile(SKEWED, 0.0)


class TestSampling:
    def test_symmetric_skewness(self):
        s = aep_sample(NORMALISH, 100_000, 12)
        assert abs(stats.skew(s)) < 0.05

    def test_determinism(self):
        assert np.array_equal(aep_sample(SKEWED, 500, 3), aep_sample(SKEWED, 500, 3))

    def test_ks_against_cdf(self):
        s = aep_sample(SKEWED, 10_000, 4)
        res = stats.kstest(s, lambda x: aep_cdf(SKEWED, x))
        assert res.statistic < 0.01


class TestLmoments:
    def test_theoretical_match_quadrature(self):
        for h, k in [(1.0, 1.0), (2.0, 1.0), (0.7, 1.5), (3.0, 0.6)]:
            p = AEPParams(0.0, 1.0, h, k)
            Q = lambda u: aep_quantile(p, u)
            l1 = integrate.quad(Q, 0, 1, limit=300)[0]
            l2 = integrate.quad(lambda u: Q(u) * (2 * u - 1), 0, 1, limit=300)[0]
            l3 = integrate.quad(lambda u: Q(u) * (6 * u * u - 6 * u + 1), 0, 1, limit=300)[0]
            l4 = integrate.quad(lambda u: Q(u) * (20 * u**3 - 30 * u**2 + 12 * u - 1),
                                0, 1, limit=300)[0]
            got = theoretical_lmoments(h, k)
            assert got[0] == pytest.approx(l1, abs=2e-7)
            assert got[1] == pytest.approx(l2, abs=2e-7)
            assert got[2] == pytest.approx(l3 / l2, abs=2e-7)
            assert got[3] == pytest.approx(l4 / l2, abs=2e-7)

    def test_symmetric_tau3_zero(self):
        _, _, t3, _ = theoretical_lmoments(1.7, 1.0)
        assert t3 == pytest.approx(0.0, abs=1e-10)

    def test_laplace_tau4(self):
        # L-kurtosis of the symmetric h=1 member is 1/(3*sqrt(2)) * ... = 0.2361
        _, _, _, t4 = theoretical_lmoments(1.0, 1.0)
        assert t4 == pytest.approx(17.0 / 72.0, abs=1e-9)

    def test_sample_lmoments_small_case(self):
        # n=4: the four L-moments reduce to simple order-statistic contrasts
        x = np.array([1.0, 2.0, 4.0, 8.0])
        l1, l2, t3, t4 = sample_lmoments(x)
        assert l1 == pytest.approx(3.75)
        # l2 = mean over pairs of |xi - xj| / 2
        diffs = [abs(a - b) for i, a in enumerate(x) for b in x[i + 1:]]
        assert l2 == pytest.approx(np.mean(diffs) / 2.0)


class TestFit:
    def test_recovery(self):
        errs = []
        for seed in range(10):
            x = aep_sample(AEPParams(0.0, 1.0, 2.0, 1.0), 10_000, 800 + seed)
            p = aep_fit_lmoments(x).params
            errs.append([abs(p.xi), abs(p.sigma - 1.0), abs(p.h - 2.0), abs(p.kappa - 1.0)])
        med = np.median(errs, axis=0)
        assert med[0] < 0.05 and med[1] < 0.05 and med[2] < 0.15 and med[3] < 0.05

    def test_laplace_tail_exponent(self):
        errs = []
        for seed in range(8):
            x = aep_sample(LAPLACE, 10_000, 900 + seed)
            errs.append(abs(aep_fit_lmoments(x).params.h - 1.0))
        assert np.median(errs) < 0.1

    def test_symmetric_kappa_one(self):
        # theoretical L-skewness zero -> kappa recovered at 1
        x = aep_sample(NORMALISH, 50_000, 31)
        p = aep_fit_lmoments(x).params
        assert p.kappa == pytest.approx(1.0, abs=0.03)

    def test_affine_equivariance(self):
        x = aep_sample(SKEWED, 8_000, 5)
        base = aep_fit_lmoments(x).params
        a, b = 2.5, -4.0
        p = aep_fit_lmoments(a * x + b).params
        assert p.xi == pytest.approx(a * base.xi + b, abs=1e-6 + 1e-6 * abs(base.xi))
        assert p.sigma == pytest.approx(a * base.sigma, rel=1e-6)
        assert p.h == pytest.approx(base.h, rel=1e-5)
        assert p.kappa == pytest.approx(base.kappa, rel=1e-5)

    def test_lmoment_match_at_solution(self):
        x = aep_sample(SKEWED, 8_000, 6)
        fit = aep_fit_lmoments(x)
        l1, l2, t3, t4 = sample_lmoments(x)
        lam1, lam2, tt3, tt4 = theoretical_lmoments(fit.params.h, fit.params.kappa)
        assert tt3 == pytest.approx(t3, abs=1e-6)
        assert tt4 == pytest.approx(t4, abs=1e-6)
        assert fit.params.sigma * lam2 == pytest.approx(l2, rel=1e-9)
        assert fit.params.xi + fit.params.sigma * lam1 == pytest.approx(l1, rel=1e-9)
        assert fit.residual < 1e-6

    def test_sample_too_small(self):
        with pytest.raises(SampleSizeError):
            aep_fit_lmoments(np.arange(10.0))
