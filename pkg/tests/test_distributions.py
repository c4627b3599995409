"""Distribution families: closed forms, normalization, and seeding."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from collapsekit import distributions as dist
from collapsekit.errors import InvalidParams
from collapsekit.numerics import Interval, integrate

CONTINUOUS = [
    dist.normal(0.3, 1.2),
    dist.uniform(-1.0, 2.5),
    dist.gamma(2.0, 3.0),
    dist.tempered_normal(1.0, 0.7),
]

DISCRETE = [
    dist.poisson(2.5),
    dist.negative_binomial(2.0, 0.4),
    dist.bernoulli(0.3),
]


class TestPdf:
    def test_standard_normal_at_zero(self):
        assert abs(dist.pdf_or_pmf(dist.normal(0, 1), 0.0) - 0.3989422804) <= 1e-9

    def test_geometric_special_case(self):
        nb = dist.negative_binomial(1.0, 0.5)
        assert abs(dist.pdf_or_pmf(nb, 0.0) - 0.5) <= 1e-12
        assert abs(dist.pdf_or_pmf(nb, 1.0) - 0.25) <= 1e-12

    def test_tempered_normal_is_shifted_gaussian(self):
        x, lam = 1.3, 0.8
        fam = dist.tempered_normal(x, lam)
        for w in (-1.0, 0.0, 0.5, 2.0):
            want = math.exp(-0.5 * (w - x + lam) ** 2) / math.sqrt(2 * math.pi)
            assert abs(dist.pdf_or_pmf(fam, w) - want) <= 1e-12

    def test_outside_support_is_zero_not_error(self):
        assert dist.pdf_or_pmf(dist.uniform(0, 1), 2.0) == 0.0
        assert dist.pdf_or_pmf(dist.gamma(1, 1), -1.0) == 0.0
        assert dist.pdf_or_pmf(dist.poisson(2.0), 1.5) == 0.0
        assert dist.pdf_or_pmf(dist.poisson(2.0), -3.0) == 0.0

    def test_vectorized(self):
        vals = dist.pdf_or_pmf(dist.normal(0, 1), np.array([-1.0, 0.0, 1.0]))
        assert vals.shape == (3,)
        assert abs(vals[1] - 0.3989422804) <= 1e-9

    @pytest.mark.parametrize("family", CONTINUOUS, ids=lambda f: f.tag)
    def test_density_normalizes(self, family):
        sup = dist.support(family)
        r = integrate(lambda t: dist.pdf_or_pmf(family, t), sup)
        assert abs(r.value - 1.0) <= 1e-8

    @pytest.mark.parametrize("family", DISCRETE, ids=lambda f: f.tag)
    def test_pmf_sums_to_one(self, family):
        total = sum(dist.pdf_or_pmf(family, float(k)) for k in range(400))
        assert abs(total - 1.0) <= 1e-10

    @pytest.mark.parametrize("family", CONTINUOUS + DISCRETE, ids=lambda f: f.tag)
    def test_mean_matches_numeric(self, family):
        want = dist.mean(family)
        if family.discrete:
            got = sum(k * dist.pdf_or_pmf(family, float(k)) for k in range(400))
        else:
            got = integrate(
                lambda t: np.asarray(t) * dist.pdf_or_pmf(family, t), dist.support(family)
            ).value
        assert abs(got - want) <= 1e-6

    def test_nb_overdispersion_identity(self):
        # NB(theta, theta/(theta+lam)) has variance lam (1 + lam/theta).
        theta, lam = 2.0, 1.7
        fam = dist.negative_binomial(theta, theta / (theta + lam))
        ks = np.arange(500, dtype=float)
        p = dist.pdf_or_pmf(fam, ks)
        m = float(ks @ p)
        v = float((ks - m) ** 2 @ p)
        assert abs(m - lam) <= 1e-9
        assert abs(v - lam * (1.0 + lam / theta)) <= 1e-6
        assert v > m


class TestCdf:
    def test_normal_median(self):
        assert abs(dist.cdf(dist.normal(0, 1), 0.0) - 0.5) <= 1e-12

    def test_uniform_linear(self):
        c = 2.5
        for y in (0.1, 1.0, 2.0):
            assert abs(dist.cdf(dist.uniform(0, c), y) - y / c) <= 1e-12

    def test_gamma_saturates(self):
        fam = dist.gamma(1.5, 1.5)
        assert dist.cdf(fam, 1e6) == pytest.approx(1.0, abs=1e-12)
        assert dist.cdf(fam, 0.0) == 0.0

    def test_poisson_step(self):
        fam = dist.poisson(2.0)
        # Right-continuous step: F(1.5) = P(Y <= 1).
        want = dist.pdf_or_pmf(fam, 0.0) + dist.pdf_or_pmf(fam, 1.0)
        assert abs(dist.cdf(fam, 1.5) - want) <= 1e-12

    def test_negative_binomial_matches_series(self):
        fam = dist.negative_binomial(2.0, 0.4)
        want = sum(dist.pdf_or_pmf(fam, float(k)) for k in range(6))
        assert abs(dist.cdf(fam, 5.0) - want) <= 1e-10

    @given(
        a=st.floats(-30, 30),
        b=st.floats(-30, 30),
    )
    @settings(max_examples=100, deadline=None)
    def test_monotone(self, a, b):
        lo, hi = min(a, b), max(a, b)
        for fam in (dist.normal(0, 2), dist.gamma(1.0, 2.0), dist.poisson(3.0)):
            assert dist.cdf(fam, hi) >= dist.cdf(fam, lo) - 1e-12


class TestSample:
    def test_same_seed_bit_identical(self):
        for fam in CONTINUOUS + DISCRETE:
            a = dist.sample(fam, 100, 12345)
            b = dist.sample(fam, 100, 12345)
            assert np.array_equal(a, b)

    def test_different_seeds_differ(self):
        a = dist.sample(dist.normal(0, 1), 100, 1)
        b = dist.sample(dist.normal(0, 1), 100, 2)
        assert not np.array_equal(a, b)

    def test_degenerate_bernoulli(self):
        assert np.array_equal(dist.sample(dist.bernoulli(1.0), 5, 0), np.ones(5))

    def test_poisson_clt_band(self):
        lam, n = 3.0, 100000
        s = dist.sample(dist.poisson(lam), n, 42)
        assert abs(s.mean() - lam) <= 4.0 * math.sqrt(lam / n)

    def test_unit_mean_gamma_clt_band(self):
        theta, n = 2.0, 100000
        s = dist.sample(dist.gamma(theta, theta), n, 42)
        assert abs(s.mean() - 1.0) <= 4.0 * math.sqrt(theta) / math.sqrt(theta * n)

    def test_n_must_be_positive(self):
        with pytest.raises(InvalidParams):
            dist.sample(dist.normal(0, 1), 0, 0)


class TestValidation:
    @pytest.mark.parametrize(
        "bad",
        [
            lambda: dist.normal(0, 0.0),
            lambda: dist.uniform(1.0, 1.0),
            lambda: dist.gamma(-1.0, 2.0),
            lambda: dist.gamma(1.0, 0.0),
            lambda: dist.poisson(0.0),
            lambda: dist.negative_binomial(0.0, 0.5),
            lambda: dist.negative_binomial(1.0, 1.0),
            lambda: dist.bernoulli(1.5),
            lambda: dist.tempered_normal(0.0, 0.0),
            lambda: dist.Family("cauchy", (0.0, 1.0)),
            lambda: dist.Family("normal", (0.0,)),
        ],
    )
    def test_invalid_params(self, bad):
        with pytest.raises(InvalidParams):
            bad()
