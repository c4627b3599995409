"""Conditional models and numerical marginalization.

Independent oracles: scipy double quadrature for mixed CDFs, the
Hermite rule for Gaussian mixtures, and closed forms derived by hand.
"""

import math

import numpy as np
import pytest
from scipy import integrate as sci_integrate

from collapsekit import distributions as dist
from collapsekit.errors import InvalidParams, MissingCapability
from collapsekit.model import (
    ConditionalModel,
    CovariateLaw,
    JointDensitySpec,
    SupportRule,
    condition_from_joint,
    homogeneity_probe,
    marginal_cdf,
    marginal_density,
    marginal_mean,
    marginal_pmf,
    pmf_series,
)
from collapsekit.numerics import Interval, QuadratureSpec, integrate
from collapsekit.scenarios import (
    homogeneous_uniform_model,
    nb_regression_model,
    poisson_gamma_model,
    power_density_model,
    uniform_normal_model,
)

TIGHT = QuadratureSpec(abs_tol=1e-12, rel_tol=1e-10)


def phi(t):
    return np.exp(-0.5 * np.asarray(t) ** 2) / math.sqrt(2 * math.pi)


class TestMarginalMean:
    def test_uniform_normal_at_one(self):
        model = uniform_normal_model()
        got = marginal_mean(model, 1.0, TIGHT)
        # Oracle: direct quadrature of the conditional mean against phi.
        oracle, _ = sci_integrate.quad(
            lambda w: 0.5 * (1.0 + (w - 1.0) ** 2) * float(phi(w - 1.0)), -np.inf, np.inf
        )
        assert abs(got.value - 1.0) <= 1e-9
        assert abs(got.value - oracle) <= 1e-8

    def test_homogeneous_uniform_is_x(self):
        model = homogeneous_uniform_model()
        for x in (0.5, 1.0, 2.0):
            assert abs(marginal_mean(model, x, TIGHT).value - x) <= 1e-9

    def test_poisson_gamma_identity_mean(self):
        model = poisson_gamma_model(0.0, 0.0)
        got = marginal_mean(model, 1.0, TIGHT)
        assert abs(got.value - 1.0) <= 1e-9

    def test_mean_and_density_paths_agree(self):
        model = uniform_normal_model()
        for x in (0.5, 1.5):
            via_mean = marginal_mean(model, x, TIGHT, via="mean").value
            via_density = marginal_mean(model, x, TIGHT, via="density").value
            assert abs(via_mean - via_density) <= 1e-5

    def test_missing_capability(self):
        model = ConditionalModel(
            covariate=CovariateLaw.from_family(lambda x: dist.normal(x, 1.0)),
            mean_yxw=lambda x, w: x + 0.0 * np.asarray(w),
        )
        with pytest.raises(MissingCapability):
            marginal_density(model, 0.5, 1.0, TIGHT)


class TestMarginalDensity:
    def test_power_density_closed_form(self):
        model = power_density_model()
        got = marginal_density(model, 0.05, 1.0, TIGHT)
        assert abs(got.value - 2.0) <= 1e-4

    def test_tempered_closed_form(self):
        model = power_density_model(lam=1.0)
        got = marginal_density(model, 0.05, 1.0, TIGHT)
        assert abs(got.value - 3.0) <= 1e-4

    def test_w_free_density_reduces_to_conditional(self):
        def density(y, x, w):
            return np.exp(-0.5 * (np.asarray(y) - x) ** 2) / math.sqrt(2 * math.pi) + 0.0 * np.asarray(w)

        model = ConditionalModel(
            covariate=CovariateLaw.from_family(lambda x: dist.normal(0.0, 1.0)),
            density_yxw=density,
            support_y=SupportRule.fixed(-math.inf, math.inf),
        )
        for y in (-0.5, 0.2, 1.0):
            got = marginal_density(model, y, 0.7, TIGHT).value
            want = float(density(y, 0.7, 0.0))
            assert abs(got - want) <= 1e-9

    def test_nonnegative_and_normalizes(self):
        model = power_density_model()
        x = 1.0
        upper = (x * x + 1.0) ** (-1.0 / x)
        total = integrate(
            lambda y: np.array(
                [marginal_density(model, float(v), x, TIGHT).value for v in np.atleast_1d(y)]
            ),
            Interval(0.0, upper),
            QuadratureSpec(abs_tol=1e-9, rel_tol=1e-8),
        )
        assert abs(total.value - 1.0) <= 1e-4


class TestMarginalCdf:
    def test_limits(self):
        model = uniform_normal_model()
        assert marginal_cdf(model, -1.0, 1.0, TIGHT).value == pytest.approx(0.0, abs=1e-10)
        # y above every reachable support value: c = x^2+(w-x)^2 is unbounded,
        # but the covariate mass beyond |w-x| ~ 8 is negligible.
        got = marginal_cdf(model, 80.0, 1.0, TIGHT).value
        assert abs(got - 1.0) <= 1e-8

    def test_against_double_quadrature_oracle(self):
        model = uniform_normal_model()
        y, x = 0.5, 1.0
        got = marginal_cdf(model, y, x, TIGHT).value

        def inner(w):
            c = x * x + (w - x) ** 2
            return min(y / c, 1.0) * float(phi(w - x))

        oracle, _ = sci_integrate.quad(inner, -np.inf, np.inf, epsabs=1e-12)
        assert abs(got - oracle) <= 1e-6

    def test_monotone_on_grid(self):
        model = uniform_normal_model()
        ys = np.linspace(0.01, 6.0, 50)
        vals = [marginal_cdf(model, float(y), 1.0, TIGHT).value for y in ys]
        assert all(b >= a - 1e-9 for a, b in zip(vals, vals[1:]))


class TestMarginalPmf:
    def test_geometric_values(self):
        model = poisson_gamma_model(0.0, 0.0)
        # Oracle: quadrature of exp(-w) * Gamma(1,1) density.
        oracle0, _ = sci_integrate.quad(lambda w: math.exp(-2.0 * w), 0, np.inf)
        got0 = marginal_pmf(model, 0, 1.0, TIGHT).value
        assert abs(got0 - 0.5) <= 1e-10
        assert abs(got0 - oracle0) <= 1e-9
        got3 = marginal_pmf(model, 3, 1.0, TIGHT).value
        assert abs(got3 - 0.0625) <= 1e-10

    def test_nb_regression_matches_closed_form(self):
        theta = 2.0
        model = nb_regression_model(0.1, 0.3, theta)
        for x in (0.0, 1.0):
            lam = math.exp(0.1 + 0.3 * x)
            fam = dist.negative_binomial(theta, theta / (theta + lam))
            for y in range(0, 51):
                got = marginal_pmf(model, y, x, TIGHT).value
                assert abs(got - dist.pdf_or_pmf(fam, float(y))) <= 1e-8

    def test_series_reaches_unit_mass(self):
        model = poisson_gamma_model(0.1, 0.3)
        probs = pmf_series(model, 1.0, TIGHT)
        assert abs(probs.sum() - 1.0) <= 1e-6

    def test_requires_count_kind(self):
        model = uniform_normal_model()
        with pytest.raises(MissingCapability):
            marginal_pmf(model, 1, 1.0, TIGHT)


class TestValidate:
    def test_uniform_normal_validates(self):
        uniform_normal_model().validate()

    def test_bad_covariate_caught(self):
        model = ConditionalModel(
            covariate=CovariateLaw.from_density(
                lambda w, x: 2.0 * np.exp(-0.5 * np.asarray(w) ** 2) / math.sqrt(2 * math.pi),
                Interval(-math.inf, math.inf),
            ),
            mean_yxw=lambda x, w: x + 0.0 * np.asarray(w),
        )
        with pytest.raises(InvalidParams):
            model.validate()

    def test_mean_density_mismatch_caught(self):
        model = ConditionalModel(
            covariate=CovariateLaw.from_family(lambda x: dist.normal(x, 1.0)),
            mean_yxw=lambda x, w: 10.0 + 0.0 * np.asarray(w),  # wrong on purpose
            density_yxw=lambda y, x, w: np.ones_like(np.asarray(y) + 0.0 * np.asarray(w)),
            support_y=SupportRule.fixed(0.0, 1.0),
        )
        with pytest.raises(InvalidParams):
            model.validate()


class TestHomogeneityProbe:
    def test_homogeneous_uniform_mean(self):
        report = homogeneity_probe(
            homogeneous_uniform_model(), [0.5, 1.0, 2.0], [0.5, 1.0, 2.0], "mean"
        )
        assert report.homogeneous
        assert report.max_deviation <= 1e-12

    def test_uniform_normal_mean_varies(self):
        report = homogeneity_probe(
            uniform_normal_model(), [1.0], [0.0, 1.0, 2.0], "mean"
        )
        assert not report.homogeneous
        assert report.max_deviation > 0.4

    def test_power_density_y_slope_constant_in_w(self):
        report = homogeneity_probe(
            power_density_model(),
            [0.75, 1.0, 1.5],
            [0.0, 1.0, 2.5],
            "log-density-slope-y",
            y_grid=[0.02, 0.05],
        )
        assert report.homogeneous

    def test_density_probe_needs_y_grid(self):
        with pytest.raises(InvalidParams):
            homogeneity_probe(uniform_normal_model(), [1.0], [0.0, 1.0], "density")


class TestConditionFromJoint:
    def test_full_independence_factorizes(self):
        def joint(x, y, w):
            return (
                np.exp(-0.5 * (np.asarray(x) ** 2 + np.asarray(y) ** 2 + np.asarray(w) ** 2))
                / (2 * math.pi) ** 1.5
            )

        model = condition_from_joint(JointDensitySpec(joint, (-6, 6), (-6, 6), (-6, 6)))
        for y, x, w in [(0.0, 0.3, -0.5), (0.7, -0.2, 1.0)]:
            got_d = float(np.asarray(model.density_yxw(y, x, np.asarray(w))))
            assert abs(got_d - float(phi(y))) <= 1e-6
            got_c = float(np.asarray(model.covariate.density(np.asarray(w), x)))
            assert abs(got_c - float(phi(w))) <= 1e-6

    def test_round_trip_on_forward_constructed_joint(self):
        # Forward-construct a joint from known conditionals, condition it
        # numerically, and recover the pieces.
        def joint(x, y, w):
            x, y, w = np.asarray(x), np.asarray(y), np.asarray(w)
            return (
                phi(x) * phi(w - x) * np.exp(-0.5 * (y - x - w) ** 2) / math.sqrt(2 * math.pi)
            )

        model = condition_from_joint(JointDensitySpec(joint, (-7, 7), (-9, 9), (-7, 7)))
        for x in (-0.5, 0.5):
            for w in (-0.5, 1.0):
                got = float(np.asarray(model.covariate.density(np.asarray(w), x)))
                assert abs(got - float(phi(w - x))) <= 1e-4
                for y in (-0.5, 1.0):
                    got_d = float(np.asarray(model.density_yxw(y, x, np.asarray(w))))
                    want = math.exp(-0.5 * (y - x - w) ** 2) / math.sqrt(2 * math.pi)
                    assert abs(got_d - want) <= 1e-4

    def test_unnormalized_joint_rejected(self):
        def joint(x, y, w):
            return 3.0 * np.exp(
                -0.5 * (np.asarray(x) ** 2 + np.asarray(y) ** 2 + np.asarray(w) ** 2)
            ) / (2 * math.pi) ** 1.5

        with pytest.raises(InvalidParams):
            condition_from_joint(JointDensitySpec(joint, (-6, 6), (-6, 6), (-6, 6)))
