"""Quadrature and differentiation kernels against independent oracles.

scipy.integrate.quad serves as the independent oracle for the adaptive
integrator; closed forms from calculus anchor the differentiation
checks.  Expected values are frozen, never read back from the code
under test.
"""

import math

import numpy as np
import pytest
from scipy import integrate as sci_integrate

from collapsekit.errors import (
    InvalidParams,
    NonConvergence,
    NonFiniteEvaluation,
    NonPositiveDensity,
    StepUnderflow,
)
from collapsekit.numerics import (
    DiffSpec,
    EstimatedReal,
    Interval,
    QuadratureSpec,
    differentiate,
    gauss_hermite_expectation,
    integrate,
    mixed_partial,
)

INF = math.inf


def phi(t):
    return np.exp(-0.5 * np.asarray(t) ** 2) / math.sqrt(2.0 * math.pi)


class TestTypes:
    def test_interval_requires_order(self):
        with pytest.raises(InvalidParams):
            Interval(2.0, 1.0)
        with pytest.raises(InvalidParams):
            Interval(1.0, 1.0)
        assert not Interval(0.0, INF).finite
        assert Interval(0.0, 1.0).finite

    def test_spec_validation(self):
        with pytest.raises(InvalidParams):
            QuadratureSpec(abs_tol=0.0)
        with pytest.raises(InvalidParams):
            QuadratureSpec(hermite_nodes=1)
        with pytest.raises(InvalidParams):
            QuadratureSpec(method="simpson")
        with pytest.raises(InvalidParams):
            DiffSpec(base_step=-1.0)
        with pytest.raises(InvalidParams):
            DiffSpec(richardson_levels=-1)

    def test_estimated_real_validation(self):
        with pytest.raises(InvalidParams):
            EstimatedReal(1.0, -1.0, 3)
        with pytest.raises(InvalidParams):
            EstimatedReal(1.0, 0.0, 0)


class TestIntegrate:
    def test_standard_normal_normalizes(self):
        r = integrate(phi, Interval(-INF, INF))
        assert abs(r.value - 1.0) <= 1e-10
        assert r.evaluations > 0

    def test_cubic_odd_moment_cancels(self):
        r = integrate(lambda t: t**3 * phi(t), Interval(-INF, INF))
        assert abs(r.value) <= 1e-10

    def test_polynomial_on_unit_interval(self):
        r = integrate(lambda x: x**2, Interval(0.0, 1.0))
        assert abs(r.value - 1.0 / 3.0) <= 1e-12

    @pytest.mark.parametrize("power", [1, 3, 5])
    def test_odd_gaussian_moments_vanish(self, power):
        r = integrate(lambda t: t**power * phi(t), Interval(-INF, INF))
        assert abs(r.value) <= 1e-9

    def test_half_line_gamma_mass(self):
        # Gamma(rate 2, shape 3) normalization over (0, inf).
        def f(w):
            w = np.asarray(w)
            return np.where(w > 0, np.exp(3 * math.log(2.0) + 2 * np.log(np.where(w > 0, w, 1.0)) - 2 * w - math.lgamma(3.0)), 0.0)

        r = integrate(f, Interval(0.0, INF))
        assert abs(r.value - 1.0) <= 1e-9

    def test_matches_scipy_oracle_on_random_smooth(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            a, b, c = rng.normal(size=3)

            def f(t, a=a, b=b, c=c):
                return (a + b * t + c * t**2) * np.exp(-0.5 * t**2)

            ours = integrate(f, Interval(-INF, INF))
            oracle, _ = sci_integrate.quad(f, -np.inf, np.inf)
            assert abs(ours.value - oracle) <= 1e-8

    def test_linearity(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            a, b = rng.normal(size=2)
            f = lambda t: np.exp(-(t**2)) * (1 + t**2)
            g = lambda t: np.cos(t) * np.exp(-0.5 * t**2)
            dom = Interval(-INF, INF)
            combined = integrate(lambda t: a * f(t) + b * g(t), dom)
            parts = a * integrate(f, dom).value + b * integrate(g, dom).value
            tol = combined.err_estimate + 1e-9 * (1 + abs(parts))
            assert abs(combined.value - parts) <= max(tol, 1e-9)

    def test_nonconvergence_raises(self):
        spec = QuadratureSpec(abs_tol=1e-14, rel_tol=1e-14, max_subdivisions=3)

        def jumpy(t):
            # Jump at 1/3 so no seed-panel boundary hides it.
            return np.where(np.asarray(t) < 1.0 / 3.0, 0.0, 1.0)

        with pytest.raises(NonConvergence):
            integrate(jumpy, Interval(0.0, 1.0), spec)

    def test_nonfinite_integrand_raises(self):
        def bad(t):
            return np.where(np.asarray(t) > 0.5, np.nan, 1.0)

        with pytest.raises(NonFiniteEvaluation):
            integrate(bad, Interval(0.0, 1.0))

    def test_scalar_only_integrand_is_accepted(self):
        r = integrate(lambda t: float(t) ** 2, Interval(0.0, 1.0))
        assert abs(r.value - 1.0 / 3.0) <= 1e-12


class TestGaussHermite:
    def test_mean_recovered(self):
        for x in (-1.0, 0.3, 2.0):
            r = gauss_hermite_expectation(lambda t: t, x, 1.0)
            assert abs(r.value - x) <= 1e-12

    def test_second_central_moment(self):
        x = 0.7
        r = gauss_hermite_expectation(lambda t: (t - x) ** 2, x, 1.0)
        oracle = integrate(lambda t: (t - x) ** 2 * phi(t - x), Interval(-INF, INF))
        assert abs(r.value - 1.0) <= 1e-12
        assert abs(r.value - oracle.value) <= 1e-9

    def test_shifted_square_moment(self):
        x = 1.0
        r = gauss_hermite_expectation(lambda t: x**2 + (t - x) ** 2, x, 1.0)
        assert abs(r.value - 2.0) <= 1e-12

    def test_polynomial_exactness(self):
        rng = np.random.default_rng(5)
        coeffs = rng.normal(size=8)
        # Degree 7 is far below 2 * 64, so the rule is exact.
        moments = [1, 0, 1, 0, 3, 0, 15, 0]  # standard normal moments

        def g(t):
            return sum(c * t**k for k, c in enumerate(coeffs))

        want = sum(c * m for c, m in zip(coeffs, moments))
        r = gauss_hermite_expectation(g, 0.0, 1.0)
        assert abs(r.value - want) <= 1e-10 * (1 + abs(want))

    def test_agrees_with_adaptive_on_random_smooth(self):
        rng = np.random.default_rng(13)
        for _ in range(50):
            a, b, c = rng.normal(size=3) * 0.5
            mean, sd = rng.normal(), 0.5 + rng.random()

            def g(t, a=a, b=b, c=c):
                return np.exp(a * np.sin(t * 0.7)) + b * t + c * t**2

            gh = gauss_hermite_expectation(g, mean, sd)
            ad = integrate(
                lambda t: g(t) * phi((t - mean) / sd) / sd, Interval(-INF, INF)
            )
            assert abs(gh.value - ad.value) <= 2 * (gh.err_estimate + ad.err_estimate) + 1e-10

    def test_sd_must_be_positive(self):
        with pytest.raises(InvalidParams):
            gauss_hermite_expectation(lambda t: t, 0.0, 0.0)


class TestDifferentiate:
    def test_square(self):
        r = differentiate(lambda x: x**2, 1.0)
        assert abs(r.value - 2.0) <= 1e-8

    def test_normal_density_flat_at_zero(self):
        r = differentiate(lambda x: float(phi(x)), 0.0)
        assert abs(r.value) <= 1e-9

    def test_quadratic_mean_slope(self):
        r = differentiate(lambda x: 0.5 * (x**2 + 1.0), 1.5)
        assert abs(r.value - 1.5) <= 1e-9

    def test_cubic_exact(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            a3, a2, a1, a0 = rng.normal(size=4)
            at = rng.normal()

            def f(x):
                return a3 * x**3 + a2 * x**2 + a1 * x + a0

            want = 3 * a3 * at**2 + 2 * a2 * at + a1
            r = differentiate(f, at)
            assert abs(r.value - want) <= 1e-9 * (1 + abs(want))

    def test_one_sided_fallback_at_boundary(self):
        def f(x):
            if x < 0:
                return float("nan")
            return x**2 + x

        r = differentiate(f, 0.0)
        assert abs(r.value - 1.0) <= 1e-6

    def test_step_underflow(self):
        with pytest.raises(StepUnderflow):
            differentiate(lambda x: float("nan"), 0.0)


class TestMixedPartial:
    def test_log_bilinear(self):
        r = mixed_partial(lambda x, y: math.exp(x * y), 0.7, -0.3)
        assert abs(r.value - 1.0) <= 1e-5

    def test_product_factorization_is_zero(self):
        f = lambda x, y: (1 + x * x) * math.exp(-y * y)
        # Default (tiny) steps sit on the log-stencil roundoff floor.
        assert abs(mixed_partial(f, 0.4, 0.2).value) <= 1e-4
        # Wider steps expose the exact separability.
        r = mixed_partial(f, 0.4, 0.2, step_x=1e-3, step_y=1e-3)
        assert abs(r.value) <= 1e-8

    def test_power_density_inverse_y(self):
        w = 2.0

        def f(x, y):
            return x * y ** (x - 1.0) * (x * x + (w - x) ** 2)

        r = mixed_partial(f, 1.0, 0.05)
        assert abs(r.value - 20.0) <= 1e-3

    def test_order_symmetry(self):
        def f(x, y):
            return math.exp(0.3 * x * y + 0.1 * x - 0.2 * y + 0.05 * x * x * y)

        a = mixed_partial(f, 0.5, 0.8)
        b = mixed_partial(lambda y, x: f(x, y), 0.8, 0.5)
        assert abs(a.value - b.value) <= 1e-6

    def test_nonpositive_density_raises(self):
        with pytest.raises(NonPositiveDensity):
            mixed_partial(lambda x, y: x - y, 0.0, 0.0)
