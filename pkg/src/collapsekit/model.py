"""Conditional models (Y, X, W) and numerical marginalization over W.

A :class:`ConditionalModel` bundles a covariate law f(w|x) with whatever
parts of the response law the user can supply: E(Y|x,w), f(y|x,w) with
its (possibly (x,w)-dependent) support, F(y|x,w), and a sampler.  The
operations here produce marginal quantities by mixing the conditional
parts against f(w|x):

    E(Y|x)   = int E(Y|x,w) f(w|x) dw
    f(y|x)   = int f(y|x,w) f(w|x) dw     (0 outside the support rule)
    F(y|x)   = int F(y|x,w) f(w|x) dw
    P(Y=y|x) = int p(y|x,w) f(w|x) dw     (count responses)

:func:`condition_from_joint` turns an explicit trivariate density into a
ConditionalModel by one-dimensional quadrature normalizations, which is
how conditional-independence structure in (X, W) | Y is realised.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss

from . import distributions as dist
from .errors import (
    DegenerateConditional,
    InvalidParams,
    MissingCapability,
    NonFiniteEvaluation,
)
from .numerics import (
    DiffSpec,
    EstimatedReal,
    Interval,
    QuadratureSpec,
    differentiate,
    gauss_hermite_expectation,
    integrate,
)


@lru_cache(maxsize=16)
def _legendre_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    return leggauss(n)


def _gl_nodes(a: float, b: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = _legendre_rule(n)
    h = 0.5 * (b - a)
    return 0.5 * (a + b) + h * x, h * w


@dataclass(frozen=True)
class SupportRule:
    """Response support, possibly depending on (x, w).

    ``lower`` and ``upper`` are callables (x, w) -> bound; they must
    broadcast over numpy arrays.
    """

    lower: Callable
    upper: Callable
    kind: str = "parametric-interval"

    @staticmethod
    def fixed(lo: float, hi: float) -> "SupportRule":
        return SupportRule(lambda x, w: lo, lambda x, w: hi, kind="fixed-interval")

    def bounds(self, x, w):
        return self.lower(x, w), self.upper(x, w)


class CovariateLaw:
    """The law f(w|x), either a named family or a raw density."""

    def __init__(self, family_at=None, density=None, support_at=None, sampler=None):
        if family_at is None and density is None:
            raise InvalidParams("covariate law needs a family or a density")
        self._family_at = family_at
        self._density = density
        self._support_at = support_at
        self._sampler = sampler

    @staticmethod
    def from_family(family_at: Callable[[float], dist.Family]) -> "CovariateLaw":
        return CovariateLaw(family_at=family_at)

    @staticmethod
    def from_density(density, support: Interval, sampler=None) -> "CovariateLaw":
        return CovariateLaw(
            density=density, support_at=lambda x: support, sampler=sampler
        )

    def family_at(self, x: float) -> dist.Family | None:
        return self._family_at(x) if self._family_at is not None else None

    def density(self, w, x: float):
        if self._family_at is not None:
            return dist.pdf_or_pmf(self._family_at(x), w)
        return self._density(w, x)

    def support(self, x: float) -> Interval:
        if self._family_at is not None:
            return dist.support(self._family_at(x))
        return self._support_at(x)

    def gaussian_form(self, x: float) -> tuple[float, float] | None:
        """(mean, sd) when f(w|x) is an exact Gaussian, else None."""
        fam = self.family_at(x)
        if fam is None:
            return None
        if fam.tag == "normal":
            return fam.params
        if fam.tag == "tempered-normal":
            return fam.params[0] - fam.params[1], 1.0
        return None

    def typical(self, x: float) -> float:
        fam = self.family_at(x)
        if fam is not None:
            return dist.mean(fam)
        s = self.support(x)
        if s.finite:
            return 0.5 * (s.lower + s.upper)
        return 0.0 if not math.isfinite(s.lower) else s.lower + 1.0

    def sample(self, x: float, n: int, rng: np.random.Generator) -> np.ndarray:
        if self._family_at is not None:
            return dist.sample_with(self._family_at(x), n, rng)
        if self._sampler is not None:
            return self._sampler(x, n, rng)
        raise MissingCapability("covariate law has no sampler")

    def sample_many(self, xs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """One draw of W | x per entry of xs, vectorized over families."""
        if self._family_at is None:
            return np.array([self.sample(float(x), 1, rng)[0] for x in xs])
        fams = [self._family_at(float(x)) for x in xs]
        tag = fams[0].tag
        params = np.array([f.params for f in fams])
        if tag == "normal":
            return rng.normal(params[:, 0], params[:, 1])
        if tag == "tempered-normal":
            return rng.normal(params[:, 0] - params[:, 1], 1.0)
        if tag == "uniform":
            return rng.uniform(params[:, 0], params[:, 1])
        if tag == "gamma":
            return rng.gamma(params[:, 1], 1.0 / params[:, 0])
        return np.array([dist.sample_with(f, 1, rng)[0] for f in fams])


@dataclass(frozen=True)
class ConditionalModel:
    """Immutable evaluable description of (Y, X, W)."""

    covariate: CovariateLaw
    y_kind: str = "continuous"
    mean_yxw: Callable | None = None
    density_yxw: Callable | None = None
    support_y: SupportRule | None = None
    cdf_yxw: Callable | None = None
    sampler_yxw: Callable | None = None
    name: str = ""

    def __post_init__(self):
        if self.y_kind not in ("continuous", "binary", "count"):
            raise InvalidParams(f"unknown y_kind {self.y_kind!r}")
        if self.mean_yxw is None and self.density_yxw is None:
            raise InvalidParams("model needs mean_yxw or density_yxw")

    @property
    def capabilities(self) -> frozenset[str]:
        caps = set()
        if self.mean_yxw is not None:
            caps.add("mean")
        if self.density_yxw is not None:
            caps.add("density")
        if self.cdf_yxw is not None:
            caps.add("cdf")
        if self.sampler_yxw is not None:
            caps.add("sampler")
        return frozenset(caps)

    def require(self, cap: str):
        if cap not in self.capabilities:
            raise MissingCapability(
                f"model {self.name or '<anonymous>'} lacks the {cap!r} part"
            )

    def density_at(self, y, x, w):
        """f(y|x,w), zeroed outside the declared support rule."""
        self.require("density")
        vals = np.asarray(self.density_yxw(y, x, w), dtype=float)
        if self.support_y is not None:
            lo, hi = self.support_y.bounds(x, w)
            inside = (np.asarray(y) > lo) & (np.asarray(y) < hi)
            vals = np.where(inside, vals, 0.0)
        if vals.ndim == 0:
            return float(vals)
        return vals

    def cdf_at(self, y, x, w):
        self.require("cdf")
        return self.cdf_yxw(y, x, w)

    def validate(self, probe_xs=(0.5, 1.0, 2.0), tol_norm=1e-6, tol_mean=1e-6):
        """Registration-time spot checks at a few x values.

        Checks that f(w|x) integrates to one and, when both the mean and
        density parts are present, that they agree at a typical w.
        """
        spec = QuadratureSpec(abs_tol=1e-10, rel_tol=1e-9)
        for x in probe_xs:
            total = integrate(
                lambda w: self.covariate.density(w, x), self.covariate.support(x), spec
            )
            if abs(total.value - 1.0) > tol_norm:
                raise InvalidParams(
                    f"f(w|x={x}) integrates to {total.value!r}, not 1"
                )
            if self.mean_yxw is not None and self.density_yxw is not None:
                w0 = self.covariate.typical(x)
                lo, hi = self.support_y.bounds(x, w0)
                m_direct = float(self.mean_yxw(x, w0))
                m_int = integrate(
                    lambda y: y * self.density_at(y, x, w0), Interval(lo, hi), spec
                )
                if abs(m_direct - m_int.value) > tol_mean * max(1.0, abs(m_direct)):
                    raise InvalidParams(
                        f"mean/density mismatch at x={x}: {m_direct} vs {m_int.value}"
                    )
        return self


def preferred_mixing_spec(model: ConditionalModel, x: float, base: QuadratureSpec) -> QuadratureSpec:
    """Swap in the Hermite rule when the covariate is exactly Gaussian."""
    if base.method == "gauss-hermite":
        return base
    if model.covariate.gaussian_form(x) is not None:
        return QuadratureSpec(
            method="gauss-hermite",
            abs_tol=base.abs_tol,
            rel_tol=base.rel_tol,
            max_subdivisions=base.max_subdivisions,
            hermite_nodes=base.hermite_nodes,
        )
    return base


def mix_over_covariate(model: ConditionalModel, g: Callable, x: float, spec: QuadratureSpec | None = None) -> EstimatedReal:
    """E_{W|x}[g(W)] by the method requested in ``spec``."""
    spec = spec or QuadratureSpec()
    if spec.method == "gauss-hermite":
        form = model.covariate.gaussian_form(x)
        if form is None:
            raise InvalidParams(
                "gauss-hermite mixing requires a Gaussian-family covariate"
            )
        mu, sd = form
        return gauss_hermite_expectation(g, mu, sd, spec)
    return integrate(
        lambda w: np.asarray(g(w), dtype=float) * model.covariate.density(w, x),
        model.covariate.support(x),
        spec,
    )


def _mean_from_density(model: ConditionalModel, x: float, w: float, spec: QuadratureSpec) -> float:
    if model.y_kind == "count":
        total = 0.0
        acc = 0.0
        for k in range(100000):
            p = float(model.density_at(float(k), x, w))
            total += k * p
            acc += p
            if acc > 1.0 - 1e-12 and k > 2:
                break
        return total
    lo, hi = model.support_y.bounds(x, w)
    return integrate(lambda y: y * model.density_at(y, x, w), Interval(lo, hi), spec).value


def marginal_mean(
    model: ConditionalModel,
    x: float,
    spec: QuadratureSpec | None = None,
    via: str = "auto",
) -> EstimatedReal:
    """E(Y|x) = E_{W|x}[E(Y|x,W)].

    ``via`` selects which declared part supplies the inner mean:
    "mean", "density", or "auto" (mean when present).
    """
    spec = spec or QuadratureSpec()
    if via == "auto":
        via = "mean" if model.mean_yxw is not None else "density"
    if via == "mean":
        model.require("mean")
        return mix_over_covariate(model, lambda w: model.mean_yxw(x, w), x, spec)
    model.require("density")
    inner_spec = QuadratureSpec(
        abs_tol=spec.abs_tol, rel_tol=spec.rel_tol, max_subdivisions=spec.max_subdivisions
    )

    def g(warr):
        ws = np.atleast_1d(np.asarray(warr, dtype=float))
        return np.array([_mean_from_density(model, x, float(w), inner_spec) for w in ws])

    return mix_over_covariate(model, g, x, spec)


def marginal_density(
    model: ConditionalModel, y: float, x: float, spec: QuadratureSpec | None = None
) -> EstimatedReal:
    """f(y|x) as the covariate mixture of f(y|x,w)."""
    model.require("density")
    return mix_over_covariate(model, lambda w: model.density_at(y, x, w), x, spec)


def marginal_cdf(
    model: ConditionalModel, y: float, x: float, spec: QuadratureSpec | None = None
) -> EstimatedReal:
    """F(y|x); mixes F(y|x,w) when declared, else integrates the density."""
    spec = spec or QuadratureSpec()
    if model.cdf_yxw is not None:
        return mix_over_covariate(model, lambda w: model.cdf_yxw(y, x, w), x, spec)
    model.require("density")
    if model.y_kind == "count":
        total = 0.0
        err = 0.0
        evals = 0
        for k in range(int(math.floor(y)) + 1):
            part = marginal_pmf(model, k, x, spec)
            total += part.value
            err += part.err_estimate
            evals += part.evaluations
        return EstimatedReal(total, err, max(evals, 1))
    lo_env = model.support_y.bounds(x, model.covariate.typical(x))[0]
    lo = min(lo_env, y - 1.0)
    inner = integrate(
        lambda yy: np.array(
            [marginal_density(model, float(v), x, spec).value for v in np.atleast_1d(yy)]
        ),
        Interval(lo, y),
        spec,
    )
    return inner


def marginal_pmf(
    model: ConditionalModel, y: int, x: float, spec: QuadratureSpec | None = None
) -> EstimatedReal:
    """P(Y=y|x) for count responses."""
    if model.y_kind != "count":
        raise MissingCapability("marginal_pmf requires a count response")
    model.require("density")
    if y < 0 or y != int(y):
        return EstimatedReal(0.0, 0.0, 1)
    return mix_over_covariate(model, lambda w: model.density_at(float(y), x, w), x, spec)


def pmf_series(
    model: ConditionalModel,
    x: float,
    spec: QuadratureSpec | None = None,
    tail: float = 1e-10,
    max_terms: int = 5000,
) -> np.ndarray:
    """Marginal pmf values 0..K where K is the first index with
    cumulative mass above 1 - tail."""
    probs = []
    acc = 0.0
    for k in range(max_terms):
        p = marginal_pmf(model, k, x, spec).value
        probs.append(p)
        acc += p
        if acc > 1.0 - tail:
            break
    return np.array(probs)


@dataclass(frozen=True)
class HomogeneityReport:
    which: str
    max_deviation: float
    homogeneous: bool
    tol: float


def homogeneity_probe(
    model: ConditionalModel,
    x_grid,
    w_grid,
    which: str,
    y_grid=None,
    tol: float = 1e-6,
    dspec: DiffSpec | None = None,
) -> HomogeneityReport:
    """Sup deviation of a conditional quantity across covariate values.

    ``which`` is one of mean, density, log-density-slope-y,
    log-density-slope-x; the reference value is taken at the first
    w-grid entry.
    """
    dspec = dspec or DiffSpec()
    w_ref = w_grid[0]
    needs_y = which in ("density", "log-density-slope-y", "log-density-slope-x")
    if needs_y and (y_grid is None or len(y_grid) == 0):
        raise InvalidParams(f"probe {which!r} needs a y grid")

    def quantity(x, w, y=None):
        if which == "mean":
            model.require("mean")
            return float(model.mean_yxw(x, w))
        model.require("density")
        if which == "density":
            return float(model.density_at(y, x, w))
        if which == "log-density-slope-y":
            fn = lambda yy: math.log(max(float(model.density_at(yy, x, w)), 1e-300))
            step = _log_slope_step(model, y, x, w)
            return differentiate(fn, y, DiffSpec(step, dspec.richardson_levels)).value
        fn = lambda xx: math.log(max(float(model.density_at(y, xx, w)), 1e-300))
        return differentiate(fn, x, dspec).value

    worst = 0.0
    for x in x_grid:
        for y in (y_grid if needs_y else [None]):
            ref = quantity(x, w_ref, y)
            for w in w_grid[1:]:
                worst = max(worst, abs(quantity(x, w, y) - ref))
    return HomogeneityReport(which, worst, worst <= tol, tol)


def _log_slope_step(model: ConditionalModel, y: float, x: float, w, frac: float = 0.02) -> float:
    """Step for y-slopes of log densities, scaled to the local support."""
    step = frac * max(1.0, abs(y))
    if model.support_y is not None:
        lo, hi = model.support_y.bounds(x, w)
        lo = float(np.max(np.asarray(lo, dtype=float)))
        hi = float(np.min(np.asarray(hi, dtype=float)))
        gap = min(y - lo, hi - y) if math.isfinite(hi) else y - lo
        if gap > 0:
            step = min(step, frac * gap)
    return max(step, 1e-12)


@dataclass(frozen=True)
class JointDensitySpec:
    """An evaluable trivariate density on a declared box."""

    density: Callable  # f(x, y, w), broadcasting over arrays
    x_box: tuple[float, float]
    y_box: tuple[float, float]
    w_box: tuple[float, float]
    grid_res: int = 9
    nodes: int = 96

    def __post_init__(self):
        for lo, hi in (self.x_box, self.y_box, self.w_box):
            if not lo < hi:
                raise InvalidParams("box bounds must satisfy lo < hi")
        if self.grid_res < 2 or self.nodes < 8:
            raise InvalidParams("grid_res >= 2 and nodes >= 8 required")


def condition_from_joint(spec: JointDensitySpec) -> ConditionalModel:
    """Build a ConditionalModel from an explicit joint density.

    f(w|x) and f(y|x,w) come from one-dimensional Gauss-Legendre
    normalizations of the joint.  The joint must integrate to 1 over
    its box within 1e-4.
    """
    yn, yw = _gl_nodes(*spec.y_box, spec.nodes)
    wn, ww = _gl_nodes(*spec.w_box, spec.nodes)

    def y_marginal(x, warr):
        """m(x, w) = int f(x, y, w) dy, vectorized over w."""
        ws = np.atleast_1d(np.asarray(warr, dtype=float))
        vals = spec.density(x, yn[:, None], ws[None, :])
        return yw @ np.asarray(vals, dtype=float)

    def x_normalizer(x):
        return float(ww @ y_marginal(x, wn))

    total = integrate(
        lambda xs: np.array([x_normalizer(float(v)) for v in np.atleast_1d(xs)]),
        Interval(*spec.x_box),
        QuadratureSpec(abs_tol=1e-8, rel_tol=1e-7),
    )
    if abs(total.value - 1.0) > 1e-4:
        raise InvalidParams(
            f"joint density integrates to {total.value!r} over its box, not 1"
        )

    def cov_density(warr, x):
        d = x_normalizer(x)
        if d < 1e-12:
            raise DegenerateConditional(f"marginal of x at {x} is {d!r}")
        out = y_marginal(x, warr) / d
        return float(out[0]) if np.ndim(warr) == 0 else out

    def density_yxw(y, x, w):
        m = y_marginal(x, w)
        m = np.where(m < 1e-300, np.nan, m)
        if np.any(np.asarray(m) < 1e-12):
            raise DegenerateConditional("conditioning event has negligible density")
        vals = np.asarray(spec.density(x, y, w), dtype=float) / m
        return float(vals[0]) if np.ndim(y) == 0 and np.ndim(w) == 0 else vals

    model = ConditionalModel(
        covariate=CovariateLaw.from_density(cov_density, Interval(*spec.w_box)),
        y_kind="continuous",
        density_yxw=density_yxw,
        support_y=SupportRule.fixed(*spec.y_box),
        name="conditioned-joint",
    )
    return model
