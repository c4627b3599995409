"""The association measures, evaluated conditionally and marginally.

Five measures are supported:

* EDF  — d E(Y|x) / dx, the expectation-dependence slope;
* MDI  — d^2 log f(y|x) / dx dy, the mixed interaction derivative;
* LED  — d log E(Y|x) / dx, the log-expectation slope (log-link models);
* DDF  — d F(y|x) / dx, distribution dependence;
* MDI-binary — d/dx of the log-odds, the binary-response analogue of
  MDI with the y-derivative replaced by the adjacent-level difference.

Passing ``w`` evaluates the conditional measure at (x, w); omitting it
evaluates the marginal measure, which always differentiates the mixed
quantity (mean, density, or CDF after integrating over W) rather than
mixing derivatives — comparing those two orders is exactly what the
collapsibility checks are about.

Marginal quantities are quadrature products, so their derivatives use
wider steps than closed-form conditionals; :class:`MeasureSpec` carries
both step policies plus the quadrature tolerances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import distributions as dist
from .errors import (
    DegenerateProbability,
    InvalidParams,
    MissingCapability,
    NonFiniteEvaluation,
    NonPositiveMean,
)
from .model import (
    ConditionalModel,
    _log_slope_step,
    marginal_cdf,
    marginal_density,
    marginal_mean,
    mix_over_covariate,
    preferred_mixing_spec,
)
from .numerics import (
    DiffSpec,
    EstimatedReal,
    QuadratureSpec,
    differentiate,
    mixed_partial,
)

MEASURES = ("EDF", "MDI", "LED", "DDF", "MDI-binary")

MEAN_FLOOR = 1e-8  # below this, log-expectation slopes are refused


@dataclass(frozen=True)
class MeasureSpec:
    """Numeric policy for measure evaluation."""

    quad: QuadratureSpec = field(
        default_factory=lambda: QuadratureSpec(abs_tol=1e-12, rel_tol=1e-10)
    )
    diff: DiffSpec = field(default_factory=DiffSpec)
    marginal_diff: DiffSpec = field(
        default_factory=lambda: DiffSpec(base_step=1e-3, richardson_levels=2)
    )
    mdi_frac: float = 0.02


def require_measure(model: ConditionalModel, measure: str):
    if measure not in MEASURES:
        raise InvalidParams(f"unknown measure {measure!r}")
    if measure == "EDF":
        model.require("mean")
    elif measure == "LED":
        model.require("mean")
    elif measure == "MDI":
        model.require("density")
    elif measure == "DDF":
        if "cdf" not in model.capabilities and "density" not in model.capabilities:
            raise MissingCapability("DDF needs a cdf or density part")
    else:  # MDI-binary
        if model.y_kind != "binary":
            raise MissingCapability("MDI-binary needs a binary response")
        model.require("mean")


def _array_richardson(estimates: list[np.ndarray], orders: list[int]):
    table = [np.asarray(e, dtype=float) for e in estimates]
    diag = [table[0]]
    for p in orders[: len(estimates) - 1]:
        factor = 2.0**p
        table = [
            (factor * table[k + 1] - table[k]) / (factor - 1.0)
            for k in range(len(table) - 1)
        ]
        diag.append(table[0])
    if len(diag) == 1:
        return diag[0], np.abs(diag[0]) * 1e-7 + 1e-15
    return diag[-1], np.abs(diag[-1] - diag[-2]) + 1e-16


def _diff_in_x(fn: Callable, x: float, spec: DiffSpec):
    """Vectorized central-difference derivative of fn(x) -> array."""
    h0 = spec.base_step * max(1.0, abs(x))
    ests = []
    for k in range(spec.richardson_levels + 1):
        h = h0 / 2.0**k
        ests.append((np.asarray(fn(x + h), dtype=float) - np.asarray(fn(x - h), dtype=float)) / (2.0 * h))
    value, err = _array_richardson(ests, [2, 4, 6, 8, 10][: spec.richardson_levels + 1])
    if not np.all(np.isfinite(value)):
        raise NonFiniteEvaluation("finite-difference stencil produced non-finite values")
    return value, err


def conditional_measure_fn(
    model: ConditionalModel,
    measure: str,
    x: float,
    y: float | None,
    mspec: MeasureSpec,
) -> Callable:
    """A vectorized w -> conditional-measure evaluator at fixed (x[, y])."""
    require_measure(model, measure)

    if measure == "EDF":

        def fn(w):
            val, _ = _diff_in_x(lambda xx: model.mean_yxw(xx, w), x, mspec.diff)
            return val

        return fn

    if measure == "LED":
        # Conditional means may be legitimately tiny deep in the
        # covariate tail (the log-slope stays finite there); only a
        # genuinely non-positive mean is refused on this path.  The
        # 1e-8 floor applies to the marginal mean in :func:`led`.

        def fn(w):
            def logmean(xx):
                m = np.asarray(model.mean_yxw(xx, w), dtype=float)
                if np.any(m <= 0.0) or not np.all(np.isfinite(m)):
                    raise NonPositiveMean(
                        f"conditional mean not positive at x={xx:.6g}"
                    )
                return np.log(m)

            val, _ = _diff_in_x(logmean, x, mspec.diff)
            return val

        return fn

    if measure == "MDI":
        if y is None:
            raise InvalidParams("MDI needs a y coordinate")

        def fn(w):
            hy = _log_slope_step(model, y, x, w, mspec.mdi_frac)
            hx = mspec.mdi_frac * max(1.0, abs(x))
            levels = mspec.diff.richardson_levels
            ests = []
            for k in range(levels + 1):
                sx, sy = hx / 2.0**k, hy / 2.0**k

                def logf(yy, xx):
                    v = np.asarray(model.density_at(yy, xx, w), dtype=float)
                    if np.any(v <= 0.0) or not np.all(np.isfinite(v)):
                        raise NonFiniteEvaluation(
                            f"log-density stencil left the support at (y={yy:.6g}, x={xx:.6g})"
                        )
                    return np.log(v)

                ests.append(
                    (
                        logf(y + sy, x + sx)
                        - logf(y - sy, x + sx)
                        - logf(y + sy, x - sx)
                        + logf(y - sy, x - sx)
                    )
                    / (4.0 * sx * sy)
                )
            val, _ = _array_richardson(ests, [2, 4, 6, 8, 10][: levels + 1])
            return val

        return fn

    if measure == "DDF":
        if y is None:
            raise InvalidParams("DDF needs a y coordinate")
        model.require("cdf")

        def fn(w):
            val, _ = _diff_in_x(lambda xx: model.cdf_yxw(y, xx, w), x, mspec.diff)
            return val

        return fn

    # MDI-binary: slope of the conditional log-odds.
    def fn(w):
        def logodds(xx):
            p = np.asarray(model.mean_yxw(xx, w), dtype=float)
            if np.any(p <= 1e-12) or np.any(p >= 1.0 - 1e-12):
                raise DegenerateProbability(
                    f"class probability degenerate at x={xx:.6g}"
                )
            return np.log(p) - np.log1p(-p)

        val, _ = _diff_in_x(logodds, x, mspec.diff)
        return val

    return fn


def _scalar(model, measure, x, y, w, mspec) -> EstimatedReal:
    fn = conditional_measure_fn(model, measure, x, y, mspec)
    arr = np.atleast_1d(np.asarray(w, dtype=float))
    vals = np.asarray(fn(arr), dtype=float)
    levels = mspec.diff.richardson_levels
    return EstimatedReal(float(vals[0]), 1e-9 * (abs(float(vals[0])) + 1.0), 2 * (levels + 1))


def _marginal_mean_fn(model: ConditionalModel, mspec: MeasureSpec) -> Callable:
    def mm(xx: float) -> float:
        spec = preferred_mixing_spec(model, xx, mspec.quad)
        return marginal_mean(model, xx, spec).value

    return mm


def edf(model: ConditionalModel, x: float, w=None, mspec: MeasureSpec | None = None) -> EstimatedReal:
    """Expectation-dependence slope at x, conditional on w when given."""
    mspec = mspec or MeasureSpec()
    if w is not None:
        return _scalar(model, "EDF", x, None, w, mspec)
    require_measure(model, "EDF")
    return differentiate(_marginal_mean_fn(model, mspec), x, mspec.marginal_diff)


def led(model: ConditionalModel, x: float, w=None, mspec: MeasureSpec | None = None) -> EstimatedReal:
    """Log-expectation-dependence slope; requires a positive mean."""
    mspec = mspec or MeasureSpec()
    if w is not None:
        return _scalar(model, "LED", x, None, w, mspec)
    require_measure(model, "LED")
    mm = _marginal_mean_fn(model, mspec)

    def logmean(xx: float) -> float:
        m = mm(xx)
        if m <= MEAN_FLOOR:
            raise NonPositiveMean(f"marginal mean {m!r} at x={xx:.6g} is not positive")
        return math.log(m)

    return differentiate(logmean, x, mspec.marginal_diff)


def mdi(model: ConditionalModel, y: float, x: float, w=None, mspec: MeasureSpec | None = None) -> EstimatedReal:
    """Mixed interaction derivative at (y, x), conditional when w given."""
    mspec = mspec or MeasureSpec()
    if w is not None:
        return _scalar(model, "MDI", x, y, w, mspec)
    require_measure(model, "MDI")
    w_typ = model.covariate.typical(x)
    hy = _log_slope_step(model, y, x, w_typ, mspec.mdi_frac)
    hx = mspec.mdi_frac * max(1.0, abs(x))

    def f(xx: float, yy: float) -> float:
        spec = preferred_mixing_spec(model, xx, mspec.quad)
        return marginal_density(model, yy, xx, spec).value

    return mixed_partial(f, x, y, mspec.diff, step_x=hx, step_y=hy)


def ddf(model: ConditionalModel, y: float, x: float, w=None, mspec: MeasureSpec | None = None) -> EstimatedReal:
    """Distribution-dependence slope dF(y|x)/dx."""
    mspec = mspec or MeasureSpec()
    if w is not None:
        return _scalar(model, "DDF", x, y, w, mspec)
    require_measure(model, "DDF")

    def fm(xx: float) -> float:
        spec = preferred_mixing_spec(model, xx, mspec.quad)
        return marginal_cdf(model, y, xx, spec).value

    return differentiate(fm, x, mspec.marginal_diff)


def mdi_binary(model: ConditionalModel, x: float, w=None, mspec: MeasureSpec | None = None) -> EstimatedReal:
    """Log-odds slope for binary responses."""
    mspec = mspec or MeasureSpec()
    if w is not None:
        return _scalar(model, "MDI-binary", x, None, w, mspec)
    require_measure(model, "MDI-binary")
    mm = _marginal_mean_fn(model, mspec)

    def logodds(xx: float) -> float:
        p = mm(xx)
        if p <= 1e-12 or p >= 1.0 - 1e-12:
            raise DegenerateProbability(f"marginal probability degenerate at x={xx:.6g}")
        return math.log(p) - math.log1p(-p)

    return differentiate(logodds, x, mspec.marginal_diff)


def conditional_average(
    model: ConditionalModel,
    measure: str,
    x: float,
    y: float | None = None,
    mspec: MeasureSpec | None = None,
) -> EstimatedReal:
    """E_{W|x}[conditional measure], the left side of the average checks.

    The measure stencil is evaluated inside the w-integral (integration
    happens last), matching the definition of the averaged measure.
    """
    mspec = mspec or MeasureSpec()
    fn = conditional_measure_fn(model, measure, x, y, mspec)
    spec = preferred_mixing_spec(model, x, mspec.quad)
    return mix_over_covariate(model, fn, x, spec)


def marginal_measure(
    model: ConditionalModel,
    measure: str,
    x: float,
    y: float | None = None,
    mspec: MeasureSpec | None = None,
) -> EstimatedReal:
    """The marginal measure, the right side of the average checks."""
    mspec = mspec or MeasureSpec()
    if measure == "EDF":
        return edf(model, x, mspec=mspec)
    if measure == "LED":
        return led(model, x, mspec=mspec)
    if measure == "MDI":
        if y is None:
            raise InvalidParams("MDI needs a y coordinate")
        return mdi(model, y, x, mspec=mspec)
    if measure == "DDF":
        if y is None:
            raise InvalidParams("DDF needs a y coordinate")
        return ddf(model, y, x, mspec=mspec)
    if measure == "MDI-binary":
        return mdi_binary(model, x, mspec=mspec)
    raise InvalidParams(f"unknown measure {measure!r}")


def correlation_mc(
    model: ConditionalModel,
    x_law: dist.Family,
    n: int,
    seed: dist.Seed,
) -> EstimatedReal:
    """Monte Carlo estimate of corr(Y, X) with a 3-sigma half width.

    Draws x ~ x_law, then w | x from the covariate law, then y from the
    model's sampler.  The generator is isolated per call.
    """
    if n < 10:
        raise InvalidParams("n must be at least 10")
    model.require("sampler")
    rng = np.random.default_rng(seed)
    xs = dist.sample_with(x_law, n, rng)
    ws = model.covariate.sample_many(xs, rng)
    ys = np.asarray(model.sampler_yxw(xs, ws, rng), dtype=float)
    r = float(np.corrcoef(xs, ys)[0, 1])
    band = 3.0 * (1.0 - r * r) / math.sqrt(max(n - 3, 1))
    return EstimatedReal(r, band, n)
