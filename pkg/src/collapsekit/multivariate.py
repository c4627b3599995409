"""Average collapsibility with a two-component covariate W = (W1, W2).

The standing hypothesis is W1 and W2 independent given X, declared by
the model builder; the conditional average then factors into an
iterated product quadrature against f(w1|x) f(w2|x).  Only the 1+1
split is implemented: the proof structure of the sufficient conditions
is fully exercised at two components, and iterated quadrature cost
grows geometrically beyond that.

A degenerate W1 (point mass) is supported by passing ``law_w1=None``
with ``w1_value`` set; the checks then reduce bit-for-bit to their
univariate counterparts on (Y, X, W2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .collapsibility import (
    AVERAGE,
    INDETERMINATE,
    NOT,
    CollapsibilityVerdict,
    GridSpec,
    PointRecord,
    ProbeResult,
)
from .errors import (
    FactorizationViolated,
    InvalidParams,
    MissingCapability,
    NumericalError,
)
from .measures import MeasureSpec, _array_richardson
from .model import CovariateLaw
from .numerics import EstimatedReal, QuadratureSpec, differentiate, gauss_hermite_expectation, integrate


@dataclass(frozen=True)
class SplitCovariateGrid:
    """Grid for bivariate-covariate checks."""

    x_points: tuple[float, ...]
    w1_points: tuple[float, ...] = ()
    w2_points: tuple[float, ...] = ()
    y_points: tuple[float, ...] | None = None
    tol_abs: float = 1e-5
    tol_rel: float = 1e-4

    def __post_init__(self):
        if len(self.x_points) == 0:
            raise InvalidParams("x_points must be nonempty")
        if self.tol_abs <= 0 or self.tol_rel <= 0:
            raise InvalidParams("tolerances must be positive")


@dataclass(frozen=True)
class BivariateCovariateModel:
    """(Y, X, W1, W2) with W1 and W2 conditionally independent given X."""

    law_w2: CovariateLaw
    law_w1: CovariateLaw | None = None
    w1_value: float = 0.0
    mean_yxw12: Callable | None = None  # (x, w1, w2) -> mean, broadcasting
    density_yxw12: Callable | None = None  # (y, x, w1, w2) -> density
    joint_w_density: Callable | None = None  # optional (w1, w2, x) for checking
    name: str = ""

    def __post_init__(self):
        if self.mean_yxw12 is None and self.density_yxw12 is None:
            raise InvalidParams("model needs mean_yxw12 or density_yxw12")

    def verify_factorization(self, x_points, w1_points, w2_points, tol: float = 1e-4):
        """Registration check of the declared W1 indep W2 | X hypothesis.

        Runs only when an explicit joint covariate density was supplied;
        a missing joint means the factorization holds by construction.
        """
        if self.joint_w_density is None or self.law_w1 is None:
            return
        worst = 0.0
        for x in x_points:
            for w1 in w1_points:
                for w2 in w2_points:
                    prod = float(
                        np.asarray(self.law_w1.density(np.asarray(w1), x))
                        * np.asarray(self.law_w2.density(np.asarray(w2), x))
                    )
                    joint = float(self.joint_w_density(w1, w2, x))
                    worst = max(worst, abs(joint - prod))
        if worst > tol:
            raise FactorizationViolated(
                f"declared product form violated by {worst:.3g} (tol {tol:g})"
            )


def _mix_law(law: CovariateLaw, g: Callable, x: float, spec: QuadratureSpec) -> EstimatedReal:
    form = law.gaussian_form(x)
    if form is not None:
        return gauss_hermite_expectation(g, form[0], form[1], spec)
    return integrate(
        lambda w: np.asarray(g(w), dtype=float) * law.density(w, x),
        law.support(x),
        spec,
    )


def _double_mix(model: BivariateCovariateModel, g: Callable, x: float, spec: QuadratureSpec, order: str = "w1-first") -> EstimatedReal:
    """E over (W1, W2) | x of g(w1, w2), exploiting the product form."""
    if model.law_w1 is None:
        return _mix_law(model.law_w2, lambda w2: g(model.w1_value, w2), x, spec)
    if order == "w1-first":

        def outer(w2arr):
            w2s = np.atleast_1d(np.asarray(w2arr, dtype=float))
            return np.array(
                [_mix_law(model.law_w1, lambda w1: g(w1, float(v)), x, spec).value for v in w2s]
            )

        return _mix_law(model.law_w2, outer, x, spec)

    def outer(w1arr):
        w1s = np.atleast_1d(np.asarray(w1arr, dtype=float))
        return np.array(
            [_mix_law(model.law_w2, lambda w2: g(float(v), w2), x, spec).value for v in w1s]
        )

    return _mix_law(model.law_w1, outer, x, spec)


def marginal_mean_bivariate(
    model: BivariateCovariateModel, x: float, spec: QuadratureSpec | None = None, order: str = "w1-first"
) -> EstimatedReal:
    if model.mean_yxw12 is None:
        raise MissingCapability("model lacks the mean part")
    spec = spec or QuadratureSpec()
    return _double_mix(model, lambda w1, w2: model.mean_yxw12(x, w1, w2), x, spec, order)


def marginal_density_bivariate(
    model: BivariateCovariateModel, y: float, x: float, spec: QuadratureSpec | None = None
) -> EstimatedReal:
    if model.density_yxw12 is None:
        raise MissingCapability("model lacks the density part")
    spec = spec or QuadratureSpec()
    return _double_mix(model, lambda w1, w2: model.density_yxw12(y, x, w1, w2), x, spec)


def _cond_measure_vals(model, measure, x, y, w1, w2arr, mspec):
    """Conditional measure at fixed (x[, y], w1), vectorized over w2."""
    levels = mspec.diff.richardson_levels
    if measure == "EDF":
        h0 = mspec.diff.base_step * max(1.0, abs(x))
        ests = []
        for k in range(levels + 1):
            h = h0 / 2.0**k
            ests.append(
                (
                    np.asarray(model.mean_yxw12(x + h, w1, w2arr), dtype=float)
                    - np.asarray(model.mean_yxw12(x - h, w1, w2arr), dtype=float)
                )
                / (2.0 * h)
            )
        val, _ = _array_richardson(ests, [2, 4, 6, 8, 10][: levels + 1])
        return val
    # MDI
    hx = mspec.mdi_frac * max(1.0, abs(x))
    hy = mspec.mdi_frac * max(1.0, abs(y))
    ests = []
    for k in range(levels + 1):
        sx, sy = hx / 2.0**k, hy / 2.0**k

        def logf(yy, xx):
            v = np.asarray(model.density_yxw12(yy, xx, w1, w2arr), dtype=float)
            if np.any(v <= 0) or not np.all(np.isfinite(v)):
                raise NumericalError("log-density stencil left the support")
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


def check_average_bivariate(
    measure: str,
    model: BivariateCovariateModel,
    grid: SplitCovariateGrid,
    mspec: MeasureSpec | None = None,
    order: str = "w1-first",
) -> CollapsibilityVerdict:
    """Average collapsibility of EDF or MDI over the covariate pair."""
    if measure not in ("EDF", "MDI"):
        raise InvalidParams("bivariate checks support EDF and MDI")
    mspec = mspec or MeasureSpec()
    model.verify_factorization(grid.x_points, grid.w1_points or (0.0,), grid.w2_points or (0.0,))
    if measure == "EDF" and model.mean_yxw12 is None:
        raise MissingCapability("EDF needs the mean part")
    if measure == "MDI" and model.density_yxw12 is None:
        raise MissingCapability("MDI needs the density part")
    ys = grid.y_points if measure == "MDI" else None
    if measure == "MDI" and not ys:
        raise InvalidParams("MDI needs y_points")
    points = [(x, y) for x in grid.x_points for y in (ys or (None,))]
    records = []
    for x, y in points:
        try:
            cond = _double_mix(
                model,
                lambda w1, w2: _cond_measure_vals(model, measure, x, y, w1, w2, mspec),
                x,
                mspec.quad,
                order,
            )
            if measure == "EDF":
                marg = differentiate(
                    lambda xx: marginal_mean_bivariate(model, xx, mspec.quad, order).value,
                    x,
                    mspec.marginal_diff,
                )
            else:
                from .numerics import mixed_partial

                marg = mixed_partial(
                    lambda xx, yy: marginal_density_bivariate(model, yy, xx, mspec.quad).value,
                    x,
                    y,
                    mspec.diff,
                    step_x=mspec.mdi_frac * max(1.0, abs(x)),
                    step_y=mspec.mdi_frac * max(1.0, abs(y)),
                )
            records.append(PointRecord(x, y, cond, marg, abs(cond.value - marg.value)))
        except (NumericalError, MissingCapability) as exc:
            records.append(
                PointRecord(x, y, None, None, math.nan, status="failed", message=str(exc))
            )
    base_grid = GridSpec(
        x_points=grid.x_points,
        y_points=ys,
        tol_abs=grid.tol_abs,
        tol_rel=grid.tol_rel,
    )
    if any(r.status != "ok" for r in records):
        cls = INDETERMINATE
    elif all(
        r.gap <= max(grid.tol_abs, grid.tol_rel * abs(r.marginal.value)) for r in records
    ):
        cls = AVERAGE
    else:
        cls = NOT
    return CollapsibilityVerdict(measure, "average", tuple(records), cls, base_grid)


def probe_conditions_bivariate(
    model: BivariateCovariateModel,
    grid: SplitCovariateGrid,
    mspec: MeasureSpec | None = None,
) -> dict[str, ProbeResult]:
    """Sufficient-condition probes for the bivariate-covariate results.

    Probes cover: the mean free of w1 given (x, w2); f(w2|x) free of x;
    the conditional response density free of w1 given x; f(w2|x,y) free
    of x; the same pair with the roles of x and y interchanged; and the
    declared product hypothesis on (W1, W2) | X.
    """
    mspec = mspec or MeasureSpec()
    xs = grid.x_points
    w1s = grid.w1_points or (model.w1_value,)
    w2s = grid.w2_points or (0.0,)
    ys = grid.y_points or ()
    results: dict[str, ProbeResult] = {}

    tol_h = 1e-6
    tol_ci = 1e-4

    # (a)(i): Y independent of W1 given (X, W2), at the mean level.
    name = "mean_free_of_w1_given_x_w2"
    if model.mean_yxw12 is not None and model.law_w1 is not None:
        dev = 0.0
        for x in xs:
            for w2 in w2s:
                vals = [float(model.mean_yxw12(x, w1, w2)) for w1 in w1s]
                dev = max(dev, max(vals) - min(vals))
        results[name] = ProbeResult(name, "ok", dev, dev <= tol_h, tol_h)
    else:
        results[name] = ProbeResult(name, "unavailable", None, None, tol_h)

    # (a)(ii): X independent of W2.
    name = "w2_free_of_x"
    dev = 0.0
    ref = np.asarray(model.law_w2.density(np.asarray(w2s, dtype=float), xs[0]), dtype=float)
    for x in xs[1:]:
        cur = np.asarray(model.law_w2.density(np.asarray(w2s, dtype=float), x), dtype=float)
        dev = max(dev, float(np.max(np.abs(cur - ref))))
    results[name] = ProbeResult(name, "ok", dev, dev <= tol_h, tol_h)

    # Standing hypothesis: W1 independent of W2 given X.
    name = "w1_w2_product_given_x"
    if model.joint_w_density is not None and model.law_w1 is not None:
        dev = 0.0
        for x in xs:
            for w1 in w1s:
                prod = np.asarray(model.law_w1.density(np.asarray(w1), x)) * np.asarray(
                    model.law_w2.density(np.asarray(w2s, dtype=float), x)
                )
                joint = np.array([model.joint_w_density(w1, w2, x) for w2 in w2s])
                dev = max(dev, float(np.max(np.abs(joint - prod))))
        results[name] = ProbeResult(name, "ok", dev, dev <= tol_ci, tol_ci)
    else:
        results[name] = ProbeResult(name, "ok", 0.0, True, tol_ci)

    has_density = model.density_yxw12 is not None and len(ys) > 0

    # (b)(i): Y independent of W1 given X (density mixed over w2).
    name = "density_free_of_w1_given_x"
    if has_density and model.law_w1 is not None:
        dev = 0.0
        for x in xs:
            for y in ys:
                vals = []
                for w1 in w1s:
                    mixed = _mix_law(
                        model.law_w2,
                        lambda w2: model.density_yxw12(y, x, w1, w2),
                        x,
                        mspec.quad,
                    ).value
                    vals.append(mixed)
                dev = max(dev, max(vals) - min(vals))
        results[name] = ProbeResult(name, "ok", dev, dev <= tol_ci, tol_ci)
    else:
        results[name] = ProbeResult(name, "unavailable", None, None, tol_ci)

    # (b)(ii): X independent of W2 given Y.
    name = "x_indep_w2_given_y"
    if has_density:
        dev = 0.0
        for y in ys:
            for w2 in w2s:

                def w2given(xv):
                    fy = marginal_density_bivariate(model, y, xv, mspec.quad).value
                    if fy < 1e-12:
                        raise NumericalError("marginal density vanished")
                    if model.law_w1 is not None:
                        fyw2 = _mix_law(
                            model.law_w1,
                            lambda w1: model.density_yxw12(y, xv, w1, w2),
                            xv,
                            mspec.quad,
                        ).value
                    else:
                        fyw2 = float(model.density_yxw12(y, xv, model.w1_value, w2))
                    return fyw2 * float(np.asarray(model.law_w2.density(np.asarray(w2), xv))) / fy

                try:
                    ref = w2given(xs[0])
                    for x in xs[1:]:
                        dev = max(dev, abs(w2given(x) - ref))
                except NumericalError:
                    continue
        results[name] = ProbeResult(name, "ok", dev, dev <= tol_ci, tol_ci)
    else:
        results[name] = ProbeResult(name, "unavailable", None, None, tol_ci)

    # The x <-> y swapped variants of (b): X indep W1 | Y and Y indep W2 | X.
    name = "x_indep_w1_given_y"
    if has_density and model.law_w1 is not None:
        dev = 0.0
        for y in ys:
            for w1 in w1s:

                def w1given(xv):
                    fy = marginal_density_bivariate(model, y, xv, mspec.quad).value
                    if fy < 1e-12:
                        raise NumericalError("marginal density vanished")
                    fyw1 = _mix_law(
                        model.law_w2,
                        lambda w2: model.density_yxw12(y, xv, w1, w2),
                        xv,
                        mspec.quad,
                    ).value
                    return fyw1 * float(np.asarray(model.law_w1.density(np.asarray(w1), xv))) / fy

                try:
                    ref = w1given(xs[0])
                    for x in xs[1:]:
                        dev = max(dev, abs(w1given(x) - ref))
                except NumericalError:
                    continue
        results[name] = ProbeResult(name, "ok", dev, dev <= tol_ci, tol_ci)
    else:
        results[name] = ProbeResult(name, "unavailable", None, None, tol_ci)

    name = "density_free_of_w2_given_x"
    if has_density:
        dev = 0.0
        for x in xs:
            for y in ys:
                vals = []
                for w2 in w2s:
                    if model.law_w1 is not None:
                        mixed = _mix_law(
                            model.law_w1,
                            lambda w1: model.density_yxw12(y, x, w1, w2),
                            x,
                            mspec.quad,
                        ).value
                    else:
                        mixed = float(model.density_yxw12(y, x, model.w1_value, w2))
                    vals.append(mixed)
                dev = max(dev, max(vals) - min(vals))
        results[name] = ProbeResult(name, "ok", dev, dev <= tol_ci, tol_ci)
    else:
        results[name] = ProbeResult(name, "unavailable", None, None, tol_ci)

    return results
