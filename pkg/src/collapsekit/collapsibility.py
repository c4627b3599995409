"""Collapsibility verdicts, the residual diagnostic, and condition probes.

"For all x" claims are discretized onto a user-supplied grid; verdicts
carry the grid and never assert universal quantification.  A numerical
failure at any grid point yields the Indeterminate classification,
which is deliberately distinct from NotCollapsible: quadrature
breakdown must not masquerade as a statistical finding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import distributions as dist
from .errors import InvalidParams, MissingCapability, NumericalError
from .measures import (
    MeasureSpec,
    conditional_average,
    conditional_measure_fn,
    marginal_measure,
    require_measure,
)
from .model import (
    ConditionalModel,
    _log_slope_step,
    marginal_density,
    marginal_mean,
    preferred_mixing_spec,
)
from .numerics import DiffSpec, EstimatedReal, differentiate, integrate

SIMPLE = "SimpleCollapsible"
AVERAGE = "AverageCollapsible"
NOT = "NotCollapsible"
INDETERMINATE = "Indeterminate"

# Conditional-independence probes ride on quadrature-normalized
# conditionals and are noisier than pointwise evaluations.
PROBE_TOLS = {
    "mean_free_of_w": 1e-6,
    "covariate_free_of_x": 1e-6,
    "density_free_of_w": 1e-4,
    "x_indep_w_given_y": 1e-4,
    "y_log_slope_matches_marginal": 1e-5,
    "x_log_slope_matches_marginal": 1e-5,
}


@dataclass(frozen=True)
class GridSpec:
    """Evaluation grid plus the gap tolerances for verdicts."""

    x_points: tuple[float, ...]
    y_points: tuple[float, ...] | None = None
    w_points: tuple[float, ...] | None = None
    tol_abs: float = 1e-5
    tol_rel: float = 1e-4

    def __post_init__(self):
        object.__setattr__(self, "x_points", tuple(float(v) for v in self.x_points))
        if self.y_points is not None:
            object.__setattr__(self, "y_points", tuple(float(v) for v in self.y_points))
        if self.w_points is not None:
            object.__setattr__(self, "w_points", tuple(float(v) for v in self.w_points))
        for pts, label in ((self.x_points, "x"), (self.y_points, "y"), (self.w_points, "w")):
            if pts is None:
                continue
            if len(pts) == 0:
                raise InvalidParams(f"{label}_points must be nonempty")
            if any(b <= a for a, b in zip(pts, pts[1:])):
                raise InvalidParams(f"{label}_points must be strictly increasing")
        if self.tol_abs <= 0 or self.tol_rel <= 0:
            raise InvalidParams("tolerances must be positive")

    def points(self, need_y: bool):
        if need_y:
            if not self.y_points:
                raise InvalidParams("this measure needs y_points in the grid")
            return [(x, y) for x in self.x_points for y in self.y_points]
        return [(x, None) for x in self.x_points]


@dataclass(frozen=True)
class PointRecord:
    x: float
    y: float | None
    conditional_average: EstimatedReal | None
    marginal: EstimatedReal | None
    gap: float
    residual: float | None = None
    w_sup_gap: float | None = None
    status: str = "ok"
    message: str = ""


@dataclass(frozen=True)
class ProbeResult:
    name: str
    status: str  # "ok" or "unavailable"
    deviation: float | None
    passed: bool | None
    tol: float


@dataclass(frozen=True)
class CollapsibilityVerdict:
    measure: str
    mode: str  # "average" or "simple"
    records: tuple[PointRecord, ...]
    classification: str
    grid: GridSpec
    reversal_flag: bool = False
    condition_probes: dict[str, ProbeResult] = field(default_factory=dict)

    @property
    def passed_points(self) -> int:
        return sum(1 for r in self.records if r.status == "ok")


def _gap_ok(record: PointRecord, grid: GridSpec) -> bool:
    if record.status != "ok":
        return False
    bound = max(grid.tol_abs, grid.tol_rel * abs(record.marginal.value))
    return record.gap <= bound


def check_average(
    measure: str,
    model: ConditionalModel,
    grid: GridSpec,
    mspec: MeasureSpec | None = None,
    with_residual: bool = False,
) -> CollapsibilityVerdict:
    """Average collapsibility: E_{W|x}[conditional] vs marginal per point."""
    mspec = mspec or MeasureSpec()
    require_measure(model, measure)
    need_y = measure in ("MDI", "DDF")
    records = []
    for x, y in grid.points(need_y):
        try:
            cond = conditional_average(model, measure, x, y, mspec)
            marg = marginal_measure(model, measure, x, y, mspec)
            resid = None
            if with_residual and measure == "EDF":
                resid = edf_residual(model, x, mspec).value
            records.append(
                PointRecord(x, y, cond, marg, abs(cond.value - marg.value), resid)
            )
        except (NumericalError, MissingCapability) as exc:
            records.append(
                PointRecord(x, y, None, None, math.nan, status="failed", message=str(exc))
            )
    if any(r.status != "ok" for r in records):
        cls = INDETERMINATE
    elif all(_gap_ok(r, grid) for r in records):
        cls = AVERAGE
    else:
        cls = NOT
    return CollapsibilityVerdict(measure, "average", tuple(records), cls, grid)


def check_simple(
    measure: str,
    model: ConditionalModel,
    grid: GridSpec,
    mspec: MeasureSpec | None = None,
) -> CollapsibilityVerdict:
    """Simple collapsibility: conditional equals marginal for every w."""
    mspec = mspec or MeasureSpec()
    require_measure(model, measure)
    if not grid.w_points:
        raise InvalidParams("check_simple needs w_points in the grid")
    need_y = measure in ("MDI", "DDF")
    records = []
    for x, y in grid.points(need_y):
        try:
            marg = marginal_measure(model, measure, x, y, mspec)
            fn = conditional_measure_fn(model, measure, x, y, mspec)
            cond_vals = np.asarray(fn(np.asarray(grid.w_points, dtype=float)), dtype=float)
            w_sup = float(np.max(np.abs(cond_vals - marg.value)))
            cond = conditional_average(model, measure, x, y, mspec)
            records.append(
                PointRecord(
                    x, y, cond, marg, abs(cond.value - marg.value), w_sup_gap=w_sup
                )
            )
        except (NumericalError, MissingCapability) as exc:
            records.append(
                PointRecord(x, y, None, None, math.nan, status="failed", message=str(exc))
            )
    if any(r.status != "ok" for r in records):
        cls = INDETERMINATE
    else:
        sup_ok = all(
            r.w_sup_gap <= max(grid.tol_abs, grid.tol_rel * abs(r.marginal.value))
            for r in records
        )
        avg_ok = all(_gap_ok(r, grid) for r in records)
        cls = SIMPLE if sup_ok and avg_ok else (AVERAGE if avg_ok else NOT)
    return CollapsibilityVerdict(measure, "simple", tuple(records), cls, grid)


def edf_residual(
    model: ConditionalModel, x: float, mspec: MeasureSpec | None = None
) -> EstimatedReal:
    """int E(Y|x,w) * d f(w|x) / dx dw.

    Vanishing of this term is equivalent to average collapsibility of
    the expectation-dependence slope at x: the marginal slope decomposes
    as the conditional average plus exactly this residual.
    """
    mspec = mspec or MeasureSpec()
    model.require("mean")
    dspec = mspec.diff

    def integrand(warr):
        ws = np.atleast_1d(np.asarray(warr, dtype=float))
        h0 = dspec.base_step * max(1.0, abs(x))
        ests = []
        for k in range(dspec.richardson_levels + 1):
            h = h0 / 2.0**k
            ests.append(
                (
                    np.asarray(model.covariate.density(ws, x + h), dtype=float)
                    - np.asarray(model.covariate.density(ws, x - h), dtype=float)
                )
                / (2.0 * h)
            )
        from .measures import _array_richardson

        dcov, _ = _array_richardson(ests, [2, 4, 6, 8, 10][: dspec.richardson_levels + 1])
        return np.asarray(model.mean_yxw(x, ws), dtype=float) * dcov

    return integrate(integrand, model.covariate.support(x), mspec.quad)


def _default_w_points(model: ConditionalModel, x: float):
    fam = model.covariate.family_at(x)
    if fam is not None:
        m = dist.mean(fam)
        sd = math.sqrt(dist.variance(fam))
        sup = model.covariate.support(x)
        pts = [m - 1.5 * sd, m, m + 1.5 * sd]
        return tuple(p for p in pts if sup.lower < p < sup.upper) or (m,)
    sup = model.covariate.support(x)
    if sup.finite:
        width = sup.upper - sup.lower
        return (sup.lower + 0.25 * width, sup.lower + 0.5 * width, sup.lower + 0.75 * width)
    return (model.covariate.typical(x),)


def _default_y_points(model: ConditionalModel, x: float, w) -> tuple[float, ...]:
    if model.support_y is None:
        return (0.0,)
    lo, hi = model.support_y.bounds(x, w)
    lo = float(np.max(np.asarray(lo, dtype=float)))
    hi = float(np.min(np.asarray(hi, dtype=float)))
    if not math.isfinite(hi):
        hi = lo + 4.0
    width = hi - lo
    return (lo + 0.25 * width, lo + 0.5 * width, lo + 0.75 * width)


def probe_conditions(
    model: ConditionalModel,
    grid: GridSpec,
    mspec: MeasureSpec | None = None,
) -> dict[str, ProbeResult]:
    """Numeric deviations for the sufficient conditions of the theorems.

    Probes that cannot run for lack of a declared model part come back
    with status "unavailable", never as a pass or fail.
    """
    mspec = mspec or MeasureSpec()
    xs = grid.x_points
    results: dict[str, ProbeResult] = {}

    def w_points(x):
        return grid.w_points if grid.w_points else _default_w_points(model, x)

    # Homogeneity of the conditional mean in w.
    name = "mean_free_of_w"
    if "mean" in model.capabilities:
        dev = 0.0
        for x in xs:
            ws = w_points(x)
            vals = [float(model.mean_yxw(x, w)) for w in ws]
            dev = max(dev, max(vals) - min(vals))
        results[name] = ProbeResult(name, "ok", dev, dev <= PROBE_TOLS[name], PROBE_TOLS[name])
    else:
        results[name] = ProbeResult(name, "unavailable", None, None, PROBE_TOLS[name])

    # Invariance of the covariate law in x.
    name = "covariate_free_of_x"
    dev = 0.0
    x0 = xs[0]
    ws0 = np.asarray(w_points(x0), dtype=float)
    ref = np.asarray(model.covariate.density(ws0, x0), dtype=float)
    for x in xs[1:]:
        cur = np.asarray(model.covariate.density(ws0, x), dtype=float)
        dev = max(dev, float(np.max(np.abs(cur - ref))))
    results[name] = ProbeResult(name, "ok", dev, dev <= PROBE_TOLS[name], PROBE_TOLS[name])

    has_density = "density" in model.capabilities and model.y_kind == "continuous"

    # f(y|x,w) = f(y|x): the response is independent of W given X.
    name = "density_free_of_w"
    if has_density:
        dev = 0.0
        for x in xs:
            ws = w_points(x)
            ys = grid.y_points if grid.y_points else _default_y_points(model, x, ws[0])
            for y in ys:
                spec = preferred_mixing_spec(model, x, mspec.quad)
                marg = marginal_density(model, y, x, spec).value
                for w in ws:
                    dev = max(dev, abs(float(model.density_at(y, x, w)) - marg))
        results[name] = ProbeResult(name, "ok", dev, dev <= PROBE_TOLS[name], PROBE_TOLS[name])
    else:
        results[name] = ProbeResult(name, "unavailable", None, None, PROBE_TOLS[name])

    # f(w|x,y) free of x: X and W independent given Y.
    name = "x_indep_w_given_y"
    if has_density:
        dev = 0.0
        x0 = xs[0]
        for y in grid.y_points if grid.y_points else _default_y_points(model, x0, _default_w_points(model, x0)[0]):
            for w in w_points(x0):
                def wgiven(xv):
                    spec = preferred_mixing_spec(model, xv, mspec.quad)
                    fy = marginal_density(model, y, xv, spec).value
                    if fy < 1e-12:
                        raise NumericalError("marginal density vanished in probe")
                    return (
                        float(model.density_at(y, xv, w))
                        * float(model.covariate.density(np.asarray(w), xv))
                        / fy
                    )

                try:
                    ref = wgiven(x0)
                    for x in xs[1:]:
                        dev = max(dev, abs(wgiven(x) - ref))
                except NumericalError:
                    continue
        results[name] = ProbeResult(name, "ok", dev, dev <= PROBE_TOLS[name], PROBE_TOLS[name])
    else:
        results[name] = ProbeResult(name, "unavailable", None, None, PROBE_TOLS[name])

    # Slopes of log f: conditional vs marginal, in y and in x.
    for name, axis in (
        ("y_log_slope_matches_marginal", "y"),
        ("x_log_slope_matches_marginal", "x"),
    ):
        if not has_density:
            results[name] = ProbeResult(name, "unavailable", None, None, PROBE_TOLS[name])
            continue
        dev = 0.0
        ok = True
        for x in xs:
            ws = w_points(x)
            ys = grid.y_points if grid.y_points else _default_y_points(model, x, ws[0])
            for y in ys:
                try:
                    if axis == "y":
                        step = _log_slope_step(model, y, x, np.asarray(ws))
                        dsp = DiffSpec(step, mspec.diff.richardson_levels)

                        def marg_log(yy):
                            spec = preferred_mixing_spec(model, x, mspec.quad)
                            return math.log(marginal_density(model, yy, x, spec).value)

                        marg_slope = differentiate(marg_log, y, dsp).value
                        for w in ws:
                            cond_slope = differentiate(
                                lambda yy: math.log(float(model.density_at(yy, x, w))),
                                y,
                                dsp,
                            ).value
                            dev = max(dev, abs(cond_slope - marg_slope))
                    else:
                        dsp = DiffSpec(
                            mspec.mdi_frac * max(1.0, abs(x)),
                            mspec.diff.richardson_levels,
                        )

                        def marg_log(xx):
                            spec = preferred_mixing_spec(model, xx, mspec.quad)
                            return math.log(marginal_density(model, y, xx, spec).value)

                        marg_slope = differentiate(marg_log, x, dsp).value
                        for w in ws:
                            cond_slope = differentiate(
                                lambda xx: math.log(float(model.density_at(y, xx, w))),
                                x,
                                dsp,
                            ).value
                            dev = max(dev, abs(cond_slope - marg_slope))
                except (NumericalError, ValueError):
                    ok = False
        if ok:
            results[name] = ProbeResult(name, "ok", dev, dev <= PROBE_TOLS[name], PROBE_TOLS[name])
        else:
            results[name] = ProbeResult(name, "unavailable", None, None, PROBE_TOLS[name])
    return results


@dataclass(frozen=True)
class ReversalReport:
    reversal: bool
    conditional_sign: int  # +1, -1, or 0 when no uniform strict sign
    witnesses: tuple[dict, ...]


def detect_reversal(
    measure: str,
    model: ConditionalModel,
    grid: GridSpec,
    mspec: MeasureSpec | None = None,
) -> ReversalReport:
    """Yule-Simpson detection: a uniform strict conditional sign with an
    opposite strict marginal sign somewhere on the grid."""
    mspec = mspec or MeasureSpec()
    require_measure(model, measure)
    need_y = measure in ("MDI", "DDF")
    tol = grid.tol_abs
    signs = set()
    for x, y in grid.points(need_y):
        ws = grid.w_points if grid.w_points else _default_w_points(model, x)
        fn = conditional_measure_fn(model, measure, x, y, mspec)
        vals = np.asarray(fn(np.asarray(ws, dtype=float)), dtype=float)
        for v in vals:
            if v > tol:
                signs.add(1)
            elif v < -tol:
                signs.add(-1)
            else:
                signs.add(0)
    if signs != {1} and signs != {-1}:
        return ReversalReport(False, 0, ())
    cond_sign = signs.pop()
    witnesses = []
    for x, y in grid.points(need_y):
        m = marginal_measure(model, measure, x, y, mspec).value
        if (cond_sign > 0 and m < -tol) or (cond_sign < 0 and m > tol):
            witnesses.append({"x": x, "y": y, "marginal": m})
    return ReversalReport(bool(witnesses), cond_sign, tuple(witnesses))
