"""Declarative model/check configuration files.

Configs are TOML documents with a closed schema: any unknown key is
rejected before numerics run.  The response law can be given either as
closed-form expressions (mean / density / cdf with a support interval)
or as a named distribution family whose parameters are expressions in
(x, w).

Example::

    schema_version = 1

    [model]
    y_kind = "continuous"

    [model.covariate]
    family = "normal"
    params = ["x", "1"]

    [model.y]
    mean = "0.5*(x^2 + (w-x)^2)"
    density = "1/(x^2 + (w-x)^2)"
    cdf = "min(max(y/(x^2 + (w-x)^2), 0), 1)"
    support_lower = "0"
    support_upper = "x^2 + (w-x)^2"

    [check]
    measure = "EDF"
    mode = "average"
    x_points = [0.5, 1.0, 1.5, 2.0]

    [output]
    format = "json"
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import distributions as dist
from .collapsibility import GridSpec
from .errors import ConfigError
from .expressions import Expression, parse_expression
from .model import ConditionalModel, CovariateLaw, SupportRule

SCHEMA_VERSION = 1

_TOP_KEYS = {"schema_version", "model", "check", "output"}
_MODEL_KEYS = {"y_kind", "covariate", "y"}
_COVARIATE_KEYS = {"family", "params"}
_Y_KEYS = {"mean", "density", "cdf", "family", "params", "support_lower", "support_upper"}
_CHECK_KEYS = {"measure", "mode", "x_points", "y_points", "w_points", "tol_abs", "tol_rel"}
_OUTPUT_KEYS = {"format", "path"}

_FAMILY_TAGS = (
    "normal",
    "uniform",
    "gamma",
    "poisson",
    "negative-binomial",
    "bernoulli",
    "tempered-normal",
)


@dataclass(frozen=True)
class ConfigDocument:
    model: ConditionalModel
    grid: GridSpec
    measure: str
    mode: str
    output_format: str
    output_path: str | None
    raw: dict


def _reject_unknown(section: dict, allowed: set[str], where: str):
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(
            f"unknown key(s) {sorted(unknown)} in [{where}]; allowed: {sorted(allowed)}"
        )


def _expr(section: dict, key: str, where: str, variables: set[str]) -> Expression | None:
    text = section.get(key)
    if text is None:
        return None
    if not isinstance(text, str):
        raise ConfigError(f"{where}.{key} must be an expression string")
    try:
        expr = parse_expression(text)
    except ConfigError as exc:
        raise ConfigError(f"{where}.{key}: {exc}")
    extra = expr.variables() - variables
    if extra:
        raise ConfigError(
            f"{where}.{key} uses {sorted(extra)}; only {sorted(variables)} are in scope"
        )
    return expr


def _points(section: dict, key: str, where: str, required: bool = False):
    pts = section.get(key)
    if pts is None:
        if required:
            raise ConfigError(f"{where}.{key} is required")
        return None
    if not isinstance(pts, list) or not pts or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in pts
    ):
        raise ConfigError(f"{where}.{key} must be a nonempty list of numbers")
    return tuple(float(v) for v in pts)


def _family_law(tag: str, param_exprs: list[Expression]) -> CovariateLaw:
    def family_at(x: float) -> dist.Family:
        params = tuple(float(e.evaluate(x=x)) for e in param_exprs)
        return dist.Family(tag, params)

    return CovariateLaw.from_family(family_at)


def _family_conditional(tag: str, param_exprs: list[Expression]):
    """Response parts derived from a family with (x, w)-dependent params."""

    def family_at(x, w):
        params = tuple(float(e.evaluate(x=x, w=w)) for e in param_exprs)
        return dist.Family(tag, params)

    def density(y, x, w):
        ys = np.asarray(y, dtype=float)
        ws = np.asarray(w, dtype=float)
        if ws.ndim == 0 and ys.ndim == 0:
            return dist.pdf_or_pmf(family_at(float(x), float(ws)), float(ys))
        if ws.ndim == 0:
            return dist.pdf_or_pmf(family_at(float(x), float(ws)), ys)
        out = np.empty(ws.shape)
        for i, wv in np.ndenumerate(ws):
            yv = ys[i] if ys.shape == ws.shape else ys
            out[i] = dist.pdf_or_pmf(family_at(float(x), float(wv)), yv)
        return out

    def cdf(y, x, w):
        ws = np.asarray(w, dtype=float)
        if ws.ndim == 0:
            return dist.cdf(family_at(float(x), float(ws)), y)
        out = np.empty(ws.shape)
        for i, wv in np.ndenumerate(ws):
            out[i] = dist.cdf(family_at(float(x), float(wv)), y)
        return out

    def mean(x, w):
        ws = np.asarray(w, dtype=float)
        if ws.ndim == 0:
            return dist.mean(family_at(float(x), float(ws)))
        out = np.empty(ws.shape)
        for i, wv in np.ndenumerate(ws):
            out[i] = dist.mean(family_at(float(x), float(wv)))
        return out

    def support_bounds(x, w):
        sup = dist.support(family_at(float(x), float(np.atleast_1d(np.asarray(w, dtype=float))[0])))
        return sup.lower, sup.upper

    return mean, density, cdf, support_bounds


def _build_model(section: dict) -> ConditionalModel:
    _reject_unknown(section, _MODEL_KEYS, "model")
    y_kind = section.get("y_kind", "continuous")
    if y_kind not in ("continuous", "binary", "count"):
        raise ConfigError(f"model.y_kind must be continuous, binary, or count, not {y_kind!r}")

    cov = section.get("covariate")
    if not isinstance(cov, dict):
        raise ConfigError("[model.covariate] section is required")
    _reject_unknown(cov, _COVARIATE_KEYS, "model.covariate")
    tag = cov.get("family")
    if tag not in _FAMILY_TAGS:
        raise ConfigError(f"model.covariate.family must be one of {_FAMILY_TAGS}")
    raw_params = cov.get("params")
    if not isinstance(raw_params, list) or not raw_params:
        raise ConfigError("model.covariate.params must be a nonempty list of expressions")
    cov_exprs = []
    for i, p in enumerate(raw_params):
        cov_exprs.append(_expr({"p": str(p)}, "p", f"model.covariate.params[{i}]", {"x"}))
    covariate = _family_law(tag, cov_exprs)

    ysec = section.get("y")
    if not isinstance(ysec, dict):
        raise ConfigError("[model.y] section is required")
    _reject_unknown(ysec, _Y_KEYS, "model.y")

    if "family" in ysec:
        ytag = ysec.get("family")
        if ytag not in _FAMILY_TAGS:
            raise ConfigError(f"model.y.family must be one of {_FAMILY_TAGS}")
        raw = ysec.get("params")
        if not isinstance(raw, list) or not raw:
            raise ConfigError("model.y.params must be a nonempty list of expressions")
        exprs = []
        for i, p in enumerate(raw):
            exprs.append(_expr({"p": str(p)}, "p", f"model.y.params[{i}]", {"x", "w"}))
        mean, density, cdf, bounds = _family_conditional(ytag, exprs)
        inferred_kind = "count" if ytag in ("poisson", "negative-binomial") else (
            "binary" if ytag == "bernoulli" else "continuous"
        )
        if "y_kind" not in section:
            y_kind = inferred_kind
        return ConditionalModel(
            covariate=covariate,
            y_kind=y_kind,
            mean_yxw=mean,
            density_yxw=density,
            cdf_yxw=cdf,
            support_y=SupportRule(lambda x, w: bounds(x, w)[0], lambda x, w: bounds(x, w)[1]),
            name="config-model",
        )

    mean_e = _expr(ysec, "mean", "model.y", {"x", "w"})
    dens_e = _expr(ysec, "density", "model.y", {"x", "y", "w"})
    cdf_e = _expr(ysec, "cdf", "model.y", {"x", "y", "w"})
    if mean_e is None and dens_e is None:
        raise ConfigError("model.y needs at least one of: mean, density, family")
    lo_e = _expr(ysec, "support_lower", "model.y", {"x", "w"})
    hi_e = _expr(ysec, "support_upper", "model.y", {"x", "w"})
    if dens_e is not None and (lo_e is None or hi_e is None):
        raise ConfigError("model.y.density needs support_lower and support_upper")
    support = None
    if lo_e is not None and hi_e is not None:
        support = SupportRule(
            lambda x, w: lo_e.evaluate(x=x, w=w),
            lambda x, w: hi_e.evaluate(x=x, w=w),
        )
    return ConditionalModel(
        covariate=covariate,
        y_kind=y_kind,
        mean_yxw=(lambda x, w: mean_e.evaluate(x=x, w=w)) if mean_e else None,
        density_yxw=(lambda y, x, w: dens_e.evaluate(y=y, x=x, w=w)) if dens_e else None,
        cdf_yxw=(lambda y, x, w: cdf_e.evaluate(y=y, x=x, w=w)) if cdf_e else None,
        support_y=support,
        name="config-model",
    )


def load_config_text(text: str) -> ConfigDocument:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config is not valid TOML: {exc}")
    _reject_unknown(raw, _TOP_KEYS, "top level")
    version = raw.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(
            f"schema_version must be {SCHEMA_VERSION}, got {version!r}"
        )
    model_sec = raw.get("model")
    if not isinstance(model_sec, dict):
        raise ConfigError("[model] section is required")
    model = _build_model(model_sec)

    check = raw.get("check")
    if not isinstance(check, dict):
        raise ConfigError("[check] section is required")
    _reject_unknown(check, _CHECK_KEYS, "check")
    measure = check.get("measure")
    if measure not in ("EDF", "MDI", "LED", "DDF", "MDI-binary"):
        raise ConfigError(
            "check.measure must be one of EDF, MDI, LED, DDF, MDI-binary"
        )
    mode = check.get("mode", "average")
    if mode not in ("average", "simple"):
        raise ConfigError("check.mode must be 'average' or 'simple'")
    x_points = _points(check, "x_points", "check", required=True)
    y_points = _points(check, "y_points", "check")
    w_points = _points(check, "w_points", "check")
    tol_abs = check.get("tol_abs", 1e-5)
    tol_rel = check.get("tol_rel", 1e-4)
    for name, v in (("tol_abs", tol_abs), ("tol_rel", tol_rel)):
        if not isinstance(v, (int, float)) or isinstance(v, bool) or v <= 0 or not math.isfinite(v):
            raise ConfigError(f"check.{name} must be a positive number")
    try:
        grid = GridSpec(x_points, y_points, w_points, float(tol_abs), float(tol_rel))
    except Exception as exc:
        raise ConfigError(f"invalid check grid: {exc}")

    output = raw.get("output", {})
    if not isinstance(output, dict):
        raise ConfigError("[output] must be a section")
    _reject_unknown(output, _OUTPUT_KEYS, "output")
    fmt = output.get("format", "text")
    if fmt not in ("json", "csv-grid", "text"):
        raise ConfigError("output.format must be json, csv-grid, or text")
    path = output.get("path")
    if path is not None and not isinstance(path, str):
        raise ConfigError("output.path must be a string")

    return ConfigDocument(model, grid, measure, mode, fmt, path, raw)


def load_config(path: str) -> ConfigDocument:
    try:
        with open(path, "rb") as fh:
            text = fh.read().decode("utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}")
    return load_config_text(text)
