"""Simulation and in-house fitting for the four regression families.

``simulate`` draws (y, x, w) records as x -> w|x -> y|(x,w) with the
family link; ``fit_linear`` solves the normal equations, ``fit_glm``
runs iteratively reweighted least squares for the logistic and Poisson
links, and ``fit_negbin`` is log-link IRLS at fixed dispersion (known
or moment-estimated).  ``check_beta_collapsibility`` compares the
covariate-conditional expectation of the slope against the marginal
fit, the coefficient-level form of average collapsibility.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import distributions as dist
from .errors import (
    InvalidParams,
    NotConverged,
    RankDeficient,
    Separation,
    Underdispersed,
)

MAX_IRLS_ITERATIONS = 100
GRADIENT_TOL = 1e-8


@dataclass(frozen=True)
class DiscreteW:
    """Finite covariate levels with probabilities, possibly x-dependent."""

    levels: tuple[float, ...]
    probs: tuple[float, ...] | Callable[[float], tuple[float, ...]]

    def probabilities(self, x: float) -> np.ndarray:
        p = np.asarray(self.probs(x) if callable(self.probs) else self.probs, dtype=float)
        if len(p) != len(self.levels) or abs(p.sum() - 1.0) > 1e-9 or np.any(p < 0):
            raise InvalidParams("covariate probabilities must be a distribution")
        return p


@dataclass(frozen=True)
class ContinuousW:
    """Covariate law f(w|x) as a family with x-dependent parameters."""

    family_at: Callable[[float], dist.Family]


@dataclass(frozen=True)
class RegressionSpec:
    family: str  # linear | logistic | poisson | negbin
    covariate: DiscreteW | ContinuousW
    alpha: float = 0.0
    beta: float = 0.0
    gamma: float = 0.0
    strata: dict[float, tuple[float, float]] | None = None  # w -> (alpha(w), beta(w))
    theta: float | None = None
    sd: float = 1.0

    def __post_init__(self):
        if self.family not in ("linear", "logistic", "poisson", "negbin"):
            raise InvalidParams(f"unknown regression family {self.family!r}")
        if self.family == "negbin" and (self.theta is None or self.theta <= 0):
            raise InvalidParams("negbin needs theta > 0")
        if self.family == "linear" and self.sd <= 0:
            raise InvalidParams("linear noise sd must be positive")
        if self.strata is not None and not isinstance(self.covariate, DiscreteW):
            raise InvalidParams("stratified coefficients need a discrete covariate")

    def linear_predictor(self, x: np.ndarray, w: np.ndarray) -> np.ndarray:
        if self.strata is not None:
            eta = np.empty_like(x)
            for level, (a, b) in self.strata.items():
                mask = w == level
                eta[mask] = a + b * x[mask]
            return eta
        return self.alpha + self.beta * x + self.gamma * w


@dataclass(frozen=True)
class Dataset:
    y: np.ndarray
    x: np.ndarray
    w: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.y)
        if n < 1 or len(self.x) != n or len(self.w) != n:
            raise InvalidParams("dataset columns must be nonempty and aligned")

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["y", "x", "w"])
        for row in zip(self.y, self.x, self.w):
            writer.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    @staticmethod
    def from_csv(text: str) -> "Dataset":
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if header != ["y", "x", "w"]:
            raise InvalidParams("CSV must start with header y,x,w")
        rows = [[float(v) for v in row] for row in reader if row]
        arr = np.asarray(rows, dtype=float)
        if arr.size == 0:
            raise InvalidParams("CSV has no data rows")
        return Dataset(arr[:, 0], arr[:, 1], arr[:, 2])


@dataclass(frozen=True)
class FitResult:
    names: tuple[str, ...]
    coefficients: np.ndarray
    standard_errors: np.ndarray
    iterations: int
    converged: bool
    log_likelihood: float
    score_norm: float

    def coef(self, name: str) -> float:
        return float(self.coefficients[self.names.index(name)])

    def se(self, name: str) -> float:
        return float(self.standard_errors[self.names.index(name)])


def simulate(spec: RegressionSpec, n: int, x_law: dist.Family, seed: dist.Seed) -> Dataset:
    """Draw n records of (y, x, w) under the generative scheme of spec."""
    if n < 1:
        raise InvalidParams("n must be >= 1")
    rng = np.random.default_rng(seed)
    x = dist.sample_with(x_law, n, rng)
    if isinstance(spec.covariate, DiscreteW):
        levels = np.asarray(spec.covariate.levels, dtype=float)
        if callable(spec.covariate.probs):
            w = np.empty(n)
            for i, xv in enumerate(x):
                w[i] = rng.choice(levels, p=spec.covariate.probabilities(float(xv)))
        else:
            w = rng.choice(levels, size=n, p=spec.covariate.probabilities(0.0))
    else:
        w = np.empty(n)
        for i, xv in enumerate(x):
            w[i] = dist.sample_with(spec.covariate.family_at(float(xv)), 1, rng)[0]
    eta = spec.linear_predictor(x, w)
    if spec.family == "linear":
        y = eta + rng.normal(0.0, spec.sd, size=n)
    elif spec.family == "logistic":
        y = (rng.random(n) < 1.0 / (1.0 + np.exp(-eta))).astype(float)
    elif spec.family == "poisson":
        y = rng.poisson(np.exp(eta)).astype(float)
    else:  # negbin via the gamma-Poisson mixture
        g = rng.gamma(spec.theta, 1.0 / spec.theta, size=n)
        y = rng.poisson(np.exp(eta) * g).astype(float)
    return Dataset(y, x, w, {"seed": seed, "n": n, "family": spec.family})


def _design(data: Dataset, include_w: bool) -> tuple[np.ndarray, tuple[str, ...]]:
    cols = [np.ones(len(data.y)), data.x]
    names = ["intercept", "x"]
    if include_w:
        cols.append(data.w)
        names.append("w")
    return np.column_stack(cols), tuple(names)


def fit_linear(data: Dataset, include_w: bool) -> FitResult:
    """Ordinary least squares via the normal equations."""
    X, names = _design(data, include_w)
    y = data.y
    xtx = X.T @ X
    if np.linalg.matrix_rank(xtx) < X.shape[1]:
        raise RankDeficient("design matrix is rank deficient")
    beta = np.linalg.solve(xtx, X.T @ y)
    resid = y - X @ beta
    dof = max(len(y) - X.shape[1], 1)
    sigma2 = float(resid @ resid) / dof
    cov = sigma2 * np.linalg.inv(xtx)
    se = np.sqrt(np.diag(cov))
    score = X.T @ resid
    ll = -0.5 * len(y) * (math.log(2.0 * math.pi * sigma2) + 1.0)
    return FitResult(names, beta, se, 1, True, ll, float(np.max(np.abs(score))))


def _glm_parts(family: str, eta: np.ndarray, y: np.ndarray, theta: float | None):
    """Returns (mu, irls_weight, working_residual_score, loglik)."""
    if family == "logistic":
        mu = 1.0 / (1.0 + np.exp(-eta))
        wgt = mu * (1.0 - mu)
        score_i = y - mu
        ll = float(np.sum(y * eta - np.log1p(np.exp(eta))))
        return mu, wgt, score_i, ll
    if family == "poisson":
        mu = np.exp(eta)
        wgt = mu
        score_i = y - mu
        from scipy import special

        ll = float(np.sum(y * eta - mu - special.gammaln(y + 1.0)))
        return mu, wgt, score_i, ll
    # negbin, log link, fixed theta
    mu = np.exp(eta)
    wgt = mu * theta / (theta + mu)
    score_i = (y - mu) * theta / (theta + mu)
    from scipy import special

    ll = float(
        np.sum(
            special.gammaln(y + theta)
            - special.gammaln(theta)
            - special.gammaln(y + 1.0)
            + theta * math.log(theta)
            + y * eta
            - (y + theta) * np.log(theta + mu)
        )
    )
    return mu, wgt, score_i, ll


def _irls(data: Dataset, family: str, include_w: bool, theta: float | None) -> FitResult:
    X, names = _design(data, include_w)
    y = data.y
    if np.linalg.matrix_rank(X.T @ X) < X.shape[1]:
        raise RankDeficient("design matrix is rank deficient")
    beta = np.zeros(X.shape[1])
    for it in range(1, MAX_IRLS_ITERATIONS + 1):
        eta = X @ beta
        if family == "logistic" and np.max(np.abs(eta)) > 300.0:
            raise Separation("logistic fit diverged; data look separated")
        mu, wgt, score_i, _ = _glm_parts(family, eta, y, theta)
        score = X.T @ score_i
        info = X.T @ (wgt[:, None] * X)
        try:
            step = np.linalg.solve(info, score)
        except np.linalg.LinAlgError as exc:
            raise RankDeficient(f"weighted information is singular: {exc}")
        beta = beta + step
        if family == "logistic" and float(np.linalg.norm(beta)) > 1e3:
            raise Separation("coefficient norm blew up; data look separated")
        if float(np.linalg.norm(X.T @ _glm_parts(family, X @ beta, y, theta)[2])) < GRADIENT_TOL:
            break
    eta = X @ beta
    mu, wgt, score_i, ll = _glm_parts(family, eta, y, theta)
    score_norm = float(np.linalg.norm(X.T @ score_i))
    converged = score_norm < GRADIENT_TOL
    if not converged and it >= MAX_IRLS_ITERATIONS:
        raise NotConverged(
            f"IRLS did not converge in {MAX_IRLS_ITERATIONS} iterations "
            f"(score norm {score_norm:.3g})"
        )
    info = X.T @ (wgt[:, None] * X)
    se = np.sqrt(np.diag(np.linalg.inv(info)))
    return FitResult(names, beta, se, it, converged, ll, score_norm)


def fit_glm(data: Dataset, family: str, include_w: bool) -> FitResult:
    """IRLS fit for logistic or Poisson regression."""
    if family not in ("logistic", "poisson"):
        raise InvalidParams("fit_glm handles logistic and poisson")
    if family == "logistic" and len(np.unique(data.y)) < 2:
        raise Separation("response is constant; log-odds are unbounded")
    return _irls(data, family, include_w, None)


def moment_theta(y: np.ndarray) -> float:
    """Method-of-moments dispersion: mean^2 / (var - mean)."""
    m = float(np.mean(y))
    v = float(np.var(y, ddof=1))
    if v <= m:
        raise Underdispersed(
            f"sample variance {v:.4g} does not exceed mean {m:.4g}"
        )
    return m * m / (v - m)


def fit_negbin(data: Dataset, theta: float | str = "moment", include_w: bool = True) -> FitResult:
    """Log-link negative-binomial IRLS at fixed dispersion.

    ``theta`` is either a known positive value or the string "moment"
    for the clamped method-of-moments estimate.
    """
    if theta == "moment":
        theta_val = moment_theta(data.y)
    else:
        theta_val = float(theta)
        if theta_val <= 0:
            raise InvalidParams("theta must be positive")
    return _irls(data, "negbin", include_w, theta_val)


@dataclass(frozen=True)
class BetaCollapsibilityReport:
    family: str
    conditional_slopes: dict
    marginal_slope: float
    marginal_se: float
    per_x: tuple[dict, ...]
    unconditional_average: float
    collapsible: bool
    reversal: bool
    tolerance_multiplier: float = 3.0


def check_beta_collapsibility(
    spec: RegressionSpec,
    n: int,
    seed: dist.Seed,
    x_probe_points,
    x_law: dist.Family | None = None,
) -> BetaCollapsibilityReport:
    """Coefficient-level average collapsibility at Monte Carlo scale.

    E_{W|x}(beta(W)) is computed against the declared covariate law when
    available (discrete probabilities or a continuous family), falling
    back to empirical conditional frequencies in a window of width
    0.25 * range(x) around each probe point.
    """
    x_law = x_law or dist.normal(0.0, 1.0)
    data = simulate(spec, n, x_law, seed)
    marginal = (
        fit_linear(data, include_w=False)
        if spec.family == "linear"
        else fit_glm(data, spec.family, include_w=False)
        if spec.family in ("logistic", "poisson")
        else fit_negbin(data, spec.theta, include_w=False)
    )
    beta_tilde = marginal.coef("x")
    se_tilde = marginal.se("x")

    if isinstance(spec.covariate, DiscreteW):
        strata_fits: dict[float, FitResult] = {}
        for level in spec.covariate.levels:
            mask = data.w == level
            if int(mask.sum()) < 50:
                raise InvalidParams(
                    f"stratum w={level} has fewer than 50 records; increase n"
                )
            sub = Dataset(data.y[mask], data.x[mask], data.w[mask])
            strata_fits[level] = (
                fit_linear(sub, include_w=False)
                if spec.family == "linear"
                else fit_glm(sub, spec.family, include_w=False)
                if spec.family in ("logistic", "poisson")
                else fit_negbin(sub, spec.theta, include_w=False)
            )
        cond_slopes = {lvl: f.coef("x") for lvl, f in strata_fits.items()}
        cond_ses = {lvl: f.se("x") for lvl, f in strata_fits.items()}

        def expected_beta(x: float) -> tuple[float, float]:
            probs = spec.covariate.probabilities(x)
            val = float(sum(p * cond_slopes[l] for p, l in zip(probs, spec.covariate.levels)))
            var = float(sum((p * cond_ses[l]) ** 2 for p, l in zip(probs, spec.covariate.levels)))
            return val, math.sqrt(var)

        freq = np.array([np.mean(data.w == l) for l in spec.covariate.levels])
        uncond = float(sum(f * cond_slopes[l] for f, l in zip(freq, spec.covariate.levels)))
    else:
        conditional = (
            fit_linear(data, include_w=True)
            if spec.family == "linear"
            else fit_glm(data, spec.family, include_w=True)
            if spec.family in ("logistic", "poisson")
            else fit_negbin(data, spec.theta, include_w=True)
        )
        cond_slopes = {"joint": conditional.coef("x")}
        cond_se = conditional.se("x")

        def expected_beta(x: float) -> tuple[float, float]:
            return cond_slopes["joint"], cond_se

        uncond = cond_slopes["joint"]

    per_x = []
    all_ok = True
    for x in x_probe_points:
        val, se_val = expected_beta(float(x))
        gap = abs(val - beta_tilde)
        band = 3.0 * math.sqrt(se_val**2 + se_tilde**2)
        ok = gap <= band
        all_ok = all_ok and ok
        per_x.append(
            {
                "x": float(x),
                "expected_conditional_beta": val,
                "marginal_beta": beta_tilde,
                "gap": gap,
                "band": band,
                "within_band": ok,
            }
        )
    slopes = list(cond_slopes.values())
    reversal = (
        all(s > 0 for s in slopes) and beta_tilde < 0
        or all(s < 0 for s in slopes) and beta_tilde > 0
    )
    return BetaCollapsibilityReport(
        family=spec.family,
        conditional_slopes=cond_slopes,
        marginal_slope=beta_tilde,
        marginal_se=se_tilde,
        per_x=tuple(per_x),
        unconditional_average=uncond,
        collapsible=all_ok,
        reversal=reversal,
    )
