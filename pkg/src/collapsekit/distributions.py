"""Closed-form densities, distribution functions, and seeded samplers.

Families are identified by tag.  The gamma family is parameterised as
(rate, shape) so that its mean is shape/rate; the tempered-normal family
with parameters (center, lam) is the exponentially tilted Gaussian whose
density collapses to phi(w - center + lam), i.e. a unit-variance normal
shifted left by lam.

Log-space evaluation keeps pmfs stable for counts into the hundreds and
avoids 0 * inf artifacts when quadrature probes far tails.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import InvalidParams
from .numerics import Interval

Seed = int

_ARITY = {
    "normal": 2,
    "uniform": 2,
    "gamma": 2,
    "poisson": 1,
    "negative-binomial": 2,
    "bernoulli": 1,
    "tempered-normal": 2,
}

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class Family:
    """A distribution family tag plus its ordered parameter list."""

    tag: str
    params: tuple[float, ...]

    def __post_init__(self):
        if self.tag not in _ARITY:
            raise InvalidParams(f"unknown family tag {self.tag!r}")
        if len(self.params) != _ARITY[self.tag]:
            raise InvalidParams(
                f"{self.tag} takes {_ARITY[self.tag]} parameters, got {len(self.params)}"
            )
        p = self.params
        if any(not math.isfinite(v) for v in p):
            raise InvalidParams(f"{self.tag} parameters must be finite: {p}")
        if self.tag == "normal" and p[1] <= 0:
            raise InvalidParams("normal sd must be positive")
        if self.tag == "uniform" and not p[0] < p[1]:
            raise InvalidParams("uniform requires lo < hi")
        if self.tag == "gamma" and (p[0] <= 0 or p[1] <= 0):
            raise InvalidParams("gamma rate and shape must be positive")
        if self.tag == "poisson" and p[0] <= 0:
            raise InvalidParams("poisson mean must be positive")
        if self.tag == "negative-binomial" and (p[0] <= 0 or not 0 < p[1] < 1):
            raise InvalidParams("negative-binomial needs size > 0 and prob in (0,1)")
        if self.tag == "bernoulli" and not 0 <= p[0] <= 1:
            raise InvalidParams("bernoulli probability must lie in [0,1]")
        if self.tag == "tempered-normal" and p[1] <= 0:
            raise InvalidParams("tempered-normal lam must be positive")

    @property
    def discrete(self) -> bool:
        return self.tag in ("poisson", "negative-binomial", "bernoulli")


def normal(mu: float, sd: float) -> Family:
    return Family("normal", (float(mu), float(sd)))


def uniform(lo: float, hi: float) -> Family:
    return Family("uniform", (float(lo), float(hi)))


def gamma(rate: float, shape: float) -> Family:
    return Family("gamma", (float(rate), float(shape)))


def poisson(mean: float) -> Family:
    return Family("poisson", (float(mean),))


def negative_binomial(size: float, prob: float) -> Family:
    return Family("negative-binomial", (float(size), float(prob)))


def bernoulli(p: float) -> Family:
    return Family("bernoulli", (float(p),))


def tempered_normal(center: float, lam: float) -> Family:
    return Family("tempered-normal", (float(center), float(lam)))


def support(family: Family) -> Interval:
    t, p = family.tag, family.params
    if t in ("normal", "tempered-normal"):
        return Interval(-math.inf, math.inf)
    if t == "uniform":
        return Interval(p[0], p[1])
    if t == "gamma":
        return Interval(0.0, math.inf)
    # Count supports: open upper end keeps quadrature helpers away.
    return Interval(-0.5, math.inf)


def mean(family: Family) -> float:
    t, p = family.tag, family.params
    if t == "normal":
        return p[0]
    if t == "uniform":
        return 0.5 * (p[0] + p[1])
    if t == "gamma":
        return p[1] / p[0]
    if t == "poisson":
        return p[0]
    if t == "negative-binomial":
        r, q = p
        return r * (1.0 - q) / q
    if t == "bernoulli":
        return p[0]
    # tempered-normal
    return p[0] - p[1]


def variance(family: Family) -> float:
    t, p = family.tag, family.params
    if t == "normal":
        return p[1] ** 2
    if t == "uniform":
        return (p[1] - p[0]) ** 2 / 12.0
    if t == "gamma":
        return p[1] / p[0] ** 2
    if t == "poisson":
        return p[0]
    if t == "negative-binomial":
        r, q = p
        return r * (1.0 - q) / q**2
    if t == "bernoulli":
        return p[0] * (1.0 - p[0])
    return 1.0


def _log_pdf(family: Family, pts: np.ndarray) -> np.ndarray:
    t, p = family.tag, family.params
    out = np.full(pts.shape, -np.inf)
    if t == "normal":
        mu, sd = p
        z = (pts - mu) / sd
        return -0.5 * z * z - math.log(sd) - _LOG_SQRT_2PI
    if t == "tempered-normal":
        center, lam = p
        z = pts - center + lam
        return -0.5 * z * z - _LOG_SQRT_2PI
    if t == "uniform":
        lo, hi = p
        inside = (pts >= lo) & (pts <= hi)
        out[inside] = -math.log(hi - lo)
        return out
    if t == "gamma":
        rate, shape = p
        pos = pts > 0
        w = pts[pos]
        out[pos] = (
            shape * math.log(rate)
            + (shape - 1.0) * np.log(w)
            - rate * w
            - math.lgamma(shape)
        )
        return out
    if t == "poisson":
        lam = p[0]
        y = np.round(pts)
        ok = (pts >= 0) & (np.abs(pts - y) < 1e-9)
        yk = y[ok]
        out[ok] = yk * math.log(lam) - lam - special.gammaln(yk + 1.0)
        return out
    if t == "negative-binomial":
        r, q = p
        y = np.round(pts)
        ok = (pts >= 0) & (np.abs(pts - y) < 1e-9)
        yk = y[ok]
        out[ok] = (
            special.gammaln(yk + r)
            - special.gammaln(yk + 1.0)
            - special.gammaln(r)
            + r * math.log(q)
            + yk * math.log1p(-q)
        )
        return out
    # bernoulli
    prob = p[0]
    with np.errstate(divide="ignore"):
        one = np.where(np.abs(pts - 1.0) < 1e-9, math.log(prob) if prob > 0 else -np.inf, -np.inf)
        zero = np.where(np.abs(pts) < 1e-9, math.log1p(-prob) if prob < 1 else -np.inf, -np.inf)
    return np.maximum(one, zero)


def pdf_or_pmf(family: Family, point):
    """Density (continuous) or probability mass (discrete) at ``point``.

    Points outside the support return 0 rather than raising; vectorised
    over array inputs.
    """
    pts = np.asarray(point, dtype=float)
    scalar = pts.ndim == 0
    values = np.exp(_log_pdf(family, np.atleast_1d(pts)))
    return float(values[0]) if scalar else values.reshape(pts.shape)


def cdf(family: Family, point):
    """Distribution function; right-continuous step for count families."""
    pts = np.asarray(point, dtype=float)
    scalar = pts.ndim == 0
    x = np.atleast_1d(pts)
    t, p = family.tag, family.params
    if t == "normal":
        out = special.ndtr((x - p[0]) / p[1])
    elif t == "tempered-normal":
        out = special.ndtr(x - p[0] + p[1])
    elif t == "uniform":
        lo, hi = p
        out = np.clip((x - lo) / (hi - lo), 0.0, 1.0)
    elif t == "gamma":
        rate, shape = p
        out = np.where(x > 0, special.gammainc(shape, rate * np.maximum(x, 0.0)), 0.0)
    elif t == "poisson":
        lam = p[0]
        k = np.floor(x)
        out = np.where(x >= 0, special.gammaincc(k + 1.0, lam), 0.0)
    elif t == "negative-binomial":
        r, q = p
        k = np.floor(x)
        out = np.where(x >= 0, special.betainc(r, np.maximum(k, 0.0) + 1.0, q), 0.0)
    else:  # bernoulli
        prob = p[0]
        out = np.where(x < 0, 0.0, np.where(x < 1, 1.0 - prob, 1.0))
    return float(out[0]) if scalar else out.reshape(pts.shape)


def sample(family: Family, n: int, seed: Seed) -> np.ndarray:
    """Draw ``n`` variates; identical seeds give bit-identical streams.

    Each call owns a fresh generator derived from its seed, so there is
    no cross-invocation state.
    """
    if n < 1:
        raise InvalidParams("n must be >= 1")
    rng = np.random.default_rng(seed)
    return sample_with(family, n, rng)


def sample_with(family: Family, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw from an existing generator (used by simulation pipelines)."""
    t, p = family.tag, family.params
    if t == "normal":
        return rng.normal(p[0], p[1], size=n)
    if t == "tempered-normal":
        return rng.normal(p[0] - p[1], 1.0, size=n)
    if t == "uniform":
        return rng.uniform(p[0], p[1], size=n)
    if t == "gamma":
        rate, shape = p
        return rng.gamma(shape, 1.0 / rate, size=n)
    if t == "poisson":
        return rng.poisson(p[0], size=n).astype(float)
    if t == "negative-binomial":
        r, q = p
        return rng.negative_binomial(r, q, size=n).astype(float)
    # bernoulli
    return (rng.random(n) < p[0]).astype(float)
