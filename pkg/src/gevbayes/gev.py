"""Generalized extreme value distribution machinery.

Numerically stable density, CDF, quantile, support, log-likelihood,
analytic score and a numeric Fisher-information diagnostic. The shape
parameter is called ``gamma`` throughout (the tail index); ``mu`` and
``sigma`` are location and scale.

Quantile convention: ``gev_quantile(theta, p)`` returns the (1-p)
quantile, i.e. the level exceeded with probability p. This matches the
return-level convention used elsewhere in the package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from ._pykernels import (
    GAMMA_SWITCH,
    gev_cdf_many,
    gev_logpdf_many,
    score_many,
)
from .errors import DomainError

__all__ = [
    "GevParams",
    "GevSupport",
    "BlockMaxSample",
    "gev_log_density",
    "gev_cdf",
    "gev_quantile",
    "extreme_quantile",
    "support",
    "log_likelihood",
    "score",
    "score_process",
    "fisher_info_numeric",
]


@dataclass(frozen=True)
class GevParams:
    """GEV parameter triple (tail index, location, scale)."""

    gamma: float
    mu: float
    sigma: float

    def __post_init__(self):
        if not (math.isfinite(self.gamma) and math.isfinite(self.mu) and math.isfinite(self.sigma)):
            raise DomainError(f"non-finite GEV parameters {self}")
        if self.sigma <= 0.0:
            raise DomainError(f"sigma must be positive, got {self.sigma}")

    def as_array(self) -> np.ndarray:
        return np.array([self.gamma, self.mu, self.sigma])


@dataclass(frozen=True)
class GevSupport:
    """Support interval of a GEV distribution (closed at finite ends)."""

    lower: float
    upper: float

    def contains(self, x: float, strict: bool = False) -> bool:
        if strict:
            return self.lower < x < self.upper
        return self.lower <= x <= self.upper


@dataclass(frozen=True)
class BlockMaxSample:
    """k block maxima together with the block size they came from."""

    maxima: np.ndarray
    block_size_m: int
    label: str = ""

    def __post_init__(self):
        arr = np.ascontiguousarray(np.asarray(self.maxima, dtype=float).ravel())
        object.__setattr__(self, "maxima", arr)
        if arr.size < 1:
            raise DomainError("a block-maxima sample needs at least one value")
        if not np.all(np.isfinite(arr)):
            raise DomainError("block maxima must all be finite")
        if int(self.block_size_m) < 1:
            raise DomainError(f"block size must be >= 1, got {self.block_size_m}")
        object.__setattr__(self, "block_size_m", int(self.block_size_m))

    @property
    def k(self) -> int:
        return int(self.maxima.size)


def support(theta: GevParams) -> GevSupport:
    """Support set: [mu - sigma/gamma, inf), R, or (-inf, mu - sigma/gamma]."""
    if theta.gamma > 0.0:
        return GevSupport(theta.mu - theta.sigma / theta.gamma, math.inf)
    if theta.gamma < 0.0:
        return GevSupport(-math.inf, theta.mu - theta.sigma / theta.gamma)
    return GevSupport(-math.inf, math.inf)


def _check_x(x: float) -> float:
    x = float(x)
    if not math.isfinite(x):
        raise DomainError(f"x must be finite, got {x}")
    return x


def gev_log_density(theta: GevParams, x: float) -> float:
    """Log-density at x; -inf outside the support.

    For |gamma| below 1e-8 the Gumbel limit branch
    log g = -z - exp(-z) - log(sigma) is used.
    """
    x = _check_x(x)
    return float(gev_logpdf_many(theta.gamma, theta.mu, theta.sigma, np.array([x]))[0])


def gev_cdf(theta: GevParams, x: float) -> float:
    """Distribution function at x, clamped to {0, 1} beyond the support."""
    x = _check_x(x)
    return float(gev_cdf_many(theta.gamma, theta.mu, theta.sigma, np.array([x]))[0])


def _quantile_from_log_return(theta: GevParams, log_l: float) -> float:
    # Quantile expressed through l = -log(1 - p): mu + sigma*(l^-gamma - 1)/gamma.
    g = theta.gamma
    if abs(g) < GAMMA_SWITCH:
        return theta.mu - theta.sigma * log_l
    return theta.mu + theta.sigma * math.expm1(-g * log_l) / g


def gev_quantile(theta: GevParams, p: float) -> float:
    """The (1-p)-quantile: gev_cdf(theta, gev_quantile(theta, p)) == 1 - p."""
    p = float(p)
    if not (0.0 < p < 1.0):
        raise DomainError(f"p must lie in (0, 1), got {p}")
    l = -math.log1p(-p)
    return _quantile_from_log_return(theta, math.log(l))


def extreme_quantile(theta: GevParams, p: float, m: int) -> float:
    """Quantile at the aggregated level p_m = 1 - (1-p)^m.

    Used to push a block-maxima fit back to a quantile of the underlying
    observations: for block size m, the p-exceedance level of a single
    observation corresponds to the p_m level of the block maximum. The
    evaluation goes through -m*log1p(-p), so tiny p*m is exact.
    """
    p = float(p)
    if not (0.0 < p < 1.0):
        raise DomainError(f"p must lie in (0, 1), got {p}")
    m = int(m)
    if m < 1:
        raise DomainError(f"m must be >= 1, got {m}")
    l = -m * math.log1p(-p)
    return _quantile_from_log_return(theta, math.log(l))


def log_likelihood(theta: GevParams, sample: BlockMaxSample) -> float:
    """Sum of log-densities over the sample; -inf if any point is outside."""
    return float(kernels.gev_loglik(theta.gamma, theta.mu, theta.sigma, sample.maxima))


def score(theta: GevParams, x: float) -> np.ndarray:
    """Analytic gradient of the log-density in (gamma, mu, sigma).

    x must be strictly interior to the support.
    """
    x = _check_x(x)
    if not support(theta).contains(x, strict=True):
        raise DomainError(f"x={x} is not interior to the support of {theta}")
    return score_many(theta.gamma, theta.mu, theta.sigma, np.array([x]))[0]


def score_process(theta: GevParams, sample: BlockMaxSample) -> np.ndarray:
    """k^(-1/2) times the summed score over the sample."""
    sup = support(theta)
    xs = sample.maxima
    if not (np.all(xs > sup.lower) and np.all(xs < sup.upper)):
        raise DomainError("sample contains points on or outside the support boundary")
    s = score_many(theta.gamma, theta.mu, theta.sigma, xs)
    return s.sum(axis=0) / math.sqrt(sample.k)


def fisher_info_numeric(gamma0: float, method: str = "quadrature",
                        n_mc: int = 1_000_000, seed: int = 0) -> np.ndarray:
    """Numeric Fisher information of the standardized GEV (gamma0, 0, 1).

    Diagnostic only: E[score score^T], estimated either by adaptive
    quadrature over the probability scale (default) or by Monte Carlo.
    Finite for gamma0 > -1/2.
    """
    gamma0 = float(gamma0)
    if gamma0 <= -0.5:
        raise DomainError("Fisher information diagnostic requires gamma0 > -1/2")
    theta = GevParams(gamma0, 0.0, 1.0)
    if method == "mc":
        rng = np.random.default_rng(seed)
        xs = _quantile_many(theta, rng.random(n_mc))
        s = score_many(gamma0, 0.0, 1.0, xs)
        return (s.T @ s) / n_mc
    if method != "quadrature":
        raise DomainError(f"unknown method {method!r}")

    from scipy.integrate import quad

    def entry(i, j):
        def integrand(u):
            x = _quantile_many(theta, np.array([u]))[0]
            s = score_many(gamma0, 0.0, 1.0, np.array([x]))[0]
            return s[i] * s[j]
        val, _ = quad(integrand, 0.0, 1.0, limit=300)
        return val

    info = np.empty((3, 3))
    for i in range(3):
        for j in range(i, 3):
            info[i, j] = info[j, i] = entry(i, j)
    return info


def _quantile_many(theta: GevParams, u: np.ndarray) -> np.ndarray:
    """Vectorized G^{-1}(u) for u in (0,1) (plain probability scale)."""
    l = -np.log(u)
    g = theta.gamma
    if abs(g) < GAMMA_SWITCH:
        return theta.mu - theta.sigma * np.log(l)
    return theta.mu + theta.sigma * np.expm1(-g * np.log(l)) / g
