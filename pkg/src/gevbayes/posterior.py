"""Posterior functionals: summaries, credible sets, return levels,
extreme quantiles and the posterior predictive distribution.

All operations are pure maps over an immutable set of draws. Empirical
quantiles use the type-7 (linear interpolation) rule throughout.
Interval endpoints are always reported in ascending numeric order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaincinv, ndtri

from ._pykernels import GAMMA_SWITCH
from .errors import DomainError
from .gev import GevParams
from .sampler import PosteriorDraws

__all__ = [
    "ScalarPosterior",
    "CredibleInterval",
    "EllipsoidRegion",
    "PosteriorSummary",
    "summarize",
    "credible_interval_asymmetric",
    "credible_interval_symmetric",
    "ellipsoid_region",
    "return_level_posterior",
    "extreme_quantile_posterior",
    "predictive_cdf",
    "predictive_quantile",
    "predictive_density",
]


@dataclass(frozen=True)
class ScalarPosterior:
    """Draws of a scalar functional of the GEV parameters."""

    draws: np.ndarray
    label: str = ""

    def __post_init__(self):
        arr = np.asarray(self.draws, dtype=float).ravel()
        object.__setattr__(self, "draws", arr)
        if arr.size < 2:
            raise DomainError("a scalar posterior needs at least two draws")
        if not np.all(np.isfinite(arr)):
            raise DomainError("scalar posterior draws must all be finite")

    @property
    def n(self) -> int:
        return int(self.draws.size)

    def mean(self) -> float:
        return float(self.draws.mean())

    def sd(self) -> float:
        return float(self.draws.std(ddof=1))


@dataclass(frozen=True)
class CredibleInterval:
    lower: float
    upper: float
    level: float
    kind: str  # "asymmetric-quantile" or "symmetric-normal"
    degenerate_tail: bool = False

    def contains(self, x: float) -> bool:
        return self.lower <= x <= self.upper

    @property
    def width(self) -> float:
        return self.upper - self.lower


@dataclass(frozen=True)
class EllipsoidRegion:
    """Normal-approximation HPD region for the parameter triple."""

    center: np.ndarray
    cov_sqrt: np.ndarray
    radius: float
    level: float

    def contains(self, theta) -> bool:
        v = theta.as_array() if isinstance(theta, GevParams) else np.asarray(theta, float)
        y = np.linalg.solve(self.cov_sqrt, v - self.center)
        return float(y @ y) <= self.radius * self.radius


@dataclass(frozen=True)
class PosteriorSummary:
    mean: np.ndarray
    cov: np.ndarray
    sd: np.ndarray
    quantiles: dict


def _check_alpha(alpha: float):
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must be in (0,1), got {alpha}")


def summarize(draws: PosteriorDraws, probs=(0.025, 0.25, 0.5, 0.75, 0.975)) -> PosteriorSummary:
    """Posterior mean, covariance, marginal sds and type-7 quantiles."""
    arr = draws.draws
    if arr.shape[0] < 2:
        raise DomainError("need at least two draws to summarize")
    mean = arr.mean(axis=0)
    cov = np.cov(arr, rowvar=False, ddof=1)
    qs = {float(p): np.quantile(arr, p, axis=0) for p in probs}
    return PosteriorSummary(mean=mean, cov=cov, sd=np.sqrt(np.diag(cov)), quantiles=qs)


def credible_interval_asymmetric(sp: ScalarPosterior, alpha: float) -> CredibleInterval:
    """Central interval from the empirical alpha/2 and 1-alpha/2 quantiles."""
    _check_alpha(alpha)
    degenerate = sp.n * alpha / 2.0 < 1.0
    lo = float(np.quantile(sp.draws, alpha / 2.0))
    hi = float(np.quantile(sp.draws, 1.0 - alpha / 2.0))
    return CredibleInterval(lo, hi, 1.0 - alpha, "asymmetric-quantile", degenerate)


def credible_interval_symmetric(sp: ScalarPosterior, alpha: float) -> CredibleInterval:
    """Normal-approximation interval mean +- z_{alpha/2} * sd."""
    _check_alpha(alpha)
    z = float(ndtri(1.0 - alpha / 2.0))
    m, s = sp.mean(), sp.sd()
    return CredibleInterval(m - z * s, m + z * s, 1.0 - alpha, "symmetric-normal")


def ellipsoid_region(draws: PosteriorDraws, alpha: float) -> EllipsoidRegion:
    """HPD ellipsoid center mu_hat, shape Sigma_hat^(1/2), radius chi2 quantile."""
    _check_alpha(alpha)
    s = summarize(draws)
    evals, evecs = np.linalg.eigh(s.cov)
    if np.min(evals) <= 0.0:
        raise DomainError("posterior covariance is singular; ellipsoid undefined")
    sqrt_cov = (evecs * np.sqrt(evals)) @ evecs.T
    radius = math.sqrt(2.0 * float(gammaincinv(1.5, 1.0 - alpha)))  # chi2_3 quantile
    return EllipsoidRegion(center=s.mean, cov_sqrt=sqrt_cov, radius=radius,
                           level=1.0 - alpha)


def _drawwise_quantile(draws: PosteriorDraws, log_l: float) -> np.ndarray:
    """Vectorized mu + sigma * (l^-gamma - 1)/gamma over the draws."""
    g = draws.gamma
    out = np.empty(g.shape)
    small = np.abs(g) < GAMMA_SWITCH
    out[small] = draws.mu[small] - draws.sigma[small] * log_l
    gs = g[~small]
    out[~small] = draws.mu[~small] + draws.sigma[~small] * np.expm1(-gs * log_l) / gs
    return out


def return_level_posterior(draws: PosteriorDraws, period: float) -> ScalarPosterior:
    """Posterior of the T-period return level, the (1 - 1/T) quantile."""
    period = float(period)
    if period <= 1.0:
        raise DomainError(f"return period must exceed 1, got {period}")
    log_l = math.log(-math.log1p(-1.0 / period))
    return ScalarPosterior(_drawwise_quantile(draws, log_l),
                           label=f"return level T={period:g}")


def extreme_quantile_posterior(draws: PosteriorDraws, p: float,
                               m: int | None = None) -> ScalarPosterior:
    """Posterior of the p-exceedance quantile of the underlying observations.

    Maps each draw through the aggregated level p_m = 1 - (1-p)^m with
    m defaulting to the sample's block size.
    """
    if not 0.0 < p < 1.0:
        raise DomainError(f"p must be in (0,1), got {p}")
    m = draws.block_size_m if m is None else int(m)
    if m < 1:
        raise DomainError(f"m must be >= 1, got {m}")
    log_l = math.log(-m * math.log1p(-p))
    return ScalarPosterior(_drawwise_quantile(draws, log_l),
                           label=f"extreme quantile p={p:g}, m={m}")


def predictive_cdf(draws: PosteriorDraws, x: float) -> float:
    """Posterior predictive distribution function: the draw-average CDF."""
    vals = gev_cdf_many_draws(draws.draws, float(x))
    return float(vals.mean())


def gev_cdf_many_draws(thetas: np.ndarray, x: float) -> np.ndarray:
    """CDF of one point under each draw (N,3) -> (N,)."""
    g, mu, sg = thetas[:, 0], thetas[:, 1], thetas[:, 2]
    z = (x - mu) / sg
    out = np.empty(z.shape)
    small = np.abs(g) < GAMMA_SWITCH
    with np.errstate(over="ignore"):
        out[small] = np.exp(-np.exp(-z[small]))
        gs, zs = g[~small], z[~small]
        t = 1.0 + gs * zs
        ok = t > 0.0
        sub = np.empty(gs.shape)
        sub[ok] = np.exp(-np.exp(-np.log1p(gs[ok] * zs[ok]) / gs[ok]))
        sub[~ok] = np.where(gs[~ok] > 0.0, 0.0, 1.0)
        out[~small] = sub
    return out


def predictive_quantile(draws: PosteriorDraws, p: float) -> float:
    """Level exceeded by a future block maximum with predictive probability p.

    Solves predictive_cdf(x) = 1 - p by bisection between the smallest
    and largest drawwise quantiles; the result satisfies
    |predictive_cdf(x) - (1-p)| <= 1e-10.
    """
    if not 0.0 < p < 1.0:
        raise DomainError(f"p must be in (0,1), got {p}")
    target = 1.0 - p
    log_l = math.log(-math.log1p(-p))
    drawwise = _drawwise_quantile(draws, log_l)
    lo, hi = float(drawwise.min()), float(drawwise.max())
    if hi - lo < 1e-300:
        return lo
    flo = predictive_cdf(draws, lo) - target
    fhi = predictive_cdf(draws, hi) - target
    if flo > 0.0 or fhi < 0.0:
        raise DomainError("bracketing failed for the predictive quantile")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = predictive_cdf(draws, mid) - target
        if abs(fm) <= 1e-12:
            return mid
        if fm < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-13 * max(1.0, abs(hi)):
            break
    return 0.5 * (lo + hi)


def predictive_density(draws: PosteriorDraws, x: float) -> float:
    """Posterior predictive density: draw-average of the GEV density at x.

    Draws whose support excludes x contribute zero.
    """
    thetas = draws.draws
    g, mu, sg = thetas[:, 0], thetas[:, 1], thetas[:, 2]
    z = (float(x) - mu) / sg
    out = np.zeros(z.shape)
    small = np.abs(g) < GAMMA_SWITCH
    with np.errstate(over="ignore"):
        out[small] = np.exp(-z[small] - np.exp(-z[small])) / sg[small]
        gs, zs, ss = g[~small], z[~small], sg[~small]
        t = 1.0 + gs * zs
        ok = t > 0.0
        sub = np.zeros(gs.shape)
        lt = np.log1p(gs[ok] * zs[ok])
        sub[ok] = np.exp(-(1.0 + 1.0 / gs[ok]) * lt - np.exp(-lt / gs[ok])) / ss[ok]
        out[~small] = sub
    return float(out.mean())
