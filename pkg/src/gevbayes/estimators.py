"""Frequentist point estimators used to center the data-dependent prior.

Two routes: probability-weighted moments (fast, closed form, shape
restricted to (-1, 1)) and maximum likelihood (quasi-Newton on
(gamma, mu, log sigma) with the analytic score). PWM doubles as the ML
initializer and as the fallback when ML does not converge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from ._backend import kernels
from ._pykernels import score_many
from .errors import EstimationError
from .gev import BlockMaxSample, GevParams, log_likelihood

__all__ = ["FitResult", "pwm_fit", "ml_fit"]

_EULER_GAMMA = 0.5772156649015329
_GAMMA_FLOOR = -1.0 + 1e-6


@dataclass(frozen=True)
class FitResult:
    theta_hat: GevParams
    converged: bool
    log_lik: float
    n_iter: int
    method: str  # "pwm" or "ml"


def _check_sample(sample: BlockMaxSample, min_k: int = 3):
    if sample.k < min_k:
        raise EstimationError(f"need at least {min_k} block maxima, got {sample.k}")
    if float(np.ptp(sample.maxima)) == 0.0:
        raise EstimationError("degenerate sample: all block maxima are equal")


def pwm_fit(sample: BlockMaxSample) -> FitResult:
    """Probability-weighted-moment estimate (Hosking-Wallis-Wood form).

    The rational approximation for the shape keeps gamma inside (-1, 1);
    values are clipped to that open interval for safety. Ties are handled
    by the order statistics themselves (no jitter), so the result is
    deterministic.
    """
    _check_sample(sample)
    x = np.sort(sample.maxima)
    k = x.size
    i = np.arange(1, k + 1, dtype=float)
    b0 = x.mean()
    b1 = np.sum((i - 1.0) / (k - 1.0) * x) / k
    b2 = np.sum((i - 1.0) * (i - 2.0) / ((k - 1.0) * (k - 2.0)) * x) / k

    c = (2.0 * b1 - b0) / (3.0 * b2 - b0) - math.log(2.0) / math.log(3.0)
    kh = 7.8590 * c + 2.9554 * c * c  # Hosking's shape convention (= -gamma)
    kh = min(max(kh, -1.0 + 1e-6), 1.0 - 1e-6)
    if abs(kh) < 1e-8:
        sigma = (2.0 * b1 - b0) / math.log(2.0)
        mu = b0 - _EULER_GAMMA * sigma
        gamma = 0.0
    else:
        g1 = math.gamma(1.0 + kh)
        sigma = (2.0 * b1 - b0) * kh / (g1 * (1.0 - 2.0 ** (-kh)))
        mu = b0 + sigma * (g1 - 1.0) / kh
        gamma = -kh
    if not (math.isfinite(mu) and math.isfinite(sigma) and sigma > 0.0):
        raise EstimationError("PWM produced non-finite or non-positive scale estimates")
    theta = GevParams(float(gamma), float(mu), float(sigma))
    return FitResult(theta, True, log_likelihood(theta, sample), 0, "pwm")


def _neg_loglik_and_grad(params: np.ndarray, x: np.ndarray):
    """Objective for ML: -loglik on (gamma, mu, log sigma), with gradient.

    Outside the support a finite penalty growing with the violation is
    returned so the line search walks back into the feasible region.
    """
    g, mu, ls = params
    sigma = math.exp(ls)
    z = (x - mu) / sigma
    t = 1.0 + g * z
    bad = t <= 1e-12
    if np.any(bad):
        viol = float(np.sum(1e-12 - t[bad]))
        # d(viol)/d(gamma, mu, log sigma); enough to point back inside.
        dg = float(-np.sum(z[bad]))
        dmu = float(bad.sum() * g / sigma)
        dls = float(np.sum(g * z[bad]))
        return 1e10 * (1.0 + viol), np.array([1e10 * dg, 1e10 * dmu, 1e10 * dls])
    ll = kernels.gev_loglik(g, mu, sigma, x)
    s = score_many(g, mu, sigma, x).sum(axis=0)
    # chain rule: d/d(log sigma) = sigma * d/d(sigma)
    grad = np.array([s[0], s[1], s[2] * sigma])
    return -ll, -grad


def ml_fit(sample: BlockMaxSample, init: GevParams | None = None) -> FitResult:
    """Maximum-likelihood fit with gamma constrained to (-1, inf).

    Runs L-BFGS-B on (gamma, mu, log sigma) from ``init`` (default: the
    PWM fit). A non-converged result is returned with ``converged=False``
    rather than raised, so callers can decide on a fallback.
    """
    _check_sample(sample)
    x = sample.maxima
    if init is None:
        init = pwm_fit(sample).theta_hat
    p0 = np.array([max(init.gamma, _GAMMA_FLOOR + 1e-6), init.mu, math.log(init.sigma)])
    # Nudge the start point inside the support if needed.
    for _ in range(60):
        f0, _grad = _neg_loglik_and_grad(p0, x)
        if f0 < 1e9:
            break
        p0[2] += math.log(1.25)
        p0[0] *= 0.8
    res = minimize(
        _neg_loglik_and_grad,
        p0,
        args=(x,),
        method="L-BFGS-B",
        jac=True,
        bounds=[(_GAMMA_FLOOR, 50.0), (None, None), (None, None)],
        options={"maxiter": 500, "ftol": 1e-14, "gtol": 1e-10},
    )
    g, mu, ls = res.x
    sigma = math.exp(ls)
    theta = GevParams(float(g), float(mu), float(sigma))
    ll = log_likelihood(theta, sample)
    grad_norm = float(np.linalg.norm(score_many(g, mu, sigma, x).sum(axis=0))) \
        if math.isfinite(ll) else math.inf
    converged = bool(math.isfinite(ll) and grad_norm <= 1e-4 * sample.k)
    return FitResult(theta, converged, ll, int(res.nit), "ml")
