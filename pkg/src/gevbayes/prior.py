"""Data-dependent prior for the GEV parameters.

The prior factorizes as

    pi(theta) = pi_sh(gamma)
                * pi_loc((mu - b_hat)/a_hat) / a_hat
                * pi_sc(sigma/a_hat) / a_hat

where (b_hat, a_hat) are the fitted location/scale estimates of the
sample and the three kernels are data-free probability densities.
Defaults: Student-t with 1 degree of freedom truncated to (-1, inf) for
the shape, standard normal for the rescaled location, unit-mean
exponential for the rescaled scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.stats import t as student_t

from ._pykernels import (
    KERNEL_GAMMA,
    KERNEL_NORMAL,
    KERNEL_STUDENT_T,
    KERNEL_UNIFORM,
)
from .errors import DomainError, EstimationError
from .estimators import FitResult, ml_fit, pwm_fit
from .gev import BlockMaxSample, GevParams, log_likelihood

__all__ = [
    "PriorKernel",
    "TruncatedTShapeKernel",
    "UniformKernel",
    "NormalKernel",
    "GammaScaleKernel",
    "DataDependentPrior",
    "build_prior",
    "log_prior",
    "log_unnormalized_posterior",
]

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class PriorKernel:
    """A one-dimensional probability kernel.

    Subclasses set ``code`` and ``coded_params`` so the compiled sampler
    can evaluate them without Python callbacks; ``code = -1`` means the
    kernel is only usable through ``log_density`` (the sampler then runs
    its generic Python loop).
    """

    code: int = -1

    @property
    def coded_params(self) -> tuple[float, float, float]:
        return (0.0, 0.0, 0.0)

    def log_density(self, x: float) -> float:
        raise NotImplementedError


class TruncatedTShapeKernel(PriorKernel):
    """Student-t density truncated to (-1, inf), renormalized.

    nu = 1 (Cauchy) gives truncation constant 1/(1 - T_1(-1)) = 4/3.
    """

    code = KERNEL_STUDENT_T

    def __init__(self, nu: float = 1.0):
        if nu <= 0:
            raise DomainError(f"degrees of freedom must be positive, got {nu}")
        self.nu = float(nu)
        self._lognorm = (
            math.lgamma((nu + 1.0) / 2.0)
            - math.lgamma(nu / 2.0)
            - 0.5 * math.log(nu * math.pi)
            - math.log1p(-float(student_t.cdf(-1.0, df=nu)))
        )

    @property
    def coded_params(self):
        return (self.nu, 0.0, self._lognorm)

    def log_density(self, x: float) -> float:
        if x <= -1.0:
            return -math.inf
        return self._lognorm - 0.5 * (self.nu + 1.0) * math.log1p(x * x / self.nu)


class UniformKernel(PriorKernel):
    """Uniform density on (lo, hi)."""

    code = KERNEL_UNIFORM

    def __init__(self, lo: float, hi: float):
        if not lo < hi:
            raise DomainError(f"need lo < hi, got ({lo}, {hi})")
        self.lo = float(lo)
        self.hi = float(hi)
        self._logdens = -math.log(hi - lo)

    @property
    def coded_params(self):
        return (self.lo, self.hi, self._logdens)

    def log_density(self, x: float) -> float:
        return self._logdens if self.lo < x < self.hi else -math.inf


class NormalKernel(PriorKernel):
    """Normal density, by default standard; used on the rescaled location."""

    code = KERNEL_NORMAL

    def __init__(self, mean: float = 0.0, sd: float = 1.0):
        if sd <= 0:
            raise DomainError(f"sd must be positive, got {sd}")
        self.mean = float(mean)
        self.sd = float(sd)
        self._lognorm = -math.log(sd) - _LOG_SQRT_2PI

    @property
    def coded_params(self):
        return (self.mean, self.sd, self._lognorm)

    def log_density(self, x: float) -> float:
        u = (x - self.mean) / self.sd
        return self._lognorm - 0.5 * u * u


class GammaScaleKernel(PriorKernel):
    """Gamma density on the rescaled scale sigma/a_hat, for x > 0.

    The default shape=1, scale=1 is the unit-mean exponential exp(-x).
    """

    code = KERNEL_GAMMA

    def __init__(self, shape: float = 1.0, scale: float = 1.0):
        if shape <= 0 or scale <= 0:
            raise DomainError("gamma kernel needs positive shape and scale")
        self.shape = float(shape)
        self.scale = float(scale)
        self._lognorm = -math.lgamma(shape) - shape * math.log(scale)

    @property
    def coded_params(self):
        return (self.shape, self.scale, self._lognorm)

    def log_density(self, x: float) -> float:
        if x <= 0.0:
            return -math.inf
        return self._lognorm + (self.shape - 1.0) * math.log(x) - x / self.scale


@dataclass(frozen=True)
class DataDependentPrior:
    """Frozen prior: the three kernels plus the fitted centering estimates."""

    a_hat: float
    b_hat: float
    shape_kernel: PriorKernel
    loc_kernel: PriorKernel
    scale_kernel: PriorKernel
    fit: FitResult | None = None

    def __post_init__(self):
        if not (self.a_hat > 0.0 and math.isfinite(self.a_hat)):
            raise DomainError(f"a_hat must be positive and finite, got {self.a_hat}")
        if not math.isfinite(self.b_hat):
            raise DomainError(f"b_hat must be finite, got {self.b_hat}")

    @property
    def coded(self) -> bool:
        return all(
            k.code >= 0 for k in (self.shape_kernel, self.loc_kernel, self.scale_kernel)
        )


def build_prior(
    sample: BlockMaxSample,
    shape_kernel: PriorKernel | None = None,
    loc_kernel: PriorKernel | None = None,
    scale_kernel: PriorKernel | None = None,
    centering: str = "ml",
) -> DataDependentPrior:
    """Fit the centering estimates and assemble the prior.

    ``centering`` selects the estimator ("ml" with PWM fallback on
    non-convergence, or "pwm"). The prior is built once per dataset and
    never refit afterwards.
    """
    if centering not in ("ml", "pwm"):
        raise DomainError(f"centering must be 'ml' or 'pwm', got {centering!r}")
    fit = None
    errors = []
    if centering == "ml":
        try:
            fit = ml_fit(sample)
            if not fit.converged:
                fit = None
                errors.append("ml fit did not converge")
        except EstimationError as exc:
            errors.append(str(exc))
    if fit is None:
        try:
            fit = pwm_fit(sample)
        except EstimationError as exc:
            errors.append(str(exc))
            raise EstimationError(
                "prior construction failed, no estimator produced a fit: "
                + "; ".join(errors)
            ) from exc
    return DataDependentPrior(
        a_hat=fit.theta_hat.sigma,
        b_hat=fit.theta_hat.mu,
        shape_kernel=shape_kernel or TruncatedTShapeKernel(nu=1.0),
        loc_kernel=loc_kernel or NormalKernel(),
        scale_kernel=scale_kernel or GammaScaleKernel(),
        fit=fit,
    )


def _as_triple(theta) -> tuple[float, float, float]:
    if isinstance(theta, GevParams):
        return theta.gamma, theta.mu, theta.sigma
    g, mu, sigma = (float(v) for v in theta)
    if not (math.isfinite(g) and math.isfinite(mu) and math.isfinite(sigma)):
        raise DomainError(f"non-finite parameter triple {theta}")
    return g, mu, sigma


def log_prior(prior: DataDependentPrior, theta) -> float:
    """Log prior density; -inf whenever gamma <= -1, sigma <= 0 or outside
    a kernel's support.

    ``theta`` may be a GevParams or a raw (gamma, mu, sigma) triple; the
    raw form exists so invalid proposals can be scored as -inf.
    """
    g, mu, sigma = _as_triple(theta)
    if g <= -1.0 or sigma <= 0.0:
        return -math.inf
    lp = prior.shape_kernel.log_density(g)
    if lp == -math.inf:
        return -math.inf
    lp += prior.loc_kernel.log_density((mu - prior.b_hat) / prior.a_hat)
    if lp == -math.inf:
        return -math.inf
    lp += prior.scale_kernel.log_density(sigma / prior.a_hat)
    if lp == -math.inf:
        return -math.inf
    return lp - 2.0 * math.log(prior.a_hat)


def log_unnormalized_posterior(
    prior: DataDependentPrior, sample: BlockMaxSample, theta
) -> float:
    """log-likelihood + log-prior; -inf propagates from either factor."""
    lp = log_prior(prior, theta)
    if lp == -math.inf:
        return -math.inf
    if not isinstance(theta, GevParams):
        theta = GevParams(*_as_triple(theta))
    ll = log_likelihood(theta, sample)
    if ll == -math.inf:
        return -math.inf
    return ll + lp
