"""Adaptive Gaussian random-walk Metropolis-Hastings sampler.

The proposal at step j is N(theta_j, kappa_j * Sigma_j). The covariance
follows a two-regime recipe: identity times (1 + kappa_j^2/j) for the
first 100 steps, then the running empirical covariance of the chain
plus (kappa_j^2/j) * I. The scalar kappa is tuned towards a target
acceptance rate by a Robbins-Monro update on log kappa,

    log kappa_{j+1} = log kappa_j + a * (eta_j - eta_star),

with steplength a = sqrt(2*pi) * exp(zeta0^2/2) / (2*zeta0) and
zeta0 = -Phi^{-1}(eta_star / 2). There is no steplength decay by
default; set ``rm_decay`` for a 1/max(1, j/100) damping. kappa scales
the covariance linearly (kappa * Sigma, not kappa^2 * Sigma), and
adaptation runs through the whole chain unless
``freeze_adapt_after_burnin`` is set.

``run_chain`` drives the fused loop from the selected backend;
``propose``/``accept_step``/``adapt_covariance``/``adapt_kappa`` expose
the individual transitions for testing and instrumentation.
"""

from __future__ import annotations

import csv
import math
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from . import _pykernels
from ._backend import kernels
from ._pykernels import chol3
from .errors import ChainInitError, DomainError, SamplerError
from .estimators import ml_fit, pwm_fit
from .gev import BlockMaxSample, GevParams
from .prior import DataDependentPrior, log_unnormalized_posterior

__all__ = [
    "ChainConfig",
    "ChainState",
    "PosteriorDraws",
    "rm_steplength",
    "propose",
    "accept_step",
    "adapt_covariance",
    "adapt_kappa",
    "run_chain",
    "run_chain_target",
    "export_trace_csv",
]


def rm_steplength(target_accept: float) -> float:
    """Robbins-Monro steplength for the log-kappa update."""
    zeta0 = -float(ndtri(target_accept / 2.0))
    return math.sqrt(2.0 * math.pi) * math.exp(0.5 * zeta0 * zeta0) / (2.0 * zeta0)


@dataclass(frozen=True)
class ChainConfig:
    n_iter: int = 8_000
    burn_in: int = 5_000
    thin: int = 1
    target_accept: float = 0.234
    kappa0: float = 2.38 ** 2 / 3.0
    seed: int = 0
    rm_decay: bool = False
    freeze_adapt_after_burnin: bool = False

    def __post_init__(self):
        if self.n_iter < 1 or self.burn_in < 0 or self.burn_in >= self.n_iter:
            raise DomainError(
                f"need 0 <= burn_in < n_iter, got ({self.burn_in}, {self.n_iter})"
            )
        if self.thin < 1:
            raise DomainError(f"thin must be >= 1, got {self.thin}")
        if not 0.0 < self.target_accept < 1.0:
            raise DomainError(f"target_accept must be in (0,1), got {self.target_accept}")
        if self.kappa0 <= 0.0:
            raise DomainError(f"kappa0 must be positive, got {self.kappa0}")

    @property
    def n_retained(self) -> int:
        return (self.n_iter - self.burn_in) // self.thin


@dataclass
class ChainState:
    """Mutable state of one chain, for the step-level API."""

    theta: GevParams
    log_post: float
    step_index: int = 0
    kappa: float = 2.38 ** 2 / 3.0
    cov: np.ndarray = field(default_factory=lambda: np.eye(3))
    running_mean: np.ndarray = field(default_factory=lambda: np.zeros(3))
    m2: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))
    accept_count: int = 0
    last_eta: float = 0.0


@dataclass(frozen=True)
class PosteriorDraws:
    """Retained posterior draws plus full chain diagnostics."""

    draws: np.ndarray  # (N, 3), columns gamma, mu, sigma
    accept_rate: float  # post burn-in
    kappa_trace: np.ndarray
    log_post_trace: np.ndarray
    config: ChainConfig
    block_size_m: int
    theta_trace: np.ndarray  # (n_iter+1, 3) full history
    accept_trace: np.ndarray  # (n_iter,) 0/1 per step

    @property
    def n(self) -> int:
        return int(self.draws.shape[0])

    @property
    def gamma(self) -> np.ndarray:
        return self.draws[:, 0]

    @property
    def mu(self) -> np.ndarray:
        return self.draws[:, 1]

    @property
    def sigma(self) -> np.ndarray:
        return self.draws[:, 2]

    def theta_at(self, i: int) -> GevParams:
        g, m, s = self.draws[i]
        return GevParams(float(g), float(m), float(s))


def _chol_scaled(cov: np.ndarray, kappa: float):
    c = kappa * cov
    L = chol3(c[0, 0], c[0, 1], c[0, 2], c[1, 1], c[1, 2], c[2, 2])
    if L is None:
        raise SamplerError("proposal covariance is not positive definite after jitter repair")
    return L


def propose(state: ChainState, rng: np.random.Generator) -> tuple[float, float, float]:
    """Draw from N(theta, kappa * Sigma); may return invalid sigma <= 0.

    Invalid proposals are rejected downstream through the prior support,
    so the raw triple is returned as floats, not validated GevParams.
    """
    l11, l21, l31, l22, l32, l33 = _chol_scaled(state.cov, state.kappa)
    z0, z1, z2 = rng.standard_normal(3)
    t = state.theta
    return (
        t.gamma + l11 * z0,
        t.mu + l21 * z0 + l22 * z1,
        t.sigma + l31 * z0 + l32 * z1 + l33 * z2,
    )


def _update_running_moments(state: ChainState, theta_arr: np.ndarray):
    j = state.step_index
    delta = theta_arr - state.running_mean
    state.running_mean = state.running_mean + delta / j
    delta2 = theta_arr - state.running_mean
    state.m2 = state.m2 + np.outer(delta, delta2)


def accept_step(
    state: ChainState,
    proposal,
    sample: BlockMaxSample,
    prior: DataDependentPrior,
    rng: np.random.Generator,
) -> tuple[ChainState, bool]:
    """Metropolis accept/reject in the log domain; mutates and returns state."""
    pg, pm, ps = (proposal.gamma, proposal.mu, proposal.sigma) \
        if isinstance(proposal, GevParams) else proposal
    lp_prop = log_unnormalized_posterior(prior, sample, (pg, pm, ps))
    delta = lp_prop - state.log_post
    if delta >= 0.0:
        eta, accepted = 1.0, True
    elif delta == -math.inf:
        eta, accepted = 0.0, False
    else:
        eta = math.exp(delta)
        u = rng.random()
        accepted = math.log(u) < delta if u > 0.0 else True
    state.step_index += 1
    state.last_eta = eta
    if accepted:
        state.theta = GevParams(pg, pm, ps)
        state.log_post = lp_prop
        state.accept_count += 1
    _update_running_moments(state, state.theta.as_array())
    return state, accepted


def adapt_covariance(state: ChainState) -> np.ndarray:
    """Two-regime proposal covariance for the next step.

    j <= 100: (1 + kappa^2/j) * I; afterwards the empirical covariance of
    the chain states so far plus (kappa^2/j) * I, maintained by streaming
    moments (no re-scan of the history).
    """
    j = state.step_index
    if j < 1:
        raise DomainError("adapt_covariance needs at least one completed step")
    k2j = state.kappa * state.kappa / j
    if j <= 100:
        return (1.0 + k2j) * np.eye(3)
    return state.m2 / (j - 1) + k2j * np.eye(3)


def adapt_kappa(state: ChainState, eta_j: float, target_accept: float = 0.234,
                rm_decay: bool = False) -> float:
    """Robbins-Monro update of the proposal scale from the last acceptance
    probability."""
    if not 0.0 <= eta_j <= 1.0:
        raise DomainError(f"acceptance probability must be in [0,1], got {eta_j}")
    step = rm_steplength(target_accept) * (eta_j - target_accept)
    if rm_decay:
        step /= max(1.0, state.step_index / 100.0)
    return state.kappa * math.exp(step)


def _final_traces_to_draws(sample_m, config, thetas, logposts, kappas, accepts):
    b, n, t = config.burn_in, config.n_iter, config.thin
    retained = thetas[b + t: n + 1: t]
    accept_rate = float(np.mean(accepts[b:])) if n > b else 0.0
    return PosteriorDraws(
        draws=np.ascontiguousarray(retained),
        accept_rate=accept_rate,
        kappa_trace=kappas,
        log_post_trace=logposts,
        config=config,
        block_size_m=sample_m,
        theta_trace=thetas,
        accept_trace=accepts,
    )


def run_chain(
    sample: BlockMaxSample,
    prior: DataDependentPrior,
    config: ChainConfig,
    theta0: GevParams | None = None,
) -> PosteriorDraws:
    """Run the full adaptive chain against the empirical-Bayes posterior.

    The start point defaults to the estimator fit stored on the prior
    (ML, with a PWM fallback). Identical (data, config, seed) give
    bit-identical draws.
    """
    if theta0 is None:
        if prior.fit is not None:
            theta0 = prior.fit.theta_hat
        else:
            fit = ml_fit(sample)
            if not fit.converged:
                fit = pwm_fit(sample)
            theta0 = fit.theta_hat
    lp0 = log_unnormalized_posterior(prior, sample, theta0)
    if not math.isfinite(lp0):
        raise ChainInitError(
            f"initial state {theta0} has log-posterior {lp0}; "
            "check that every observation lies inside the GEV support at the "
            "start point and that gamma0 > -1, or pass an explicit theta0"
        )
    rng = np.random.default_rng(config.seed)
    normals = rng.standard_normal((config.n_iter, 3))
    unifs = rng.random(config.n_iter)
    rm_a = rm_steplength(config.target_accept)
    freeze_after = config.burn_in if config.freeze_adapt_after_burnin else -1

    theta0_arr = theta0.as_array()
    try:
        if prior.coded:
            thetas, logposts, kappas, accepts = kernels.run_chain_coded(
                sample.maxima, theta0_arr, config.kappa0, config.n_iter,
                (prior.shape_kernel.code, *prior.shape_kernel.coded_params),
                (prior.loc_kernel.code, *prior.loc_kernel.coded_params),
                (prior.scale_kernel.code, *prior.scale_kernel.coded_params),
                prior.a_hat, prior.b_hat,
                config.target_accept, rm_a, config.rm_decay, freeze_after,
                normals, unifs,
            )
        else:
            def logpost(g, m, s):
                if not (s > 0.0 and g > -1.0):
                    return -math.inf
                return log_unnormalized_posterior(prior, sample, GevParams(g, m, s))

            thetas, logposts, kappas, accepts = _pykernels.run_chain_loop(
                logpost, theta0_arr, config.kappa0, config.n_iter,
                config.target_accept, rm_a, config.rm_decay, freeze_after,
                normals, unifs,
            )
    except RuntimeError as exc:
        raise SamplerError(f"chain failed: {exc} (data label {sample.label!r}, "
                           f"seed {config.seed})") from exc
    return _final_traces_to_draws(sample.block_size_m, config, thetas, logposts,
                                  kappas, accepts)


def run_chain_target(
    log_target,
    theta0: np.ndarray,
    config: ChainConfig,
    block_size_m: int = 1,
) -> PosteriorDraws:
    """Run the same adaptive scheme against an arbitrary log-target.

    ``log_target(g, m, s)`` may return -inf. Used by diagnostics and the
    test harness (e.g. an exact normal target).
    """
    theta0 = np.asarray(theta0, dtype=float)
    lp0 = float(log_target(*theta0))
    if not math.isfinite(lp0):
        raise ChainInitError(f"initial state {theta0} has log-target {lp0}")
    rng = np.random.default_rng(config.seed)
    normals = rng.standard_normal((config.n_iter, 3))
    unifs = rng.random(config.n_iter)
    freeze_after = config.burn_in if config.freeze_adapt_after_burnin else -1
    try:
        thetas, logposts, kappas, accepts = _pykernels.run_chain_loop(
            log_target, theta0, config.kappa0, config.n_iter,
            config.target_accept, rm_steplength(config.target_accept),
            config.rm_decay, freeze_after, normals, unifs,
        )
    except RuntimeError as exc:
        raise SamplerError(f"chain failed: {exc}") from exc
    return _final_traces_to_draws(block_size_m, config, thetas, logposts,
                                  kappas, accepts)


def export_trace_csv(draws: PosteriorDraws, path: str):
    """Write the full chain trace (one row per iteration, row 0 = start)."""
    tmp_fd, tmp_path = tempfile.mkstemp(
        dir=os.path.dirname(os.path.abspath(path)) or ".", suffix=".tmp"
    )
    try:
        with os.fdopen(tmp_fd, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", "gamma", "mu", "sigma", "log_post", "kappa", "accepted"])
            n = draws.theta_trace.shape[0]
            for i in range(n):
                g, m, s = draws.theta_trace[i]
                accepted = "" if i == 0 else int(draws.accept_trace[i - 1])
                w.writerow([i, repr(float(g)), repr(float(m)), repr(float(s)),
                            repr(float(draws.log_post_trace[i])),
                            repr(float(draws.kappa_trace[i])), accepted])
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise
