"""Pure-Python (numpy) implementations of the hot numerical kernels.

This module mirrors the interface of the optional compiled extension
``gevbayes._ckernels``; ``gevbayes._backend`` picks one at import time.
Everything here is deliberately scipy-free so the compiled module can
reproduce it line for line in C.
"""

from __future__ import annotations

import math

import numpy as np

# Below this |gamma| the Gumbel limit branch of the density/CDF is used.
GAMMA_SWITCH = 1e-8
# The gamma-derivative of the log-density cancels catastrophically for
# small |gamma|; switch to a first-order expansion earlier.
SCORE_GAMMA_SWITCH = 1e-5

BACKEND_NAME = "python"

# Kernel family codes shared with the compiled chain loop.
KERNEL_STUDENT_T = 1
KERNEL_UNIFORM = 2
KERNEL_NORMAL = 3
KERNEL_GAMMA = 4

_LOG_2PI = math.log(2.0 * math.pi)


# ---------------------------------------------------------------------------
# GEV primitives
# ---------------------------------------------------------------------------

def gev_logpdf_many(gamma: float, mu: float, sigma: float, x: np.ndarray) -> np.ndarray:
    """Per-point GEV log-density; -inf outside the support."""
    z = (np.asarray(x, dtype=float) - mu) / sigma
    if abs(gamma) < GAMMA_SWITCH:
        with np.errstate(over="ignore"):
            return -z - np.exp(-z) - math.log(sigma)
    t = 1.0 + gamma * z
    out = np.full(z.shape, -np.inf)
    ok = t > 0.0
    if np.any(ok):
        lt = np.log1p(gamma * z[ok])
        with np.errstate(over="ignore"):
            out[ok] = -(1.0 + 1.0 / gamma) * lt - np.exp(-lt / gamma) - math.log(sigma)
    return out


def gev_loglik(gamma: float, mu: float, sigma: float, x: np.ndarray) -> float:
    """GEV log-likelihood of a sample; -inf if any point is outside support."""
    z = (x - mu) / sigma
    k = x.shape[0]
    if abs(gamma) < GAMMA_SWITCH:
        with np.errstate(over="ignore"):
            return float(-np.sum(z) - np.sum(np.exp(-z)) - k * math.log(sigma))
    t = 1.0 + gamma * z
    if np.any(t <= 0.0):
        return -math.inf
    lt = np.log1p(gamma * z)
    with np.errstate(over="ignore"):
        return float(
            -(1.0 + 1.0 / gamma) * np.sum(lt) - np.sum(np.exp(-lt / gamma)) - k * math.log(sigma)
        )


def gev_cdf_many(gamma: float, mu: float, sigma: float, x: np.ndarray) -> np.ndarray:
    """GEV distribution function, clamped to {0, 1} beyond the support."""
    z = (np.asarray(x, dtype=float) - mu) / sigma
    with np.errstate(over="ignore"):
        if abs(gamma) < GAMMA_SWITCH:
            return np.exp(-np.exp(-z))
        t = 1.0 + gamma * z
        out = np.empty(z.shape)
        ok = t > 0.0
        out[ok] = np.exp(-np.exp(-np.log1p(gamma * z[ok]) / gamma))
        # Outside: below the lower endpoint (gamma > 0) the CDF is 0,
        # above the upper endpoint (gamma < 0) it is 1.
        out[~ok] = 0.0 if gamma > 0.0 else 1.0
    return out


def score_many(gamma: float, mu: float, sigma: float, x: np.ndarray) -> np.ndarray:
    """Gradient of the log-density in (gamma, mu, sigma), one row per point.

    Assumes every point is strictly interior to the support; callers
    validate. Near gamma = 0 the gamma component switches to a first-order
    expansion to avoid cancellation.
    """
    z = (np.asarray(x, dtype=float) - mu) / sigma
    out = np.empty((z.shape[0], 3))
    if gamma == 0.0 or abs(gamma) < SCORE_GAMMA_SWITCH:
        ez = np.exp(-z)
        dgam0 = 0.5 * z * z * (1.0 - ez) - z
        if gamma != 0.0:
            z2 = z * z
            z3 = z2 * z
            z4 = z2 * z2
            dgam0 = dgam0 + gamma * (z2 - 2.0 * z3 / 3.0 - ez * (0.25 * z4 - 2.0 * z3 / 3.0))
        if gamma == 0.0:
            dmu = (1.0 - ez) / sigma
            dsig = z * dmu - 1.0 / sigma
        else:
            t = 1.0 + gamma * z
            u = np.exp(-np.log1p(gamma * z) / gamma)
            dmu = ((1.0 + gamma) - u) / (sigma * t)
            dsig = z * dmu - 1.0 / sigma
        out[:, 0] = dgam0
        out[:, 1] = dmu
        out[:, 2] = dsig
        return out
    t = 1.0 + gamma * z
    lt = np.log1p(gamma * z)
    u = np.exp(-lt / gamma)
    inv_g2 = 1.0 / (gamma * gamma)
    out[:, 0] = lt * inv_g2 - (1.0 + 1.0 / gamma) * z / t - u * (lt * inv_g2 - z / (gamma * t))
    dmu = ((1.0 + gamma) - u) / (sigma * t)
    out[:, 1] = dmu
    out[:, 2] = z * dmu - 1.0 / sigma
    return out


# ---------------------------------------------------------------------------
# Prior kernel evaluation by family code
# ---------------------------------------------------------------------------

def kernel_logpdf(code: int, p0: float, p1: float, p2: float, x: float) -> float:
    """Log-density of a coded kernel family at x.

    Families (p2 always carries the log-normalisation constant):
      1 Student-t with p0 = nu, truncated to (-1, inf)
      2 Uniform(p0, p1)
      3 Normal(mean p0, sd p1)
      4 Gamma(shape p0, scale p1) on x > 0
    """
    if code == KERNEL_STUDENT_T:
        if x <= -1.0:
            return -math.inf
        return p2 - 0.5 * (p0 + 1.0) * math.log1p(x * x / p0)
    if code == KERNEL_UNIFORM:
        return p2 if p0 < x < p1 else -math.inf
    if code == KERNEL_NORMAL:
        u = (x - p0) / p1
        return p2 - 0.5 * u * u
    if code == KERNEL_GAMMA:
        if x <= 0.0:
            return -math.inf
        return p2 + (p0 - 1.0) * math.log(x) - x / p1
    raise ValueError(f"unknown kernel code {code}")


def coded_log_prior(sh, loc, sc, a_hat: float, b_hat: float,
                    gamma: float, mu: float, sigma: float) -> float:
    """Data-dependent prior log-density from three coded kernels."""
    if not (gamma > -1.0 and sigma > 0.0):
        return -math.inf
    lp = kernel_logpdf(sh[0], sh[1], sh[2], sh[3], gamma)
    if lp == -math.inf:
        return -math.inf
    lp += kernel_logpdf(loc[0], loc[1], loc[2], loc[3], (mu - b_hat) / a_hat)
    if lp == -math.inf:
        return -math.inf
    lp += kernel_logpdf(sc[0], sc[1], sc[2], sc[3], sigma / a_hat)
    if lp == -math.inf:
        return -math.inf
    return lp - 2.0 * math.log(a_hat)


# ---------------------------------------------------------------------------
# Adaptive random-walk Metropolis-Hastings loop
# ---------------------------------------------------------------------------

def chol3(a, b, c, d, e, f, jitter_retry=True):
    """Cholesky factor of the symmetric 3x3 matrix [[a,b,c],[b,d,e],[c,e,f]].

    Returns the six lower-triangular entries (l11, l21, l31, l22, l32, l33).
    One jitter repair (add 1e-10 to the diagonal) is attempted before
    giving up and returning None.
    """
    if a > 0.0:
        l11 = math.sqrt(a)
        l21 = b / l11
        l31 = c / l11
        t22 = d - l21 * l21
        if t22 > 0.0:
            l22 = math.sqrt(t22)
            l32 = (e - l21 * l31) / l22
            t33 = f - l31 * l31 - l32 * l32
            if t33 > 0.0:
                return l11, l21, l31, l22, l32, math.sqrt(t33)
    if jitter_retry:
        eps = 1e-10
        return chol3(a + eps, b, c, d + eps, e, f + eps, jitter_retry=False)
    return None


def run_chain_loop(logpost, theta0, kappa0, n_iter, target_accept, rm_a,
                   rm_decay, freeze_after, normals, unifs):
    """Generic adaptive RWMH loop against an arbitrary log-target.

    ``normals`` is an (n_iter, 3) array and ``unifs`` an (n_iter,) array
    of pre-drawn innovations, so the proposal stream is identical across
    backends. Returns (thetas, logposts, kappas, accepts) with full
    per-iteration traces (index 0 holds the initial state).

    Raises ValueError via the caller's contract if the proposal
    covariance cannot be repaired; here signalled by returning early is
    not an option, so a RuntimeError is raised.
    """
    thetas = np.empty((n_iter + 1, 3))
    logposts = np.empty(n_iter + 1)
    kappas = np.empty(n_iter + 1)
    accepts = np.zeros(n_iter, dtype=np.uint8)

    g, m, s = float(theta0[0]), float(theta0[1]), float(theta0[2])
    lp = float(logpost(g, m, s))
    thetas[0] = (g, m, s)
    logposts[0] = lp
    kappas[0] = kappa = float(kappa0)

    # Welford accumulators over chain states theta^(1..j).
    mg = mm = ms = 0.0
    c_gg = c_mm = c_ss = c_gm = c_gs = c_ms = 0.0
    # Proposal covariance, symmetric storage; starts at the identity.
    s_gg = s_mm = s_ss = 1.0
    s_gm = s_gs = s_ms = 0.0

    for j in range(1, n_iter + 1):
        L = chol3(kappa * s_gg, kappa * s_gm, kappa * s_gs,
                  kappa * s_mm, kappa * s_ms, kappa * s_ss)
        if L is None:
            raise RuntimeError(f"proposal covariance not PSD at step {j}")
        l11, l21, l31, l22, l32, l33 = L
        z0, z1, z2 = normals[j - 1]
        pg = g + l11 * z0
        pm = m + l21 * z0 + l22 * z1
        ps = s + l31 * z0 + l32 * z1 + l33 * z2

        lp_prop = float(logpost(pg, pm, ps))
        if math.isnan(lp_prop):
            raise RuntimeError(f"non-finite log-posterior at step {j}")
        delta = lp_prop - lp
        if delta >= 0.0:
            eta = 1.0
            accept = True
        elif delta == -math.inf:
            eta = 0.0
            accept = False
        else:
            eta = math.exp(delta)
            u = unifs[j - 1]
            accept = math.log(u) < delta if u > 0.0 else True
        if accept:
            g, m, s, lp = pg, pm, ps, lp_prop
            accepts[j - 1] = 1
        thetas[j] = (g, m, s)
        logposts[j] = lp

        adapting = freeze_after < 0 or j <= freeze_after
        # Streaming mean/covariance of theta^(1..j) (Welford).
        dg = g - mg
        dm = m - mm
        ds = s - ms
        inv_j = 1.0 / j
        mg += dg * inv_j
        mm += dm * inv_j
        ms += ds * inv_j
        dg2 = g - mg
        dm2 = m - mm
        ds2 = s - ms
        c_gg += dg * dg2
        c_mm += dm * dm2
        c_ss += ds * ds2
        c_gm += dg * dm2
        c_gs += dg * ds2
        c_ms += dm * ds2

        if adapting:
            k2j = kappa * kappa / j
            if j <= 100:
                s_gg = s_mm = s_ss = 1.0 + k2j
                s_gm = s_gs = s_ms = 0.0
            else:
                w = 1.0 / (j - 1)
                s_gg = c_gg * w + k2j
                s_mm = c_mm * w + k2j
                s_ss = c_ss * w + k2j
                s_gm = c_gm * w
                s_gs = c_gs * w
                s_ms = c_ms * w
            step = rm_a * (eta - target_accept)
            if rm_decay:
                step /= max(1.0, j / 100.0)
            kappa *= math.exp(step)
        kappas[j] = kappa

    return thetas, logposts, kappas, accepts


def run_chain_coded(x, theta0, kappa0, n_iter, sh, loc, sc, a_hat, b_hat,
                    target_accept, rm_a, rm_decay, freeze_after,
                    normals, unifs):
    """Chain loop against the GEV posterior with coded prior kernels."""
    xs = np.ascontiguousarray(x, dtype=float)

    def logpost(g, m, s):
        lp = coded_log_prior(sh, loc, sc, a_hat, b_hat, g, m, s)
        if lp == -math.inf:
            return -math.inf
        ll = gev_loglik(g, m, s, xs)
        if ll == -math.inf:
            return -math.inf
        return ll + lp

    return run_chain_loop(logpost, theta0, kappa0, n_iter, target_accept,
                          rm_a, rm_decay, freeze_after, normals, unifs)
