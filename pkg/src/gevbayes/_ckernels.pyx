# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: GEV log-likelihood and the adaptive MCMC loop.

Mirrors gevbayes._pykernels; see that module for the reference
semantics. Only the operations that dominate runtime live here.
"""

from libc.math cimport exp, fabs, isnan, log, log1p, sqrt, INFINITY, NAN

import numpy as np
cimport numpy as cnp

cnp.import_array()

BACKEND_NAME = "c"

cdef double GAMMA_SWITCH = 1e-8

cdef enum:
    K_STUDENT_T = 1
    K_UNIFORM = 2
    K_NORMAL = 3
    K_GAMMA = 4


cdef double _loglik(double g, double mu, double sigma,
                    const double[::1] x) noexcept nogil:
    cdef Py_ssize_t i, k = x.shape[0]
    cdef double z, t, lt, acc = 0.0
    cdef double inv_sigma = 1.0 / sigma
    cdef double log_sigma = log(sigma)
    if fabs(g) < GAMMA_SWITCH:
        for i in range(k):
            z = (x[i] - mu) * inv_sigma
            acc += -z - exp(-z) - log_sigma
        return acc
    cdef double c1 = 1.0 + 1.0 / g
    for i in range(k):
        z = (x[i] - mu) * inv_sigma
        t = 1.0 + g * z
        if t <= 0.0:
            return -INFINITY
        lt = log1p(g * z)
        acc += -c1 * lt - exp(-lt / g) - log_sigma
    return acc


def gev_loglik(double gamma, double mu, double sigma, x):
    """GEV log-likelihood of a sample; -inf if any point is outside support."""
    cdef const double[::1] xs = np.ascontiguousarray(x, dtype=np.float64)
    return _loglik(gamma, mu, sigma, xs)


cdef double _kernel_logpdf(int code, double p0, double p1, double p2,
                           double x) noexcept nogil:
    cdef double u
    if code == K_STUDENT_T:
        if x <= -1.0:
            return -INFINITY
        return p2 - 0.5 * (p0 + 1.0) * log1p(x * x / p0)
    if code == K_UNIFORM:
        if p0 < x < p1:
            return p2
        return -INFINITY
    if code == K_NORMAL:
        u = (x - p0) / p1
        return p2 - 0.5 * u * u
    if code == K_GAMMA:
        if x <= 0.0:
            return -INFINITY
        return p2 + (p0 - 1.0) * log(x) - x / p1
    return NAN  # unknown code; surfaces as a chain error


cdef double _log_prior(int sh_c, double sh0, double sh1, double sh2,
                       int lc_c, double lc0, double lc1, double lc2,
                       int sc_c, double sc0, double sc1, double sc2,
                       double a_hat, double b_hat, double log_a_hat,
                       double g, double mu, double sigma) noexcept nogil:
    cdef double lp, term
    if not (g > -1.0 and sigma > 0.0):
        return -INFINITY
    lp = _kernel_logpdf(sh_c, sh0, sh1, sh2, g)
    if lp == -INFINITY:
        return -INFINITY
    term = _kernel_logpdf(lc_c, lc0, lc1, lc2, (mu - b_hat) / a_hat)
    if term == -INFINITY:
        return -INFINITY
    lp += term
    term = _kernel_logpdf(sc_c, sc0, sc1, sc2, sigma / a_hat)
    if term == -INFINITY:
        return -INFINITY
    return lp + term - 2.0 * log_a_hat


cdef int _chol3(double a, double b, double c, double d, double e, double f,
                double* out) noexcept nogil:
    # out = (l11, l21, l31, l22, l32, l33); returns 0 on success.
    cdef double l11, l21, l31, l22, l32, t22, t33
    if a > 0.0:
        l11 = sqrt(a)
        l21 = b / l11
        l31 = c / l11
        t22 = d - l21 * l21
        if t22 > 0.0:
            l22 = sqrt(t22)
            l32 = (e - l21 * l31) / l22
            t33 = f - l31 * l31 - l32 * l32
            if t33 > 0.0:
                out[0] = l11
                out[1] = l21
                out[2] = l31
                out[3] = l22
                out[4] = l32
                out[5] = sqrt(t33)
                return 0
    return 1


def run_chain_coded(x, theta0, double kappa0, Py_ssize_t n_iter,
                    sh, loc, sc, double a_hat, double b_hat,
                    double target_accept, double rm_a, bint rm_decay,
                    long freeze_after, normals, unifs):
    """Adaptive RWMH loop against the coded GEV posterior.

    Matches gevbayes._pykernels.run_chain_coded; consumes the same
    pre-drawn innovation arrays so both backends follow the same
    proposal stream.
    """
    cdef const double[::1] xs = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[:, ::1] zs = np.ascontiguousarray(normals, dtype=np.float64)
    cdef const double[::1] us = np.ascontiguousarray(unifs, dtype=np.float64)

    cdef int sh_c = sh[0]
    cdef double sh0 = sh[1], sh1 = sh[2], sh2 = sh[3]
    cdef int lc_c = loc[0]
    cdef double lc0 = loc[1], lc1 = loc[2], lc2 = loc[3]
    cdef int sc_c = sc[0]
    cdef double sc0 = sc[1], sc1 = sc[2], sc2 = sc[3]
    cdef double log_a_hat = log(a_hat)

    thetas_arr = np.empty((n_iter + 1, 3), dtype=np.float64)
    logposts_arr = np.empty(n_iter + 1, dtype=np.float64)
    kappas_arr = np.empty(n_iter + 1, dtype=np.float64)
    accepts_arr = np.zeros(n_iter, dtype=np.uint8)
    cdef double[:, ::1] thetas = thetas_arr
    cdef double[::1] logposts = logposts_arr
    cdef double[::1] kappas = kappas_arr
    cdef cnp.uint8_t[::1] accepts = accepts_arr

    cdef double g = theta0[0], m = theta0[1], s = theta0[2]
    cdef double lp = _log_prior(sh_c, sh0, sh1, sh2, lc_c, lc0, lc1, lc2,
                                sc_c, sc0, sc1, sc2, a_hat, b_hat, log_a_hat,
                                g, m, s)
    if lp != -INFINITY:
        lp += _loglik(g, m, s, xs)
    thetas[0, 0] = g
    thetas[0, 1] = m
    thetas[0, 2] = s
    logposts[0] = lp
    cdef double kappa = kappa0
    kappas[0] = kappa

    cdef double mg = 0.0, mm = 0.0, ms = 0.0
    cdef double c_gg = 0.0, c_mm = 0.0, c_ss = 0.0
    cdef double c_gm = 0.0, c_gs = 0.0, c_ms = 0.0
    cdef double s_gg = 1.0, s_mm = 1.0, s_ss = 1.0
    cdef double s_gm = 0.0, s_gs = 0.0, s_ms = 0.0

    cdef double L[6]
    cdef Py_ssize_t j
    cdef long bad_step = 0
    cdef double z0, z1, z2, pg, pm, ps, lp_prop, delta, eta, u, prior_part
    cdef double dg, dm, ds, dg2, dm2, ds2, inv_j, k2j, w, step
    cdef bint accept, adapting
    cdef int nan_hit = 0

    with nogil:
        for j in range(1, n_iter + 1):
            if _chol3(kappa * s_gg, kappa * s_gm, kappa * s_gs,
                      kappa * s_mm, kappa * s_ms, kappa * s_ss, L) != 0:
                if _chol3(kappa * s_gg + 1e-10, kappa * s_gm, kappa * s_gs,
                          kappa * s_mm + 1e-10, kappa * s_ms,
                          kappa * s_ss + 1e-10, L) != 0:
                    bad_step = j
                    break
            z0 = zs[j - 1, 0]
            z1 = zs[j - 1, 1]
            z2 = zs[j - 1, 2]
            pg = g + L[0] * z0
            pm = m + L[1] * z0 + L[3] * z1
            ps = s + L[2] * z0 + L[4] * z1 + L[5] * z2

            prior_part = _log_prior(sh_c, sh0, sh1, sh2, lc_c, lc0, lc1, lc2,
                                    sc_c, sc0, sc1, sc2, a_hat, b_hat,
                                    log_a_hat, pg, pm, ps)
            if prior_part == -INFINITY:
                lp_prop = -INFINITY
            else:
                lp_prop = _loglik(pg, pm, ps, xs)
                if lp_prop != -INFINITY:
                    lp_prop += prior_part
            if isnan(lp_prop):
                nan_hit = 1
                bad_step = j
                break

            delta = lp_prop - lp
            if delta >= 0.0:
                eta = 1.0
                accept = True
            elif lp_prop == -INFINITY:
                eta = 0.0
                accept = False
            else:
                eta = exp(delta)
                u = us[j - 1]
                if u > 0.0:
                    accept = log(u) < delta
                else:
                    accept = True
            if accept:
                g = pg
                m = pm
                s = ps
                lp = lp_prop
                accepts[j - 1] = 1
            thetas[j, 0] = g
            thetas[j, 1] = m
            thetas[j, 2] = s
            logposts[j] = lp

            adapting = freeze_after < 0 or j <= freeze_after
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
                    s_gg = 1.0 + k2j
                    s_mm = 1.0 + k2j
                    s_ss = 1.0 + k2j
                    s_gm = 0.0
                    s_gs = 0.0
                    s_ms = 0.0
                else:
                    w = 1.0 / (j - 1)
                    s_gg = c_gg * w + k2j
                    s_mm = c_mm * w + k2j
                    s_ss = c_ss * w + k2j
                    s_gm = c_gm * w
                    s_gs = c_gs * w
                    s_ms = c_ms * w
                step = rm_a * (eta - target_accept)
                if rm_decay and j > 100:
                    step /= j / 100.0
                kappa *= exp(step)
            kappas[j] = kappa

    if bad_step > 0:
        if nan_hit:
            raise RuntimeError(f"non-finite log-posterior at step {bad_step}")
        raise RuntimeError(f"proposal covariance not PSD at step {bad_step}")
    return thetas_arr, logposts_arr, kappas_arr, accepts_arr
