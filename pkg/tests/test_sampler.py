import csv
import math

import numpy as np
import pytest
from scipy.stats import kstest, norm

from gevbayes import (
    BlockMaxSample,
    ChainConfig,
    ChainInitError,
    DomainError,
    GevParams,
    build_prior,
    run_chain,
    run_chain_target,
)
from gevbayes import _pykernels
from gevbayes.prior import UniformKernel, log_unnormalized_posterior
from gevbayes.sampler import (
    ChainState,
    accept_step,
    adapt_covariance,
    adapt_kappa,
    export_trace_csv,
    propose,
    rm_steplength,
)


@pytest.fixture(scope="module")
def gumbel_sample():
    rng = np.random.default_rng(21)
    return BlockMaxSample(rng.gumbel(5.0, 2.0, size=60), 40)


@pytest.fixture(scope="module")
def gumbel_prior(gumbel_sample):
    return build_prior(gumbel_sample)


class TestSteplength:
    def test_robbins_monro_constant(self):
        # zeta0 = -Phi^{-1}(eta*/2); at eta* = 0.234 the steplength is ~2.137
        eta = 0.234
        zeta = -norm.ppf(eta / 2.0)
        expected = math.sqrt(2 * math.pi) * math.exp(zeta * zeta / 2) / (2 * zeta)
        assert rm_steplength(eta) == pytest.approx(expected, rel=1e-12)
        assert zeta == pytest.approx(1.1902, abs=1e-4)
        assert rm_steplength(eta) == pytest.approx(2.137, abs=2e-3)


class TestAdaptKappa:
    def test_fixed_point(self):
        st = ChainState(GevParams(0, 0, 1), -1.0, step_index=10, kappa=1.7)
        assert adapt_kappa(st, 0.234) == pytest.approx(1.7, rel=1e-14)

    def test_monotone(self):
        st = ChainState(GevParams(0, 0, 1), -1.0, step_index=10, kappa=1.0)
        assert adapt_kappa(st, 0.9) > 1.0
        assert adapt_kappa(st, 0.0) < 1.0

    def test_decay_damps_updates(self):
        st = ChainState(GevParams(0, 0, 1), -1.0, step_index=1000, kappa=1.0)
        plain = adapt_kappa(st, 0.9)
        damped = adapt_kappa(st, 0.9, rm_decay=True)
        assert abs(math.log(damped)) == pytest.approx(abs(math.log(plain)) / 10.0)

    def test_domain(self):
        st = ChainState(GevParams(0, 0, 1), -1.0, step_index=5)
        with pytest.raises(DomainError):
            adapt_kappa(st, 1.5)


class TestAdaptCovariance:
    def test_early_regime_formula(self):
        st = ChainState(GevParams(0, 0, 1), -1.0, step_index=50, kappa=2.0)
        cov = adapt_covariance(st)
        assert np.allclose(cov, 1.08 * np.eye(3), rtol=1e-14)

    def test_late_regime_with_constant_history(self):
        st = ChainState(GevParams(0, 0, 1), -1.0, step_index=101, kappa=1.5)
        st.m2 = np.zeros((3, 3))  # all past draws identical
        cov = adapt_covariance(st)
        assert np.allclose(cov, (1.5 ** 2 / 101) * np.eye(3), rtol=1e-14)

    def test_streaming_equals_batch(self, gumbel_sample, gumbel_prior):
        rng = np.random.default_rng(3)
        theta0 = gumbel_prior.fit.theta_hat
        st = ChainState(theta0, log_unnormalized_posterior(
            gumbel_prior, gumbel_sample, theta0))
        states = []
        for _ in range(400):
            prop = propose(st, rng)
            st, _ = accept_step(st, prop, gumbel_sample, gumbel_prior, rng)
            states.append(st.theta.as_array())
            st.cov = adapt_covariance(st)
            st.kappa = adapt_kappa(st, st.last_eta)
        batch = np.cov(np.array(states), rowvar=False, ddof=1)
        streaming = st.m2 / (st.step_index - 1)
        assert np.max(np.abs(streaming - batch)) < 1e-10

    def test_needs_a_step(self):
        st = ChainState(GevParams(0, 0, 1), -1.0, step_index=0)
        with pytest.raises(DomainError):
            adapt_covariance(st)


class TestPropose:
    def test_degenerate_at_tiny_kappa(self):
        st = ChainState(GevParams(0.1, 2.0, 1.0), -1.0, step_index=5, kappa=1e-30)
        rng = np.random.default_rng(0)
        g, m, s = propose(st, rng)
        assert abs(g - 0.1) < 1e-12 and abs(m - 2.0) < 1e-12 and abs(s - 1.0) < 1e-12

    def test_identity_covariance_moments(self):
        st = ChainState(GevParams(0.0, 0.0, 10.0), -1.0, step_index=5, kappa=1.0)
        rng = np.random.default_rng(11)
        diffs = np.array([np.array(propose(st, rng)) - st.theta.as_array()
                          for _ in range(100_000)])
        cov = np.cov(diffs, rowvar=False)
        assert np.allclose(cov, np.eye(3), atol=0.02)
        assert np.allclose(diffs.mean(axis=0), 0.0, atol=0.02)

    def test_deterministic_given_seed(self):
        st = ChainState(GevParams(0.0, 0.0, 1.0), -1.0, step_index=5, kappa=1.3)
        a = [propose(st, np.random.default_rng(7)) for _ in range(1)]
        b = [propose(st, np.random.default_rng(7)) for _ in range(1)]
        assert a == b

    def test_jitter_repairs_singular_covariance(self):
        st = ChainState(GevParams(0.0, 0.0, 1.0), -1.0, step_index=5, kappa=1.0,
                        cov=np.ones((3, 3)))  # rank one, Cholesky fails raw
        g, m, s = propose(st, np.random.default_rng(1))
        assert all(map(math.isfinite, (g, m, s)))

    def test_unrepairable_covariance_raises(self):
        from gevbayes import SamplerError
        st = ChainState(GevParams(0.0, 0.0, 1.0), -1.0, step_index=5, kappa=1.0,
                        cov=-np.eye(3))
        with pytest.raises(SamplerError):
            propose(st, np.random.default_rng(1))


class TestAcceptStep:
    def test_same_point_always_accepted(self, gumbel_sample, gumbel_prior):
        theta0 = gumbel_prior.fit.theta_hat
        st = ChainState(theta0, log_unnormalized_posterior(
            gumbel_prior, gumbel_sample, theta0))
        st, accepted = accept_step(st, theta0, gumbel_sample, gumbel_prior,
                                   np.random.default_rng(0))
        assert accepted and st.last_eta == 1.0

    def test_invalid_scale_always_rejected(self, gumbel_sample, gumbel_prior):
        theta0 = gumbel_prior.fit.theta_hat
        for seed in range(5):
            st = ChainState(theta0, log_unnormalized_posterior(
                gumbel_prior, gumbel_sample, theta0))
            st, accepted = accept_step(st, (0.0, theta0.mu, -0.5), gumbel_sample,
                                       gumbel_prior, np.random.default_rng(seed))
            assert not accepted and st.last_eta == 0.0
            assert st.theta == theta0


class TestRunChain:
    def test_deterministic(self, gumbel_sample, gumbel_prior):
        cfg = ChainConfig(n_iter=1500, burn_in=500, seed=99)
        a = run_chain(gumbel_sample, gumbel_prior, cfg)
        b = run_chain(gumbel_sample, gumbel_prior, cfg)
        assert np.array_equal(a.draws, b.draws)
        assert np.array_equal(a.kappa_trace, b.kappa_trace)
        c = run_chain(gumbel_sample, gumbel_prior,
                      ChainConfig(n_iter=1500, burn_in=500, seed=100))
        assert not np.array_equal(a.draws, c.draws)

    def test_retention_and_thinning(self, gumbel_sample, gumbel_prior):
        cfg = ChainConfig(n_iter=1000, burn_in=400, thin=3, seed=1)
        d = run_chain(gumbel_sample, gumbel_prior, cfg)
        assert d.n == (1000 - 400) // 3 == cfg.n_retained
        assert np.array_equal(d.draws[0], d.theta_trace[403])
        assert np.array_equal(d.draws[-1], d.theta_trace[403 + 3 * (d.n - 1)])

    def test_acceptance_rate_in_band(self, atlantic_draws):
        assert 0.15 <= atlantic_draws.accept_rate <= 0.35

    def test_kappa_trace_positive_finite(self, atlantic_draws):
        kt = atlantic_draws.kappa_trace
        assert np.all(np.isfinite(kt)) and np.all(kt > 0)

    def test_init_error_when_start_invalid(self, gumbel_sample):
        prior = build_prior(gumbel_sample, shape_kernel=UniformKernel(1.5, 2.0))
        with pytest.raises(ChainInitError):
            run_chain(gumbel_sample, prior, ChainConfig(n_iter=100, burn_in=10, seed=0))

    def test_config_validation(self):
        with pytest.raises(DomainError):
            ChainConfig(n_iter=100, burn_in=100)
        with pytest.raises(DomainError):
            ChainConfig(thin=0)
        with pytest.raises(DomainError):
            ChainConfig(kappa0=-1.0)

    def test_freeze_after_burnin_stops_adaptation(self, gumbel_sample, gumbel_prior):
        cfg = ChainConfig(n_iter=900, burn_in=300, seed=4,
                          freeze_adapt_after_burnin=True)
        d = run_chain(gumbel_sample, gumbel_prior, cfg)
        tail = d.kappa_trace[300:]
        assert np.all(tail == tail[0])
        live = run_chain(gumbel_sample, gumbel_prior,
                         ChainConfig(n_iter=900, burn_in=300, seed=4))
        assert not np.all(live.kappa_trace[300:] == live.kappa_trace[300])

    def test_rm_decay_damps_late_kappa_moves(self, gumbel_sample, gumbel_prior):
        plain = run_chain(gumbel_sample, gumbel_prior,
                          ChainConfig(n_iter=2000, burn_in=500, seed=6))
        damped = run_chain(gumbel_sample, gumbel_prior,
                           ChainConfig(n_iter=2000, burn_in=500, seed=6,
                                       rm_decay=True))
        move = lambda tr: np.abs(np.diff(np.log(tr[1500:])))
        assert move(damped.kappa_trace).mean() < 0.2 * move(plain.kappa_trace).mean()

    def test_stepwise_ops_match_fused_loop(self, gumbel_sample, gumbel_prior):
        """The public step-level API and the fused loop are the same chain."""
        n = 300
        cfg = ChainConfig(n_iter=n, burn_in=10, seed=13)
        master = np.random.default_rng(cfg.seed)
        normals = master.standard_normal((n, 3))
        unifs = master.random(n)

        class Replay:
            def __init__(self):
                self.i = 0
                self.j = 0

            def standard_normal(self, size):
                z = normals[self.i]
                self.i += 1
                return z

            def random(self):
                u = unifs[self.j]
                self.j += 1
                return u

        theta0 = gumbel_prior.fit.theta_hat
        lp0 = log_unnormalized_posterior(gumbel_prior, gumbel_sample, theta0)
        st = ChainState(theta0, lp0, kappa=cfg.kappa0)
        replay = Replay()
        states = [theta0.as_array()]
        for j in range(1, n + 1):
            prop = propose(st, replay)
            # the fused loop consumes one uniform per step; mirror that
            u_index_before = replay.j
            st, _ = accept_step(st, prop, gumbel_sample, gumbel_prior, replay)
            if replay.j == u_index_before:
                replay.j += 1
            st.cov = adapt_covariance(st)
            st.kappa = adapt_kappa(st, st.last_eta, cfg.target_accept)
            states.append(st.theta.as_array())

        def logpost(g, m, s):
            return log_unnormalized_posterior(gumbel_prior, gumbel_sample, (g, m, s))

        thetas, _, _, _ = _pykernels.run_chain_loop(
            logpost, theta0.as_array(), cfg.kappa0, n, cfg.target_accept,
            rm_steplength(cfg.target_accept), False, -1, normals, unifs)
        assert np.allclose(np.array(states), thetas, rtol=0, atol=1e-9)


class TestSyntheticTargets:
    def test_standard_normal_marginals(self):
        def logp(a, b, c):
            return -0.5 * (a * a + b * b + c * c)

        cfg = ChainConfig(n_iter=120_000, burn_in=20_000, seed=31)
        d = run_chain_target(logp, np.array([0.0, 0.0, 0.0]), cfg)
        for i in range(3):
            ks = kstest(d.draws[:, i], "norm").statistic
            assert ks < 0.02
            assert abs(d.draws[:, i].mean()) < 0.05
        cov = np.cov(d.draws, rowvar=False)
        assert np.allclose(cov, np.eye(3), atol=0.08)
        assert 0.15 <= d.accept_rate <= 0.35

    def test_correlated_normal_covariance(self):
        cov = np.array([[2.0, 0.8, 0.0], [0.8, 1.0, -0.3], [0.0, -0.3, 0.5]])
        prec = np.linalg.inv(cov)

        def logp(a, b, c):
            v = np.array([a, b, c - 4.0])
            return -0.5 * float(v @ prec @ v)

        cfg = ChainConfig(n_iter=120_000, burn_in=20_000, seed=17)
        d = run_chain_target(logp, np.array([0.0, 0.0, 4.0]), cfg)
        got = np.cov(d.draws, rowvar=False)
        assert np.allclose(got, cov, atol=0.15)
        assert np.allclose(d.draws.mean(axis=0), [0, 0, 4.0], atol=0.1)


class TestTraceExport:
    def test_roundtrip(self, tmp_path, gumbel_sample, gumbel_prior):
        cfg = ChainConfig(n_iter=200, burn_in=50, seed=5)
        d = run_chain(gumbel_sample, gumbel_prior, cfg)
        path = tmp_path / "trace.csv"
        export_trace_csv(d, str(path))
        with open(path) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["iter", "gamma", "mu", "sigma", "log_post", "kappa",
                           "accepted"]
        assert len(rows) == 202  # header + initial state + 200 steps
        assert rows[1][6] == ""
        got = np.array([[float(r[1]), float(r[2]), float(r[3])] for r in rows[1:]])
        assert np.array_equal(got, d.theta_trace)
        accepted = np.array([int(r[6]) for r in rows[2:]], dtype=np.uint8)
        assert np.array_equal(accepted, d.accept_trace)
