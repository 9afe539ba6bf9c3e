import math

import numpy as np
import pytest

from gevbayes import (
    BlockMaxSample,
    EstimationError,
    GevParams,
    fisher_info_numeric,
    gev_quantile,
    log_likelihood,
    ml_fit,
    pwm_fit,
)
from gevbayes.simstudy import TRUE_MODELS, generate_block_maxima


def quantile_grid_sample(theta, k, block_size=1):
    u = (np.arange(1, k + 1) - 0.5) / k
    vals = np.array([gev_quantile(theta, 1 - ui) for ui in u])
    return BlockMaxSample(vals, block_size)


class TestPwm:
    def test_quantile_grid_recovery(self):
        truth = GevParams(0.0, 0.0, 1.0)
        fit = pwm_fit(quantile_grid_sample(truth, 200))
        assert fit.converged
        assert abs(fit.theta_hat.gamma - truth.gamma) < 0.1
        assert abs(fit.theta_hat.mu - truth.mu) < 0.1
        assert abs(fit.theta_hat.sigma - truth.sigma) < 0.1

    def test_location_scale_equivariance(self):
        rng = np.random.default_rng(5)
        x = rng.gumbel(2.0, 3.0, size=60)
        base = pwm_fit(BlockMaxSample(x, 1)).theta_hat
        moved = pwm_fit(BlockMaxSample(2.5 * x + 7.0, 1)).theta_hat
        assert moved.gamma == pytest.approx(base.gamma, abs=1e-12)
        assert moved.mu == pytest.approx(2.5 * base.mu + 7.0, rel=1e-12)
        assert moved.sigma == pytest.approx(2.5 * base.sigma, rel=1e-12)

    def test_minimal_sample(self):
        fit = pwm_fit(BlockMaxSample([1.0, 2.0, 4.0], 1))
        assert fit.converged
        assert math.isfinite(fit.theta_hat.gamma)
        assert -1.0 < fit.theta_hat.gamma < 1.0

    def test_shape_stays_inside_unit_interval(self):
        rng = np.random.default_rng(6)
        model = TRUE_MODELS["half-cauchy"]  # true tail index 1
        for r in range(20):
            sample = generate_block_maxima(model, 20, 15, np.random.default_rng(r))
            g = pwm_fit(sample).theta_hat.gamma
            assert -1.0 < g < 1.0

    def test_degenerate_sample(self):
        with pytest.raises(EstimationError):
            pwm_fit(BlockMaxSample([2.0, 2.0, 2.0, 2.0], 1))
        with pytest.raises(EstimationError):
            pwm_fit(BlockMaxSample([1.0, 2.0], 1))


class TestMl:
    def test_hurricane_point_estimates(self, atlantic_sample):
        fit = ml_fit(atlantic_sample)
        assert fit.converged
        assert fit.theta_hat.gamma == pytest.approx(-0.35, abs=0.03)
        assert fit.theta_hat.mu == pytest.approx(216.7, abs=1.0)
        assert fit.theta_hat.sigma == pytest.approx(37.3, abs=1.0)

    def test_simulation_recovery_within_asymptotic_band(self):
        # 3 standard errors from the inverse Fisher information at the truth
        truth = GevParams(0.5, 10.0, 2.0)
        k = 5000
        rng = np.random.default_rng(42)
        u = rng.random(k)
        vals = truth.mu + truth.sigma * np.expm1(-truth.gamma * np.log(-np.log(u))) / truth.gamma
        fit = ml_fit(BlockMaxSample(vals, 100))
        assert fit.converged
        info = fisher_info_numeric(truth.gamma, method="quadrature")
        scale = np.diag([1.0, truth.sigma, truth.sigma])
        cov = scale @ np.linalg.inv(info) @ scale / k
        se = np.sqrt(np.diag(cov))
        err = np.abs(fit.theta_hat.as_array() - truth.as_array())
        assert np.all(err <= 3.0 * se), (err, 3 * se)

    def test_ascent_from_truth(self):
        truth = GevParams(0.2, 0.0, 1.0)
        sample = quantile_grid_sample(truth, 300)
        fit = ml_fit(sample, init=truth)
        assert fit.converged
        assert fit.n_iter <= 100
        assert fit.log_lik >= log_likelihood(truth, sample)

    def test_beats_pwm_likelihood(self):
        for seed in range(5):
            sample = generate_block_maxima(TRUE_MODELS["gamma"], 40, 30,
                                           np.random.default_rng(seed))
            p = pwm_fit(sample)
            m = ml_fit(sample)
            if p.converged and m.converged:
                assert m.log_lik >= p.log_lik - 1e-9

    def test_equivariance(self):
        sample = generate_block_maxima(TRUE_MODELS["exponential"], 60, 80,
                                       np.random.default_rng(9))
        base = ml_fit(sample).theta_hat
        moved = ml_fit(BlockMaxSample(3.0 * sample.maxima + 5.0, 60)).theta_hat
        assert moved.gamma == pytest.approx(base.gamma, abs=1e-4)
        assert moved.mu == pytest.approx(3.0 * base.mu + 5.0, rel=1e-4)
        assert moved.sigma == pytest.approx(3.0 * base.sigma, rel=1e-4)

    def test_all_equal_sample(self):
        with pytest.raises(EstimationError):
            ml_fit(BlockMaxSample([3.0] * 10, 1))

    def test_scale_estimator_concentrates_near_truth(self):
        # the prior-centering condition, checked empirically on unit-Frechet:
        # a_hat / a_m0 with a_m0 = m should sit near 1
        model = TRUE_MODELS["frechet"]
        m, k = 109, 50
        ratios = []
        for r in range(200):
            sample = generate_block_maxima(model, m, k, np.random.default_rng((77, r)))
            fit = ml_fit(sample)
            if not fit.converged:
                fit = pwm_fit(sample)
            ratios.append(fit.theta_hat.sigma / m)
        med = float(np.median(ratios))
        assert 0.8 <= med <= 1.25
