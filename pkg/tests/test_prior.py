import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import norm

from gevbayes import (
    BlockMaxSample,
    DomainError,
    EstimationError,
    GevParams,
    build_prior,
    log_likelihood,
    log_prior,
    log_unnormalized_posterior,
)
from gevbayes.prior import (
    DataDependentPrior,
    GammaScaleKernel,
    NormalKernel,
    TruncatedTShapeKernel,
    UniformKernel,
)


@pytest.fixture()
def sample():
    rng = np.random.default_rng(1)
    return BlockMaxSample(rng.gumbel(10.0, 2.0, size=80), 50)


@pytest.fixture()
def prior(sample):
    return build_prior(sample)


class TestKernels:
    def test_cauchy_truncation_constant(self):
        # T_1(-1) = 1/4, so the renormalization is 4/3 and the density at
        # zero is (4/3) / pi
        k = TruncatedTShapeKernel(nu=1.0)
        assert math.exp(k.log_density(0.0)) == pytest.approx(4.0 / (3.0 * math.pi),
                                                             rel=1e-12)
        assert k.log_density(-1.0) == -math.inf
        assert k.log_density(-1.5) == -math.inf

    @pytest.mark.parametrize("kernel", [
        TruncatedTShapeKernel(1.0),
        TruncatedTShapeKernel(3.0),
        UniformKernel(-0.9, 2.0),
        NormalKernel(),
        GammaScaleKernel(),
        GammaScaleKernel(2.0, 0.5),
    ])
    def test_normalized(self, kernel):
        total, _ = quad(lambda x: math.exp(kernel.log_density(x)), -np.inf, np.inf,
                        limit=400)
        assert total == pytest.approx(1.0, abs=1e-6)

    def test_condition_positivity_windows(self):
        # shape kernel positive and continuous around any gamma0 > -1,
        # scale kernel bounded away from 0 near 1, location kernel near 0
        sh = TruncatedTShapeKernel(1.0)
        grid = np.linspace(-0.99, 3.0, 400)
        vals = np.array([sh.log_density(g) for g in grid])
        assert np.all(np.isfinite(vals))
        assert np.max(np.abs(np.diff(vals))) < 0.1  # no jumps on the grid
        sc = GammaScaleKernel()
        assert min(math.exp(sc.log_density(x)) for x in np.linspace(0.5, 1.5, 101)) > 0
        loc = NormalKernel()
        assert min(math.exp(loc.log_density(x)) for x in np.linspace(-0.5, 0.5, 101)) > 0


class TestBuildPrior:
    def test_centering_matches_ml(self, sample, prior):
        from gevbayes import ml_fit
        fit = ml_fit(sample)
        assert prior.a_hat == pytest.approx(fit.theta_hat.sigma)
        assert prior.b_hat == pytest.approx(fit.theta_hat.mu)
        assert prior.coded

    def test_pwm_fallback(self, sample, monkeypatch):
        import gevbayes.prior as prior_mod

        def broken_ml(s):
            raise EstimationError("forced failure")

        monkeypatch.setattr(prior_mod, "ml_fit", broken_ml)
        p = build_prior(sample)
        assert p.fit.method == "pwm"
        assert p.a_hat > 0

    def test_both_estimators_failing(self, sample, monkeypatch):
        import gevbayes.prior as prior_mod

        def broken(s):
            raise EstimationError("forced failure")

        monkeypatch.setattr(prior_mod, "ml_fit", broken)
        monkeypatch.setattr(prior_mod, "pwm_fit", broken)
        with pytest.raises(EstimationError, match="prior construction failed"):
            build_prior(sample)

    def test_invalid_centering(self):
        with pytest.raises(DomainError):
            DataDependentPrior(a_hat=-1.0, b_hat=0.0,
                               shape_kernel=TruncatedTShapeKernel(),
                               loc_kernel=NormalKernel(),
                               scale_kernel=GammaScaleKernel())


class TestLogPrior:
    def test_closed_form_at_center(self, prior):
        # theta = (0, b_hat, a_hat) composes the three kernels at their
        # reference points: (4/3pi) * phi(0)/a * exp(-1)/a
        got = log_prior(prior, GevParams(0.0, prior.b_hat, prior.a_hat))
        want = (math.log(4.0 / (3.0 * math.pi))
                + norm.logpdf(0.0) - math.log(prior.a_hat)
                - 1.0 - math.log(prior.a_hat))
        assert got == pytest.approx(want, rel=1e-12)

    def test_invalid_parameters_give_minus_inf(self, prior):
        assert log_prior(prior, (0.0, 0.0, -1.0)) == -math.inf
        assert log_prior(prior, (0.0, 0.0, 0.0)) == -math.inf
        assert log_prior(prior, (-1.2, 0.0, 1.0)) == -math.inf

    def test_non_finite_theta_domain_error(self, prior):
        with pytest.raises(DomainError):
            log_prior(prior, (math.nan, 0.0, 1.0))

    def test_uniform_shape_override(self, sample):
        p = build_prior(sample, shape_kernel=UniformKernel(-0.9, 2.0))
        assert math.isfinite(log_prior(p, GevParams(0.5, p.b_hat, p.a_hat)))
        assert log_prior(p, GevParams(2.5, p.b_hat, p.a_hat)) == -math.inf
        assert log_prior(p, GevParams(-0.95, p.b_hat, p.a_hat)) == -math.inf

    def test_depends_only_on_rescaled_coordinates(self, sample):
        # apart from the two 1/a_hat Jacobian factors, the value is a
        # function of (gamma, (b-b_hat)/a_hat, a/a_hat) alone
        p1 = build_prior(sample)
        x2 = 2.0 * sample.maxima + 30.0
        p2 = build_prior(BlockMaxSample(x2, sample.block_size_m))
        g, c, t = 0.3, 0.7, 1.4
        v1 = log_prior(p1, GevParams(g, p1.b_hat + c * p1.a_hat, t * p1.a_hat))
        v2 = log_prior(p2, GevParams(g, p2.b_hat + c * p2.a_hat, t * p2.a_hat))
        assert (v1 + 2.0 * math.log(p1.a_hat)
                == pytest.approx(v2 + 2.0 * math.log(p2.a_hat), rel=1e-9))

    def test_normalization_over_theta(self, prior):
        # the prior factorizes, so the triple integral is the product of
        # axis integrals; each is taken through the full log_prior with the
        # other coordinates pinned at the reference point, and the shared
        # factors divide out
        ref = (0.0, prior.b_hat, prior.a_hat)
        log_ref = log_prior(prior, GevParams(*ref))

        # shape axis, compactified via gamma = -1 + u/(1-u)
        def shape_integrand(u):
            g = -1.0 + u / (1.0 - u)
            return math.exp(log_prior(prior, (g, ref[1], ref[2]))) / (1.0 - u) ** 2

        int_shape, _ = quad(shape_integrand, 0.0, 1.0, limit=400)
        int_loc, _ = quad(
            lambda b: math.exp(log_prior(prior, (0.0, b, ref[2]))),
            prior.b_hat - 12 * prior.a_hat, prior.b_hat + 12 * prior.a_hat, limit=400)
        int_scale, _ = quad(
            lambda a: math.exp(log_prior(prior, (0.0, ref[1], a))),
            0.0, 60.0 * prior.a_hat, limit=400)
        total = int_shape * int_loc * int_scale / math.exp(2.0 * log_ref)
        assert total == pytest.approx(1.0, abs=1e-4)

    def test_continuity_probe(self, prior):
        rng = np.random.default_rng(2)
        for _ in range(30):
            theta = (rng.uniform(-0.8, 2.0),
                     prior.b_hat + rng.normal() * prior.a_hat,
                     prior.a_hat * rng.uniform(0.3, 3.0))
            base = log_prior(prior, theta)
            for i in range(3):
                step = [0.0, 0.0, 0.0]
                step[i] = 1e-6 * max(1.0, abs(theta[i]))
                moved = tuple(t + s for t, s in zip(theta, step))
                assert abs(log_prior(prior, moved) - base) < 1e-3


class TestLogUnnormalizedPosterior:
    def test_additivity(self, sample, prior):
        theta = GevParams(0.1, prior.b_hat, prior.a_hat)
        assert log_unnormalized_posterior(prior, sample, theta) == pytest.approx(
            log_likelihood(theta, sample) + log_prior(prior, theta), rel=1e-14)

    def test_minus_inf_outside_data_support(self, sample, prior):
        theta = GevParams(1.0, float(sample.maxima.max()), 1.0)  # excludes low data
        assert log_unnormalized_posterior(prior, sample, theta) == -math.inf

    def test_permutation_invariant(self, sample, prior):
        theta = GevParams(0.1, prior.b_hat, prior.a_hat)
        shuffled = BlockMaxSample(sample.maxima[::-1].copy(), sample.block_size_m)
        assert log_unnormalized_posterior(prior, sample, theta) == pytest.approx(
            log_unnormalized_posterior(prior, shuffled, theta), rel=1e-12)
