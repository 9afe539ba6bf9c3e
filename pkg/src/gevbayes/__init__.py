"""Empirical-Bayes inference for block maxima under the GEV model.

A GEV likelihood with a data-dependent prior (shape kernel free of the
data, location/scale kernels centered at estimator fits), an adaptive
random-walk Metropolis-Hastings sampler, posterior functionals for
parameters, return levels, extreme quantiles and the posterior
predictive distribution, plus a simulation harness and an annual-maxima
pipeline for hurricane wind speeds.
"""

from ._backend import BACKEND
from .errors import (
    ChainInitError,
    ConfigError,
    DomainError,
    EstimationError,
    GevBayesError,
    ParseError,
    SamplerError,
    SimulationError,
)
from .estimators import FitResult, ml_fit, pwm_fit
from .gev import (
    BlockMaxSample,
    GevParams,
    GevSupport,
    extreme_quantile,
    fisher_info_numeric,
    gev_cdf,
    gev_log_density,
    gev_quantile,
    log_likelihood,
    score,
    score_process,
    support,
)
from .posterior import (
    CredibleInterval,
    EllipsoidRegion,
    ScalarPosterior,
    credible_interval_asymmetric,
    credible_interval_symmetric,
    ellipsoid_region,
    extreme_quantile_posterior,
    predictive_cdf,
    predictive_density,
    predictive_quantile,
    return_level_posterior,
    summarize,
)
from .prior import (
    DataDependentPrior,
    GammaScaleKernel,
    NormalKernel,
    TruncatedTShapeKernel,
    UniformKernel,
    build_prior,
    log_prior,
    log_unnormalized_posterior,
)
from .sampler import (
    ChainConfig,
    ChainState,
    PosteriorDraws,
    export_trace_csv,
    run_chain,
    run_chain_target,
)
from .simstudy import (
    TRUE_MODELS,
    ScenarioGrid,
    TrueModel,
    concentration_summary,
    coverage_study,
    epsilon_schedule,
    generate_block_maxima,
    true_norming_constants,
)

__version__ = "0.1.0"
