import numpy as np
import pytest

from gevbayes import BlockMaxSample, ChainConfig, build_prior, run_chain
from gevbayes.datasets import atlantic_annual_maxima
from gevbayes.sampler import PosteriorDraws


@pytest.fixture(scope="session")
def atlantic_series():
    return atlantic_annual_maxima()


@pytest.fixture(scope="session")
def atlantic_sample(atlantic_series):
    return atlantic_series.to_sample(block_size_m=1460)


@pytest.fixture(scope="session")
def atlantic_prior(atlantic_sample):
    return build_prior(atlantic_sample)


@pytest.fixture(scope="session")
def atlantic_draws(atlantic_sample, atlantic_prior):
    """Posterior draws at the real-data analysis scale (8k/5k/3k retained)."""
    cfg = ChainConfig(n_iter=8_000, burn_in=5_000, seed=8)
    return run_chain(atlantic_sample, atlantic_prior, cfg)


def make_draws(arr: np.ndarray, block_size_m: int = 1) -> PosteriorDraws:
    """Wrap a raw (N, 3) array as PosteriorDraws for functional-level tests."""
    arr = np.asarray(arr, dtype=float)
    n = arr.shape[0]
    return PosteriorDraws(
        draws=arr,
        accept_rate=1.0,
        kappa_trace=np.ones(n + 1),
        log_post_trace=np.zeros(n + 1),
        config=ChainConfig(n_iter=max(n, 2), burn_in=0, seed=0),
        block_size_m=block_size_m,
        theta_trace=arr,
        accept_trace=np.ones(n, dtype=np.uint8),
    )
