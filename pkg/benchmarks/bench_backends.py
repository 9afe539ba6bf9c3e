"""Benchmark the compiled kernel core against the pure-Python fallback.

Times the two operations the package spends its life in: the GEV
log-likelihood and the full adaptive MCMC loop.

    python benchmarks/bench_backends.py [--iters 15000] [--k 106]
"""

import argparse
import time

import numpy as np

from gevbayes import BlockMaxSample, ChainConfig, GevParams, build_prior, gev_quantile
from gevbayes import _pykernels
from gevbayes.sampler import rm_steplength

try:
    from gevbayes import _ckernels
except ImportError:
    _ckernels = None


def _time(fn, repeat=5):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--iters", type=int, default=15_000)
    ap.add_argument("--k", type=int, default=106)
    ap.add_argument("--loglik-reps", type=int, default=20_000)
    args = ap.parse_args()

    theta = GevParams(-0.35, 216.7, 37.3)
    u = (np.arange(1, args.k + 1) - 0.5) / args.k
    x = np.array([gev_quantile(theta, 1 - ui) for ui in u])
    sample = BlockMaxSample(x, 109)
    prior = build_prior(sample)
    cfg = ChainConfig(n_iter=args.iters, burn_in=args.iters // 3, seed=1)

    rng = np.random.default_rng(cfg.seed)
    normals = rng.standard_normal((cfg.n_iter, 3))
    unifs = rng.random(cfg.n_iter)
    chain_args = (
        sample.maxima, theta.as_array(), cfg.kappa0, cfg.n_iter,
        (prior.shape_kernel.code, *prior.shape_kernel.coded_params),
        (prior.loc_kernel.code, *prior.loc_kernel.coded_params),
        (prior.scale_kernel.code, *prior.scale_kernel.coded_params),
        prior.a_hat, prior.b_hat, cfg.target_accept,
        rm_steplength(cfg.target_accept), False, -1, normals, unifs,
    )

    backends = [("python", _pykernels)]
    if _ckernels is not None:
        backends.append(("c", _ckernels))
    else:
        print("compiled backend unavailable (run `python setup.py build_ext --inplace`)")

    print(f"log-likelihood, k={args.k}, {args.loglik_reps} evaluations:")
    ll_times = {}
    for name, mod in backends:
        def loglik_loop(mod=mod):
            for _ in range(args.loglik_reps):
                mod.gev_loglik(-0.35, 216.7, 37.3, x)
        t = _time(loglik_loop, repeat=3)
        ll_times[name] = t
        print(f"  {name:>7}: {t:8.3f} s  ({t / args.loglik_reps * 1e6:7.2f} us/eval)")

    print(f"adaptive chain, {args.iters} iterations:")
    chain_times = {}
    for name, mod in backends:
        t = _time(lambda mod=mod: mod.run_chain_coded(*chain_args), repeat=3)
        chain_times[name] = t
        print(f"  {name:>7}: {t:8.3f} s  ({t / args.iters * 1e6:7.2f} us/step)")

    if len(backends) == 2:
        print(f"speedup: log-likelihood x{ll_times['python'] / ll_times['c']:.1f}, "
              f"chain x{chain_times['python'] / chain_times['c']:.1f}")


if __name__ == "__main__":
    main()
