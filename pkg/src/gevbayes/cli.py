"""Command-line pipeline.

Subcommands:
  fit             full analysis of an annual-maxima series (prior, chain,
                  summaries, intervals, return-level curve, predictive)
  predict         predictive return-level quantiles only
  simulate        posterior-concentration study over the built-in models
  coverage        frequentist coverage study of the credible sets
  hurdat extract  HURDAT2 best-track file -> annual-maxima CSV

Exit codes: 0 success, 2 input/parse error, 3 numerical or chain
failure, 4 configuration error. The default output directory can be set
with the environment variable GEVBAYES_OUTDIR.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import tempfile
import time

import numpy as np
from scipy.stats import gaussian_kde

from . import __version__
from ._backend import BACKEND
from .errors import (
    ConfigError,
    DomainError,
    EstimationError,
    GevBayesError,
    ParseError,
    SamplerError,
    SimulationError,
)
from .gev import BlockMaxSample, GevParams
from .hurdat import (
    annual_maxima,
    parse_hurdat,
    read_annual_series_csv,
    write_annual_series_csv,
)
from .posterior import (
    ScalarPosterior,
    credible_interval_asymmetric,
    credible_interval_symmetric,
    extreme_quantile_posterior,
    predictive_density,
    predictive_quantile,
    return_level_posterior,
    summarize,
)
from .prior import (
    GammaScaleKernel,
    NormalKernel,
    TruncatedTShapeKernel,
    UniformKernel,
    build_prior,
)
from .sampler import ChainConfig, export_trace_csv, run_chain
from .simstudy import TRUE_MODELS, ScenarioGrid, run_scenario

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3
EXIT_CONFIG = 4


# ---------------------------------------------------------------------------
# atomic writers
# ---------------------------------------------------------------------------

def _atomic_write(path: str, write_fn):
    d = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            write_fn(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_csv(path: str, header: list[str], rows):
    def go(fh):
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    _atomic_write(path, go)


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _write_json(path: str, obj):
    _atomic_write(path, lambda fh: json.dump(obj, fh, indent=2, sort_keys=True))


# ---------------------------------------------------------------------------
# configuration plumbing
# ---------------------------------------------------------------------------

def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config file must hold a JSON object")
    return cfg


def _resolve(args, cfg: dict, key: str, default):
    """CLI flag beats config file beats default."""
    v = getattr(args, key, None)
    if v is not None:
        return v
    if key in cfg:
        return cfg[key]
    return default


def _parse_kernel(spec: str):
    parts = spec.split(":")
    fam = parts[0].lower()
    try:
        if fam == "t":
            return TruncatedTShapeKernel(nu=float(parts[1]) if len(parts) > 1 else 1.0)
        if fam == "uniform":
            return UniformKernel(float(parts[1]), float(parts[2]))
        if fam == "normal":
            mean = float(parts[1]) if len(parts) > 1 else 0.0
            sd = float(parts[2]) if len(parts) > 2 else 1.0
            return NormalKernel(mean, sd)
        if fam == "gamma":
            shape = float(parts[1]) if len(parts) > 1 else 1.0
            scale = float(parts[2]) if len(parts) > 2 else 1.0
            return GammaScaleKernel(shape, scale)
    except (IndexError, ValueError, DomainError) as exc:
        raise ConfigError(f"bad kernel spec {spec!r}: {exc}") from exc
    raise ConfigError(f"unknown kernel family in {spec!r} "
                      "(expected t, uniform, normal or gamma)")


def _parse_float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in str(text).split(",") if t.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad numeric list {text!r}") from exc


def _parse_pairs(text: str) -> list[tuple[int, int]]:
    pairs = []
    try:
        for tok in str(text).split(","):
            m, k = tok.split(":")
            pairs.append((int(m), int(k)))
    except ValueError as exc:
        raise ConfigError(f"bad pairs spec {text!r} (expected like 40:20,109:50)") from exc
    return pairs


def _outdir(args, cfg) -> str:
    out = _resolve(args, cfg, "outdir", None) or os.environ.get("GEVBAYES_OUTDIR") or "."
    os.makedirs(out, exist_ok=True)
    return out


def _load_series(args, cfg):
    input_path = _resolve(args, cfg, "input", None)
    hurdat_path = _resolve(args, cfg, "hurdat", None)
    if bool(input_path) == bool(hurdat_path):
        raise ConfigError("exactly one of --input (annual CSV) or --hurdat must be given")
    y0 = int(_resolve(args, cfg, "year_start", 1915))
    y1 = int(_resolve(args, cfg, "year_end", 2020))
    if input_path:
        return read_annual_series_csv(input_path)
    knots = not bool(_resolve(args, cfg, "no_knots", False))
    parsed = parse_hurdat(hurdat_path, winds_in_knots=knots)
    series = annual_maxima(parsed, (y0, y1), source=hurdat_path)
    if series.missing_years:
        print(f"note: {len(series.missing_years)} year(s) without any record: "
              f"{series.missing_years}", file=sys.stderr)
    if parsed.missing_wind_count:
        print(f"note: skipped {parsed.missing_wind_count} record(s) with missing wind",
              file=sys.stderr)
    return series


def _chain_config(args, cfg, default_iters=8_000, default_burn=5_000) -> ChainConfig:
    return ChainConfig(
        n_iter=int(_resolve(args, cfg, "iters", default_iters)),
        burn_in=int(_resolve(args, cfg, "burn_in", default_burn)),
        thin=int(_resolve(args, cfg, "thin", 1)),
        target_accept=float(_resolve(args, cfg, "target_accept", 0.234)),
        seed=int(_resolve(args, cfg, "seed", 0)),
        rm_decay=bool(_resolve(args, cfg, "rm_decay", False)),
    )


def _prior_kernels(args, cfg):
    out = {}
    for key, name in (("shape_kernel", "shape_kernel"),
                      ("loc_kernel", "loc_kernel"),
                      ("scale_kernel", "scale_kernel")):
        spec = _resolve(args, cfg, key, None)
        out[name] = _parse_kernel(spec) if spec else None
    return out


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------

def _interval_pair(sp: ScalarPosterior, alpha: float):
    a = credible_interval_asymmetric(sp, alpha)
    s = credible_interval_symmetric(sp, alpha)
    return {"asymmetric": [a.lower, a.upper], "symmetric": [s.lower, s.upper]}


def cmd_fit(args) -> int:
    cfg = _load_config(args.config)
    series = _load_series(args, cfg)
    out = _outdir(args, cfg)
    m_block = int(_resolve(args, cfg, "block_size", 1))
    alpha = float(_resolve(args, cfg, "alpha", 0.05))
    periods = _parse_float_list(_resolve(args, cfg, "return_periods", "2,5,10,15"))
    sample = series.to_sample(block_size_m=m_block)
    chain_cfg = _chain_config(args, cfg)

    prior = build_prior(sample, **_prior_kernels(args, cfg))
    draws = run_chain(sample, prior, chain_cfg)
    summ = summarize(draws)

    fit = prior.fit
    params = {}
    for i, name in enumerate(("gamma", "mu", "sigma")):
        sp = ScalarPosterior(draws.draws[:, i], name)
        params[name] = {
            "mle": getattr(fit.theta_hat, name),
            "posterior_mean": float(summ.mean[i]),
            "posterior_sd": float(summ.sd[i]),
            "intervals": _interval_pair(sp, alpha),
        }
    rls = {}
    for T in periods:
        sp = return_level_posterior(draws, T)
        rls[f"{T:g}"] = {
            "mle": _rl_point(fit.theta_hat, T),
            "posterior_mean": sp.mean(),
            "predictive_quantile": predictive_quantile(draws, 1.0 / T),
            "intervals": _interval_pair(sp, alpha),
        }
    extremes = {}
    p_levels = _resolve(args, cfg, "p_levels", None)
    if p_levels:
        # exceedance levels of a single underlying observation, mapped
        # through the aggregated level for the configured block size
        for p in _parse_float_list(p_levels):
            sp = extreme_quantile_posterior(draws, p)
            extremes[f"{p:g}"] = {
                "posterior_mean": sp.mean(),
                "intervals": _interval_pair(sp, alpha),
            }
    summary = {
        "k": sample.k,
        "block_size_m": m_block,
        "alpha": alpha,
        "estimator": {"method": fit.method, "converged": fit.converged,
                      "log_lik": fit.log_lik},
        "parameters": params,
        "return_levels": rls,
        "extreme_quantiles": extremes,
        "chain": {"n_iter": chain_cfg.n_iter, "burn_in": chain_cfg.burn_in,
                  "thin": chain_cfg.thin, "seed": chain_cfg.seed,
                  "accept_rate": draws.accept_rate, "backend": BACKEND},
        "source": series.source,
    }
    _write_json(os.path.join(out, "summary.json"), summary)

    _write_csv(
        os.path.join(out, "posterior_draws.csv"),
        ["draw", "gamma", "mu", "sigma", "log_post"],
        (
            (i, draws.draws[i, 0], draws.draws[i, 1], draws.draws[i, 2],
             draws.log_post_trace[chain_cfg.burn_in + (i + 1) * chain_cfg.thin])
            for i in range(draws.n)
        ),
    )

    t_grid = np.geomspace(2.0, float(_resolve(args, cfg, "curve_tmax", 1000.0)),
                          int(_resolve(args, cfg, "curve_points", 60)))
    rows = []
    for T in t_grid:
        sp = return_level_posterior(draws, float(T))
        a = credible_interval_asymmetric(sp, alpha)
        s = credible_interval_symmetric(sp, alpha)
        rows.append((T, sp.mean(), a.lower, a.upper, s.lower, s.upper,
                     predictive_quantile(draws, 1.0 / float(T))))
    _write_csv(
        os.path.join(out, "return_curve.csv"),
        ["T", "rl_mean", "rl_asym_lo", "rl_asym_hi", "rl_sym_lo", "rl_sym_hi",
         "rl_predictive"],
        rows,
    )

    _write_csv(os.path.join(out, "density_grid.csv"),
               ["variable", "x", "density"], _density_rows(draws))

    if getattr(args, "trace", False):
        export_trace_csv(draws, os.path.join(out, "trace.csv"))
    print(f"fit written to {out} (k={sample.k}, accept={draws.accept_rate:.3f})")
    return EXIT_OK


def _rl_point(theta: GevParams, T: float) -> float:
    from .gev import gev_quantile
    return gev_quantile(theta, 1.0 / T)


def _density_rows(draws, n_grid: int = 201):
    rows = []
    for i, name in enumerate(("gamma", "mu", "sigma")):
        col = draws.draws[:, i]
        kde = gaussian_kde(col)
        lo, hi = col.min(), col.max()
        pad = 0.1 * (hi - lo)
        grid = np.linspace(lo - pad, hi + pad, n_grid)
        dens = kde(grid)
        rows.extend((name, float(g), float(d)) for g, d in zip(grid, dens))
    lo = predictive_quantile(draws, 0.999)
    hi = predictive_quantile(draws, 0.001)
    pad = 0.1 * (hi - lo)
    grid = np.linspace(lo - pad, hi + pad, n_grid)
    rows.extend(("predictive", float(g), predictive_density(draws, float(g)))
                for g in grid)
    return rows


# ---------------------------------------------------------------------------
# predict
# ---------------------------------------------------------------------------

def cmd_predict(args) -> int:
    cfg = _load_config(args.config)
    out = _outdir(args, cfg)
    draws_path = _resolve(args, cfg, "draws", None)
    m_block = int(_resolve(args, cfg, "block_size", 1))
    if draws_path:
        arr = np.atleast_2d(
            np.loadtxt(draws_path, delimiter=",", skiprows=1, usecols=(1, 2, 3)))
        from .sampler import PosteriorDraws
        n = arr.shape[0]
        draws = PosteriorDraws(
            draws=arr, accept_rate=float("nan"),
            kappa_trace=np.empty(0), log_post_trace=np.empty(0),
            config=ChainConfig(n_iter=max(n, 2), burn_in=0, seed=0),
            block_size_m=m_block, theta_trace=arr, accept_trace=np.empty(0),
        )
    else:
        series = _load_series(args, cfg)
        sample = series.to_sample(block_size_m=m_block)
        prior = build_prior(sample, **_prior_kernels(args, cfg))
        draws = run_chain(sample, prior, _chain_config(args, cfg))
    periods = _parse_float_list(_resolve(args, cfg, "return_periods", "2,5,10,15"))
    rows = [(T, 1.0 / T, predictive_quantile(draws, 1.0 / T)) for T in periods]
    path = os.path.join(out, "predictive_quantiles.csv")
    _write_csv(path, ["T", "p", "predictive_quantile"], rows)
    print(f"predictive quantiles written to {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# studies
# ---------------------------------------------------------------------------

def _grid_from_args(args, cfg) -> tuple[list, ScenarioGrid]:
    names = [t.strip() for t in
             str(_resolve(args, cfg, "models", "half-cauchy,gamma,power-law")).split(",")]
    models = []
    for n in names:
        if n not in TRUE_MODELS:
            raise ConfigError(f"unknown model {n!r}; available: {sorted(TRUE_MODELS)}")
        models.append(TRUE_MODELS[n])
    grid = ScenarioGrid(
        pairs=tuple(_parse_pairs(_resolve(args, cfg, "pairs", "40:20,109:50"))),
        replications=int(_resolve(args, cfg, "reps", 200)),
        chain=_chain_config(args, cfg, default_iters=15_000, default_burn=5_000),
        alpha=float(_resolve(args, cfg, "alpha", 0.05)),
        seed=int(_resolve(args, cfg, "seed", 20200504)),
    )
    return models, grid


def _manifest(models, grid: ScenarioGrid, elapsed: float, extra=None) -> dict:
    man = {
        "version": __version__,
        "backend": BACKEND,
        "numpy": np.__version__,
        "models": [m.name for m in models],
        "pairs": [list(p) for p in grid.pairs],
        "replications": grid.replications,
        "alpha": grid.alpha,
        "seed": grid.seed,
        "chain": {"n_iter": grid.chain.n_iter, "burn_in": grid.chain.burn_in,
                  "thin": grid.chain.thin, "target_accept": grid.chain.target_accept},
        "elapsed_seconds": elapsed,
    }
    if extra:
        man.update(extra)
    return man


def cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    out = _outdir(args, cfg)
    models, grid = _grid_from_args(args, cfg)
    t0 = time.time()
    rows = []
    errors = []
    for model in models:
        for m, k in grid.pairs:
            try:
                res = run_scenario(model, m, k, grid)
            except SimulationError as exc:
                errors.append(str(exc))
                continue
            rows.append((res.model, res.k, res.m, res.schedule.c,
                         res.schedule.epsilon, res.schedule.r_bound,
                         res.b_m0, res.a_m0, res.p_k, res.failures))
    _write_csv(os.path.join(out, "concentration_table.csv"),
               ["model", "k", "m", "c_k", "epsilon_k", "r_bound",
                "b_m0", "a_m0", "p_k_percent", "failures"], rows)
    _write_json(os.path.join(out, "manifest.json"),
                _manifest(models, grid, time.time() - t0,
                          {"scenario_errors": errors, "table": "concentration"}))
    for e in errors:
        print(f"scenario failed: {e}", file=sys.stderr)
    print(f"concentration study written to {out}")
    return EXIT_OK if not errors else EXIT_NUMERICAL


def cmd_coverage(args) -> int:
    cfg = _load_config(args.config)
    out = _outdir(args, cfg)
    models, grid = _grid_from_args(args, cfg)
    t0 = time.time()
    rows = []
    errors = []
    for model in models:
        for m, k in grid.pairs:
            try:
                res = run_scenario(model, m, k, grid)
            except SimulationError as exc:
                errors.append(str(exc))
                continue
            rows.append((res.model, res.k, res.m, "S",
                         res.coverage_sym["gamma"], res.coverage_sym["loc"],
                         res.coverage_sym["scale"], res.coverage_ellipsoid,
                         res.coverage_sym["return_level"],
                         res.coverage_sym["extreme_quantile"], res.failures))
            rows.append((res.model, res.k, res.m, "A",
                         res.coverage_asym["gamma"], res.coverage_asym["loc"],
                         res.coverage_asym["scale"], "",
                         res.coverage_asym["return_level"],
                         res.coverage_asym["extreme_quantile"], res.failures))
    _write_csv(os.path.join(out, "coverage_table.csv"),
               ["model", "k", "m", "type", "gamma", "loc", "scale",
                "theta_ellipsoid", "return_level", "extreme_quantile",
                "failures"], rows)
    _write_json(os.path.join(out, "manifest.json"),
                _manifest(models, grid, time.time() - t0,
                          {"scenario_errors": errors, "table": "coverage"}))
    for e in errors:
        print(f"scenario failed: {e}", file=sys.stderr)
    print(f"coverage study written to {out}")
    return EXIT_OK if not errors else EXIT_NUMERICAL


# ---------------------------------------------------------------------------
# hurdat extract
# ---------------------------------------------------------------------------

def cmd_hurdat_extract(args) -> int:
    cfg = _load_config(args.config)
    knots = not bool(_resolve(args, cfg, "no_knots", False))
    y0 = int(_resolve(args, cfg, "year_start", 1915))
    y1 = int(_resolve(args, cfg, "year_end", 2020))
    parsed = parse_hurdat(args.input, winds_in_knots=knots)
    series = annual_maxima(parsed, (y0, y1), source=args.input)
    write_annual_series_csv(series, args.output)
    msg = (f"extracted {series.k} annual maxima ({series.years[0]}-{series.years[-1]})"
           f" from {parsed.n_storms} storms")
    if parsed.missing_wind_count:
        msg += f"; skipped {parsed.missing_wind_count} missing-wind records"
    if series.missing_years:
        msg += f"; years without records: {series.missing_years}"
    print(msg)
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _add_common(p):
    p.add_argument("--config", help="JSON config file; flags override its entries")
    p.add_argument("--outdir", help="output directory (default: $GEVBAYES_OUTDIR or .)")
    p.add_argument("--seed", type=int, help="random seed")
    p.add_argument("--iters", type=int, help="total MCMC iterations")
    p.add_argument("--burn-in", dest="burn_in", type=int, help="burn-in iterations")
    p.add_argument("--thin", type=int, help="thinning stride")
    p.add_argument("--target-accept", dest="target_accept", type=float)
    p.add_argument("--rm-decay", dest="rm_decay", action="store_const", const=True,
                   help="decay the Robbins-Monro steplength as 1/max(1, j/100)")
    p.add_argument("--alpha", type=float, help="1 - credibility level (default 0.05)")


def _add_input(p):
    p.add_argument("--input", help="annual-maxima CSV (year,value)")
    p.add_argument("--hurdat", help="HURDAT2 best-track file")
    p.add_argument("--no-knots", dest="no_knots", action="store_const", const=True,
                   help="input winds already in km/h; skip the knots conversion")
    p.add_argument("--year-start", dest="year_start", type=int)
    p.add_argument("--year-end", dest="year_end", type=int)
    p.add_argument("--block-size", dest="block_size", type=int,
                   help="observations per block, for extreme-quantile mapping")
    p.add_argument("--return-periods", dest="return_periods",
                   help="comma-separated return periods (default 2,5,10,15)")
    p.add_argument("--p-levels", dest="p_levels",
                   help="per-observation exceedance levels for extreme "
                        "quantiles (uses --block-size)")
    p.add_argument("--shape-kernel", dest="shape_kernel",
                   help="prior shape kernel, e.g. t:1 or uniform:-0.9:2")
    p.add_argument("--loc-kernel", dest="loc_kernel",
                   help="prior location kernel, e.g. normal:0:1")
    p.add_argument("--scale-kernel", dest="scale_kernel",
                   help="prior scale kernel, e.g. gamma:1:1")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gevbayes",
                description="Empirical-Bayes block-maxima analysis.")
    p.add_argument("--version", action="version", version=f"gevbayes {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="full posterior analysis of a series")
    _add_input(fit)
    _add_common(fit)
    fit.add_argument("--curve-tmax", dest="curve_tmax", type=float,
                     help="largest return period on the curve (default 1000)")
    fit.add_argument("--curve-points", dest="curve_points", type=int)
    fit.add_argument("--trace", action="store_true",
                     help="also write the full chain trace CSV")
    fit.set_defaults(fn=cmd_fit)

    pred = sub.add_parser("predict", help="predictive return-level quantiles")
    _add_input(pred)
    _add_common(pred)
    pred.add_argument("--draws", help="reuse a posterior_draws.csv instead of sampling")
    pred.set_defaults(fn=cmd_predict)

    sim = sub.add_parser("simulate", help="posterior-concentration study")
    _add_common(sim)
    sim.add_argument("--models", help="comma-separated model names")
    sim.add_argument("--pairs", help="block grid, e.g. 40:20,109:50")
    sim.add_argument("--reps", type=int, help="Monte Carlo replications per scenario")
    sim.set_defaults(fn=cmd_simulate)

    cov = sub.add_parser("coverage", help="frequentist coverage study")
    _add_common(cov)
    cov.add_argument("--models", help="comma-separated model names")
    cov.add_argument("--pairs", help="block grid, e.g. 40:20,109:50")
    cov.add_argument("--reps", type=int, help="Monte Carlo replications per scenario")
    cov.set_defaults(fn=cmd_coverage)

    hd = sub.add_parser("hurdat", help="HURDAT2 utilities")
    hsub = hd.add_subparsers(dest="hurdat_command", required=True)
    ext = hsub.add_parser("extract", help="extract annual maxima to CSV")
    ext.add_argument("--input", required=True)
    ext.add_argument("--output", required=True)
    ext.add_argument("--no-knots", dest="no_knots", action="store_const", const=True)
    ext.add_argument("--year-start", dest="year_start", type=int)
    ext.add_argument("--year-end", dest="year_end", type=int)
    ext.add_argument("--config")
    ext.set_defaults(fn=cmd_hurdat_extract)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ParseError, FileNotFoundError, DomainError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SamplerError, EstimationError, SimulationError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except GevBayesError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
