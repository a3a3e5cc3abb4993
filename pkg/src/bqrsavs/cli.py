"""Command-line front end: fit, sparsify, simulate, and forecast pipelines.

Flag values override config-file values, which override the built-in
defaults. Every run echoes its effective configuration and writes a JSON
summary with seeds, package version, and timings next to the CSV artifacts.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .data import Dataset, load_csv
from .forecast import WindowConfig, run_expanding_window
from .gibbs import ChainConfig, NumericalError, run_gibbs
from .io import read_chain_csv, write_chain_csv, write_table_csv
from .priors import FAMILIES, PriorConfig
from .quantile import quantile_constants
from .rng import rng_for
from .scoring import dm_test
from .simulate import ESTIMATORS, DgpSpec, run_monte_carlo
from .sparsify import SparsifyConfig, sparsify_chain

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERICAL = 4


class ConfigError(ValueError):
    pass


@dataclasses.dataclass
class RunConfig:
    command: str
    data_path: str | None = None
    quantiles: list[float] = dataclasses.field(default_factory=lambda: [0.5])
    prior: PriorConfig = dataclasses.field(default_factory=PriorConfig)
    chain: ChainConfig = dataclasses.field(default_factory=ChainConfig)
    sparsify: SparsifyConfig = dataclasses.field(default_factory=SparsifyConfig)
    dgp: DgpSpec | None = None
    output_dir: str = "out"
    threads: int = 1
    seed: int = 0
    add_intercept: bool = False
    from_chains: str | None = None
    estimators: list[str] = dataclasses.field(
        default_factory=lambda: ["hsbqr", "hsbqr_bic"])
    replications: int = 10
    horizons: list[int] = dataclasses.field(default_factory=lambda: [1])
    n_quantiles: int = 19
    initial_window: int = 50


_PRIOR_KEYS = {"family", "a1", "b1", "a2", "b2", "a3", "b3", "c", "literal_pi0"}
_SIGMA_KEYS = {"a", "b"}
_CHAIN_KEYS = {"burn", "retained", "thin", "sampler"}
_SPARSIFY_KEYS = {"mode", "kappa", "grid", "correction", "per_draw", "penalty_constant"}
_DGP_KEYS = {"design", "sparsity", "T", "K", "rho", "error_df"}
_TOP_KEYS = {"prior", "sigma", "chain", "sparsify", "dgp", "quantiles", "seed",
             "threads", "output_dir", "data", "estimators", "replications",
             "horizons", "n_quantiles", "initial_window", "add_intercept"}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bqr",
        description="Bayesian quantile regression with shrinkage, sparsification, "
                    "simulation, and forecasting pipelines.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON config file; flags override it")
        sp.add_argument("--out", dest="output_dir", help="output directory")
        sp.add_argument("--seed", type=int, help="master seed")
        sp.add_argument("--threads", type=int, help="worker count (env BQR_THREADS)")
        sp.add_argument("--prior", dest="prior_family", choices=FAMILIES)
        sp.add_argument("--burn", type=int, help="burn-in draws")
        sp.add_argument("--retained", type=int, help="retained draws")
        sp.add_argument("--thin", type=int, help="thinning stride")
        sp.add_argument("--sampler", choices=["auto", "direct", "fast"])
        sp.add_argument("--sparsify", dest="sparsify_mode", choices=["fixed", "qbic"])
        sp.add_argument("--kappa", type=float, help="fixed sparsification exponent")

    for name in ("fit", "sparsify"):
        sp = sub.add_parser(name)
        common(sp)
        sp.add_argument("--data", dest="data_path")
        sp.add_argument("--quantile", dest="quantiles", action="append", type=float,
                        help="quantile level in (0,1); repeatable")
        sp.add_argument("--intercept", dest="add_intercept", action="store_true",
                        default=None, help="prepend a column of ones")
        if name == "sparsify":
            sp.add_argument("--from-chains", dest="from_chains",
                            help="directory of chain CSVs from a previous fit")

    sp = sub.add_parser("simulate")
    common(sp)
    sp.add_argument("--design", choices=["y1", "y2", "y3", "y4"])
    sp.add_argument("--sparsity", choices=["sparse", "block"])
    sp.add_argument("--T", type=int, dest="dgp_T")
    sp.add_argument("--K", type=int, dest="dgp_K")
    sp.add_argument("--rho", type=float)
    sp.add_argument("--replications", type=int)
    sp.add_argument("--estimators", help="comma-separated estimator names")
    sp.add_argument("--quantile", dest="quantiles", action="append", type=float)

    sp = sub.add_parser("forecast")
    common(sp)
    sp.add_argument("--data", dest="data_path")
    sp.add_argument("--horizons", help="comma-separated horizons, e.g. 1,2,3,4")
    sp.add_argument("--quantiles", dest="n_quantiles", type=int,
                    help="number of equidistant quantile levels")
    sp.add_argument("--initial-window", dest="initial_window", type=int)
    sp.add_argument("--estimators", help="comma-separated estimator names")
    sp.add_argument("--intercept", dest="add_intercept", action="store_true",
                    default=None)
    return parser


def _load_config_file(path: str) -> dict:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    _check_keys(raw, _TOP_KEYS, "")
    for section, allowed in (("prior", _PRIOR_KEYS), ("sigma", _SIGMA_KEYS),
                             ("chain", _CHAIN_KEYS), ("sparsify", _SPARSIFY_KEYS),
                             ("dgp", _DGP_KEYS)):
        if section in raw:
            _check_keys(raw[section], allowed, section + ".")
    return raw


def _check_keys(d: dict, allowed: set, prefix: str) -> None:
    if not isinstance(d, dict):
        raise ConfigError(f"config section {prefix or 'top level'} must be an object")
    for key in d:
        if key not in allowed:
            raise ConfigError(f"unknown config key {prefix}{key}")


def parse_config(argv: list[str]) -> RunConfig:
    """Resolve argv and optional config file into one effective RunConfig."""
    parser = _build_parser()
    ns = parser.parse_args(argv)
    raw = _load_config_file(ns.config) if ns.config else {}

    def pick(flag_val, file_path: tuple, default):
        if flag_val is not None:
            return flag_val
        node = raw
        for part in file_path:
            if not isinstance(node, dict) or part not in node:
                return default
            node = node[part]
        return node

    prior = PriorConfig(
        family=pick(getattr(ns, "prior_family", None), ("prior", "family"), "horseshoe"),
        a1=pick(None, ("prior", "a1"), 0.1), b1=pick(None, ("prior", "b1"), 0.1),
        a2=pick(None, ("prior", "a2"), 0.1), b2=pick(None, ("prior", "b2"), 0.1),
        a3=pick(None, ("prior", "a3"), 1.0), b3=pick(None, ("prior", "b3"), 1.0),
        c=pick(None, ("prior", "c"), 1e-5),
        sigma_a=pick(None, ("sigma", "a"), 0.1), sigma_b=pick(None, ("sigma", "b"), 0.1),
        ssvs_literal_pi0=bool(pick(None, ("prior", "literal_pi0"), False)),
    )
    try:
        chain = ChainConfig(
            burn_in=int(pick(getattr(ns, "burn", None), ("chain", "burn"), 5000)),
            retained=int(pick(getattr(ns, "retained", None), ("chain", "retained"), 5000)),
            thin=int(pick(getattr(ns, "thin", None), ("chain", "thin"), 1)),
            seed=0,
            beta_sampler=pick(getattr(ns, "sampler", None), ("chain", "sampler"), "auto"),
        )
        grid = pick(None, ("sparsify", "grid"), None)
        sparsify_kwargs = dict(
            kappa_mode=pick(getattr(ns, "sparsify_mode", None), ("sparsify", "mode"), "qbic"),
            kappa=float(pick(getattr(ns, "kappa", None), ("sparsify", "kappa"), 2.0)),
            use_ald_correction=bool(pick(None, ("sparsify", "correction"), False)),
            per_draw=bool(pick(None, ("sparsify", "per_draw"), True)),
            penalty_constant=pick(None, ("sparsify", "penalty_constant"), None),
        )
        if grid is not None:
            sparsify_kwargs["kappa_grid"] = np.asarray(grid, dtype=float)
        sparse = SparsifyConfig(**sparsify_kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    quantiles = pick(getattr(ns, "quantiles", None), ("quantiles",), [0.5])
    quantiles = [float(p) for p in quantiles]
    for p in quantiles:
        if not 0.0 < p < 1.0:
            raise ConfigError(f"--quantile must lie in (0, 1), got {p}")
    if sorted(set(quantiles)) != sorted(quantiles) or sorted(quantiles) != quantiles:
        quantiles = sorted(set(quantiles))

    dgp = None
    if ns.command == "simulate":
        try:
            dgp = DgpSpec(
                design=pick(getattr(ns, "design", None), ("dgp", "design"), "y1"),
                sparsity=pick(getattr(ns, "sparsity", None), ("dgp", "sparsity"), "sparse"),
                T=int(pick(getattr(ns, "dgp_T", None), ("dgp", "T"), 100)),
                K=int(pick(getattr(ns, "dgp_K", None), ("dgp", "K"), 100)),
                rho=float(pick(getattr(ns, "rho", None), ("dgp", "rho"), 0.5)),
                error_df=float(pick(None, ("dgp", "error_df"), 3.0)),
                seed=0,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    est_flag = getattr(ns, "estimators", None)
    estimators = (est_flag.split(",") if isinstance(est_flag, str)
                  else pick(None, ("estimators",), ["hsbqr", "hsbqr_bic"]))
    for name in estimators:
        if name not in ESTIMATORS and name != "debug_perfect":
            raise ConfigError(f"unknown estimator {name!r} in --estimators")

    horizons_flag = getattr(ns, "horizons", None)
    if isinstance(horizons_flag, str):
        try:
            horizons = [int(h) for h in horizons_flag.split(",")]
        except ValueError as exc:
            raise ConfigError(f"--horizons must be comma-separated integers: {exc}") from exc
    else:
        horizons = [int(h) for h in pick(None, ("horizons",), [1])]
    if any(h < 1 for h in horizons):
        raise ConfigError("--horizons entries must be >= 1")

    env_threads = os.environ.get("BQR_THREADS")
    default_threads = int(env_threads) if env_threads else (os.cpu_count() or 1)
    threads = int(pick(ns.threads, ("threads",), default_threads))

    return RunConfig(
        command=ns.command,
        data_path=pick(getattr(ns, "data_path", None), ("data",), None),
        quantiles=quantiles,
        prior=prior,
        chain=chain,
        sparsify=sparse,
        dgp=dgp,
        output_dir=pick(ns.output_dir, ("output_dir",), "out"),
        threads=max(1, threads),
        seed=int(pick(ns.seed, ("seed",), 0)),
        add_intercept=bool(pick(getattr(ns, "add_intercept", None),
                                ("add_intercept",), False)),
        from_chains=getattr(ns, "from_chains", None),
        estimators=list(estimators),
        replications=int(pick(getattr(ns, "replications", None), ("replications",), 10)),
        horizons=horizons,
        n_quantiles=int(pick(getattr(ns, "n_quantiles", None), ("n_quantiles",), 19)),
        initial_window=int(pick(getattr(ns, "initial_window", None),
                                ("initial_window",), 50)),
    )


def run(config: RunConfig) -> int:
    """Dispatch the configured pipeline and write artifacts to disk."""
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    with (out / "config.echo").open("w") as fh:
        json.dump(_config_dict(config), fh, indent=2, sort_keys=True)

    if config.command in ("fit", "sparsify"):
        artifacts = _run_fit_or_sparsify(config, out)
    elif config.command == "simulate":
        artifacts = _run_simulate(config, out)
    else:
        artifacts = _run_forecast(config, out)

    summary = {
        "command": config.command,
        "seed": config.seed,
        "version": __version__,
        "numpy": np.__version__,
        "elapsed_sec": time.perf_counter() - started,
        "artifacts": sorted(artifacts),
    }
    with (out / "summary.json").open("w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    return EXIT_OK


def _config_dict(config: RunConfig) -> dict:
    d = dataclasses.asdict(config)
    d["sparsify"]["kappa_grid"] = list(map(float, config.sparsify.kappa_grid))
    return d


def _require_data(config: RunConfig) -> Dataset:
    if not config.data_path:
        raise ConfigError(f"{config.command} requires --data")
    return load_csv(config.data_path, add_intercept=config.add_intercept)


def _chain_jobs(config: RunConfig, data: Dataset):
    jobs = []
    for i, p in enumerate(config.quantiles):
        seed = int(rng_for(config.seed, 10, i).integers(2 ** 63))
        cc = ChainConfig(burn_in=config.chain.burn_in, retained=config.chain.retained,
                         thin=config.chain.thin, seed=seed,
                         beta_sampler=config.chain.beta_sampler)
        jobs.append((p, cc))
    return jobs


def _run_fit_or_sparsify(config: RunConfig, out: Path) -> list[str]:
    data = _require_data(config)
    artifacts = []

    if config.command == "sparsify" and config.from_chains:
        chain_dir = Path(config.from_chains)
        chains = []
        for p in config.quantiles:
            path = chain_dir / f"chain_p{p:g}.csv"
            if not path.exists():
                raise FileNotFoundError(f"no chain file {path} for quantile {p}")
            chains.append(read_chain_csv(path))
    else:
        jobs = _chain_jobs(config, data)

        def fit_one(job):
            p, cc = job
            return run_gibbs(data, quantile_constants(p), config.prior, cc)

        if config.threads > 1:
            with ThreadPoolExecutor(max_workers=config.threads) as pool:
                chains = list(pool.map(fit_one, jobs))
        else:
            chains = [fit_one(j) for j in jobs]
        for chain in chains:
            name = f"chain_p{chain.quantile.p:g}.csv"
            write_chain_csv(out / name, chain)
            artifacts += [name, name.replace(".csv", ".meta.json")]

    if config.command == "sparsify":
        sparsified = [sparsify_chain(ch, data, config.sparsify) for ch in chains]
        qs = [ch.quantile.p for ch in chains]
        header = ["covariate"] + [f"p{p:g}" for p in qs]
        incl_rows = [[j + 1] + [sc.inclusion_freq[j] for sc in sparsified]
                     for j in range(data.K)]
        write_table_csv(out / "inclusion_freq.csv", header, incl_rows)
        mean_rows = [[j + 1] + [float(sc.alpha_mean[j]) for sc in sparsified]
                     for j in range(data.K)]
        write_table_csv(out / "alpha_mean.csv", header, mean_rows)
        size_rows = []
        for p, sc in zip(qs, sparsified):
            for s in range(sc.alpha_draws.shape[0]):
                size_rows.append([p, s, int(sc.model_size[s]), float(sc.kappa_hat[s])])
        write_table_csv(out / "model_size.csv",
                        ["quantile", "draw", "model_size", "kappa_hat"], size_rows)
        artifacts += ["inclusion_freq.csv", "alpha_mean.csv", "model_size.csv"]
    return artifacts


def _run_simulate(config: RunConfig, out: Path) -> list[str]:
    spec = dataclasses.replace(config.dgp, seed=config.seed)
    report = run_monte_carlo(spec, config.estimators, config.quantiles,
                             config.replications, chain=config.chain,
                             sparsify=config.sparsify, threads=config.threads)
    header = ["estimator"] + [f"p{p:g}" for p in config.quantiles]
    for metric in ("bias", "MCC", "hit_rate"):
        rows = [[name] + [report["table"][name][p][metric] for p in config.quantiles]
                for name in config.estimators]
        write_table_csv(out / f"{metric.lower()}.csv", header, rows)
    long_rows = []
    for name in config.estimators:
        for p in config.quantiles:
            cell = report["table"][name][p]
            long_rows.append([name, p, cell["bias"], cell["MCC"], cell["hit_rate"]])
    write_table_csv(out / "results_long.csv",
                    ["estimator", "quantile", "bias", "mcc", "hit_rate"], long_rows)
    if report["failures"]:
        write_table_csv(out / "failures.csv", ["replication", "quantile", "error"],
                        [[f["replication"], f["quantile"], f["error"]]
                         for f in report["failures"]])
        return ["bias.csv", "mcc.csv", "hit_rate.csv", "results_long.csv", "failures.csv"]
    return ["bias.csv", "mcc.csv", "hit_rate.csv", "results_long.csv"]


def _run_forecast(config: RunConfig, out: Path) -> list[str]:
    data = _require_data(config)
    n = config.n_quantiles
    levels = np.round(np.arange(1, n + 1) / (n + 1), 10)
    wcfg = WindowConfig(initial_window=config.initial_window,
                        quantile_levels=levels, chain=config.chain,
                        sparsify=config.sparsify, seed=config.seed,
                        threads=config.threads)
    reports = run_expanding_window(data, config.horizons, config.estimators, wcfg)

    by_key = {(r.estimator, r.horizon): r for r in reports}
    benchmark = config.estimators[0]
    score_rows = []
    for r in reports:
        row = [r.estimator, r.horizon, r.msfe, r.lpds, r.crps, r.qwcrps,
               len(r.records), len(r.failures)]
        bench = by_key.get((benchmark, r.horizon))
        if (r.estimator != benchmark and bench is not None
                and len(r.records) == len(bench.records) and len(r.records) >= 10):
            diffs_crps = np.asarray([a.crps - b.crps
                                     for a, b in zip(r.records, bench.records)])
            diffs_qw = np.asarray([a.qwcrps - b.qwcrps
                                   for a, b in zip(r.records, bench.records)])
            row += [dm_test(diffs_crps, r.horizon)["pvalue"],
                    dm_test(diffs_qw, r.horizon)["pvalue"]]
        else:
            row += ["", ""]
        score_rows.append(row)
    write_table_csv(out / "scores.csv",
                    ["estimator", "horizon", "msfe", "lpds", "crps", "qwcrps",
                     "windows", "failures", "dm_crps_pvalue", "dm_qwcrps_pvalue"],
                    score_rows)

    pit_rows = [[r.estimator, r.horizon, rec.origin_t, rec.pit]
                for r in reports for rec in r.records]
    write_table_csv(out / "pits.csv", ["estimator", "horizon", "origin", "pit"], pit_rows)

    # empirical PIT CDF with 95% Kolmogorov bands around the diagonal
    cdf_rows = []
    for r in reports:
        n = len(r.pits)
        if n == 0:
            continue
        band = 1.3581 / np.sqrt(n)
        grid = np.linspace(0.0, 1.0, 101)
        ecdf = np.searchsorted(np.sort(r.pits), grid, side="right") / n
        for u, e in zip(grid, ecdf):
            cdf_rows.append([r.estimator, r.horizon, float(u), float(e),
                             float(max(u - band, 0.0)), float(min(u + band, 1.0))])
    write_table_csv(out / "pit_cdf.csv",
                    ["estimator", "horizon", "u", "ecdf", "band_lower", "band_upper"],
                    cdf_rows)

    dens_rows = []
    for r in reports:
        for rec in r.records:
            for g, d in zip(rec.grid, rec.density):
                dens_rows.append([r.estimator, r.horizon, rec.origin_t,
                                  float(g), float(d)])
    write_table_csv(out / "densities.csv",
                    ["estimator", "horizon", "origin", "grid", "density"], dens_rows)

    incl_rows = []
    for r in reports:
        for rec in r.records:
            if rec.inclusion is None:
                continue
            for qi, p in enumerate(levels):
                for j in range(rec.inclusion.shape[1]):
                    incl_rows.append([r.estimator, r.horizon, rec.origin_t,
                                      float(p), j + 1, float(rec.inclusion[qi, j])])
    artifacts = ["scores.csv", "pits.csv", "pit_cdf.csv", "densities.csv"]
    if incl_rows:
        write_table_csv(out / "inclusion.csv",
                        ["estimator", "horizon", "origin", "quantile", "covariate",
                         "frequency"], incl_rows)
        artifacts.append("inclusion.csv")
    return artifacts


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        config = parse_config(argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return run(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, FileNotFoundError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
