"""Synthetic data designs and variable-selection metrics for Monte Carlo study.

Four designs share the random-coefficient model
y_t = b0 + x_c' b_c + x_q' b_q + (x' theta) u_t: two homoskedastic baselines
(Gaussian and t(3) errors) where only the intercept has a quantile profile,
and two heteroskedastic ones where a single covariate is active only in the
tails (with either a proportional or a flat +/-1/2 tail profile).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import stats

from .data import Dataset
from .gibbs import ChainConfig, PosteriorChain, run_gibbs
from .priors import PriorConfig
from .quantile import quantile_constants
from .rng import rng_for
from .sparsify import SparsifyConfig, sparsify_chain

DESIGNS = ("y1", "y2", "y3", "y4")
SPARSITIES = ("sparse", "block")
TAIL_LO, TAIL_HI = 0.15, 0.85


@dataclass(frozen=True)
class DgpSpec:
    design: str = "y1"
    sparsity: str = "sparse"
    T: int = 100
    K: int = 100
    rho: float = 0.5
    error_df: float = 3.0
    seed: int = 0

    def __post_init__(self):
        if self.design not in DESIGNS:
            raise ValueError(f"unknown design {self.design!r}")
        if self.sparsity not in SPARSITIES:
            raise ValueError(f"unknown sparsity {self.sparsity!r}")
        if not 0.0 <= self.rho < 1.0:
            raise ValueError("rho must lie in [0, 1)")
        if self.sparsity == "block" and self.K % 5 != 0:
            raise ValueError("block pattern needs K divisible by 5")
        if self.K < 5:
            raise ValueError("need K >= 5")


@dataclass
class TrueQuantileCoeffs:
    """True coefficient profiles beta(p), intercept first."""

    base: np.ndarray  # length K+1 centre values
    intercept_ppf: Callable[[float], float]
    qvar_index: int | None = None  # covariate index (1-based into base) with a profile
    qvar_profile: Callable[[float], float] | None = None

    def beta_of_p(self, p: float) -> np.ndarray:
        out = self.base.copy()
        out[0] += self.intercept_ppf(p)
        if self.qvar_index is not None:
            out[self.qvar_index] += self.qvar_profile(p)
        return out

    def nonzero_covariates(self, p: float) -> np.ndarray:
        """Boolean mask over the K covariates (intercept excluded)."""
        return self.beta_of_p(p)[1:] != 0.0


def _base_coeffs(spec: DgpSpec) -> np.ndarray:
    """Centre coefficients (intercept first), padded with zeros to K+1."""
    k = spec.K
    out = np.zeros(k + 1)
    if spec.design in ("y1", "y2"):
        if spec.sparsity == "sparse":
            out[0] = 1.0
            out[1:6] = [1.5, 1.0, 0.5, 0.33, 0.25]
        else:
            fifth = k // 5
            out[0] = 1.0
            out[1:1 + fifth] = 0.5
            out[1 + 3 * fifth:1 + 4 * fifth] = 0.5
    else:
        # quantile-specific designs: intercept 0, covariate 1 centred at 0
        if spec.sparsity == "sparse":
            out[2:5] = [0.5, 0.33, 0.25]
        else:
            fifth = k // 5
            out[2:2 + fifth] = 0.5
            out[2 + 3 * fifth:2 + 4 * fifth] = 0.5
    return out


def generate_dgp(spec: DgpSpec, rng: np.random.Generator | None = None
                 ) -> tuple[Dataset, TrueQuantileCoeffs]:
    """Simulate one dataset and its true quantile-coefficient profiles.

    Covariate rows are Gaussian with Toeplitz covariance rho^|i-j|, generated
    column-wise as an AR(1) sweep (exact for this covariance).
    """
    if rng is None:
        rng = rng_for(spec.seed)
    t, k = spec.T, spec.K

    x = np.empty((t, k))
    innov = rng.standard_normal((t, k))
    x[:, 0] = innov[:, 0]
    scale = np.sqrt(1.0 - spec.rho ** 2)
    for j in range(1, k):
        x[:, j] = spec.rho * x[:, j - 1] + scale * innov[:, j]

    if spec.design == "y2":
        u = rng.standard_t(spec.error_df, size=t)
        err_ppf = lambda p: float(stats.t.ppf(p, spec.error_df))  # noqa: E731
    else:
        u = rng.standard_normal(t)
        err_ppf = lambda p: float(stats.norm.ppf(p))  # noqa: E731

    base = _base_coeffs(spec)
    y = base[0] + x @ base[1:] + u

    truth = TrueQuantileCoeffs(base=base, intercept_ppf=err_ppf)
    if spec.design in ("y3", "y4"):
        lo, hi = err_ppf(TAIL_LO), err_ppf(TAIL_HI)
        in_tail = (u <= lo) | (u >= hi)
        if spec.design == "y3":
            y = y + x[:, 0] * u * in_tail
            truth.qvar_profile = lambda p: err_ppf(p) if (p <= TAIL_LO or p >= TAIL_HI) else 0.0
        else:
            step = -0.5 * (u <= lo) + 0.5 * (u >= hi)
            y = y + x[:, 0] * step
            truth.qvar_profile = (
                lambda p: -0.5 if p <= TAIL_LO else (0.5 if p >= TAIL_HI else 0.0)
            )
        truth.qvar_index = 1

    design = Dataset(y, np.column_stack([np.ones(t), x]), has_intercept=True)
    return design, truth


def coefficient_bias(chain_means: np.ndarray, truth: TrueQuantileCoeffs, p: float) -> float:
    """Mean over replications of the Euclidean deviation from beta(p)."""
    est = np.atleast_2d(np.asarray(chain_means, dtype=float))
    target = truth.beta_of_p(p)
    if est.shape[1] != target.shape[0]:
        raise ValueError("coefficient vectors do not match the truth dimension")
    return float(np.mean(np.linalg.norm(est - target[None, :], axis=1)))


def confusion_metrics(selected: np.ndarray, truth_nonzero: np.ndarray) -> dict:
    """MCC, hit rate and the confusion counts; MCC is 0 on degenerate margins."""
    sel = np.asarray(selected, dtype=bool)
    tru = np.asarray(truth_nonzero, dtype=bool)
    if sel.shape != tru.shape:
        raise ValueError("selection and truth masks must align")
    tp = int(np.sum(sel & tru))
    fp = int(np.sum(sel & ~tru))
    fn = int(np.sum(~sel & tru))
    tn = int(np.sum(~sel & ~tru))
    denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    mcc = (tp * tn - fp * fn) / np.sqrt(denom) if denom > 0 else 0.0
    hit = tp / (tp + fn) if (tp + fn) > 0 else 0.0
    return {"MCC": float(mcc), "hit_rate": float(hit),
            "TP": tp, "FP": fp, "TN": tn, "FN": fn}


# estimator registry: name -> (prior family or None for debug, sparsify mode)
ESTIMATORS = {
    "hsbqr": ("horseshoe", None),
    "hsbqr_savs": ("horseshoe", "savs"),
    "hsbqr_bic": ("horseshoe", "qbic"),
    "lbqr": ("lasso", None),
    "lbqr_savs": ("lasso", "savs"),
    "lbqr_bic": ("lasso", "qbic"),
    "ssvsbqr": ("ssvs", None),
    "truth": (None, None),  # debug oracle returning beta(p)
}


def _sparsify_cfg(mode: str, base: SparsifyConfig) -> SparsifyConfig:
    if mode == "savs":
        return SparsifyConfig(kappa_mode="fixed", kappa=2.0,
                              use_ald_correction=base.use_ald_correction,
                              per_draw=base.per_draw,
                              penalty_constant=base.penalty_constant)
    return SparsifyConfig(kappa_mode="qbic", kappa_grid=base.kappa_grid,
                          use_ald_correction=base.use_ald_correction,
                          per_draw=base.per_draw,
                          penalty_constant=base.penalty_constant)


def evaluate_chain(name: str, chain: PosteriorChain, data: Dataset,
                   sparsify: SparsifyConfig) -> dict:
    """Posterior-mean coefficients plus, where defined, the selected set.

    Selection masks come from per-draw inclusion frequencies at the 1/2
    threshold (median probability model); unsparsified continuous priors have
    no selection.
    """
    family, mode = ESTIMATORS[name]
    out = {"name": name}
    if mode is None:
        out["beta_hat"] = chain.beta_draws.mean(axis=0)
        if family == "ssvs":
            incl = chain_gamma_frequency(chain)
            out["selected"] = incl >= 0.5
            out["inclusion_freq"] = incl
        else:
            out["selected"] = None
    else:
        sc = sparsify_chain(chain, data, _sparsify_cfg(mode, sparsify))
        out["beta_hat"] = sc.alpha_mean
        out["selected"] = sc.inclusion_freq >= 0.5
        out["inclusion_freq"] = sc.inclusion_freq
        out["model_size"] = sc.model_size
        out["kappa_hat"] = sc.kappa_hat
    return out


def chain_gamma_frequency(chain: PosteriorChain) -> np.ndarray:
    incl = chain.meta.get("gamma_freq")
    if incl is None:
        raise ValueError("chain has no inclusion indicators (not an SSVS chain)")
    return incl


def run_monte_carlo(spec: DgpSpec, estimators: list[str], quantiles: list[float],
                    replications: int, chain: ChainConfig | None = None,
                    sparsify: SparsifyConfig | None = None,
                    threads: int = 1) -> dict:
    """Bias/MCC/hit-rate table over replications; deterministic given the seed.

    Chains are shared across estimator variants of the same prior family.
    Replication failures are recorded and excluded rather than fatal.
    """
    if replications < 1:
        raise ValueError("need at least one replication")
    chain = chain or ChainConfig()
    sparsify = sparsify or SparsifyConfig()
    for name in estimators:
        if name not in ESTIMATORS:
            raise ValueError(f"unknown estimator {name!r}")
    families = sorted({ESTIMATORS[n][0] for n in estimators if ESTIMATORS[n][0]})

    tasks = [(rep, p) for rep in range(replications) for p in quantiles]

    def one_task(rep: int, p: float) -> dict:
        data, truth = generate_dgp(spec, rng_for(spec.seed, 1, rep))
        q = quantile_constants(p)
        p_idx = quantiles.index(p)
        chains = {}
        for fam_i, fam in enumerate(families):
            cc = ChainConfig(burn_in=chain.burn_in, retained=chain.retained,
                             thin=chain.thin, beta_sampler=chain.beta_sampler,
                             seed=int(rng_for(spec.seed, 2, rep, fam_i,
                                              p_idx).integers(2 ** 63)))
            chains[fam] = run_gibbs(data, q, PriorConfig(family=fam), cc)
        results = {}
        truth_mask = truth.nonzero_covariates(p)
        target = truth.beta_of_p(p)
        for name in estimators:
            fam, _ = ESTIMATORS[name]
            if fam is None:  # debug truth injector
                beta_hat = target.copy()
                cov_selected = truth_mask.copy()
            else:
                ev = evaluate_chain(name, chains[fam], data, sparsify)
                beta_hat = ev["beta_hat"]
                cov_selected = None if ev["selected"] is None else ev["selected"][1:]
            entry = {"deviation": float(np.linalg.norm(beta_hat - target))}
            if cov_selected is not None:
                entry.update(confusion_metrics(cov_selected, truth_mask))
            results[name] = entry
        return results

    from concurrent.futures import ThreadPoolExecutor

    per_task: dict[tuple[int, float], dict] = {}
    failures = []
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futs = {(rep, p): pool.submit(one_task, rep, p) for rep, p in tasks}
        for key, fut in futs.items():
            try:
                per_task[key] = fut.result()
            except Exception as exc:  # noqa: BLE001
                failures.append({"replication": key[0], "quantile": key[1],
                                 "error": str(exc)})
    else:
        for rep, p in tasks:
            try:
                per_task[(rep, p)] = one_task(rep, p)
            except Exception as exc:  # noqa: BLE001
                failures.append({"replication": rep, "quantile": p, "error": str(exc)})

    table: dict[str, dict[float, dict]] = {name: {} for name in estimators}
    for name in estimators:
        for p in quantiles:
            rows = [per_task[(rep, p)][name] for rep in range(replications)
                    if (rep, p) in per_task]
            cell = {"bias": float(np.mean([r["deviation"] for r in rows]))
                    if rows else np.nan}
            if rows and "MCC" in rows[0]:
                cell["MCC"] = float(np.mean([r["MCC"] for r in rows]))
                cell["hit_rate"] = float(np.mean([r["hit_rate"] for r in rows]))
            else:
                cell["MCC"] = np.nan
                cell["hit_rate"] = np.nan
            table[name][p] = cell
    return {"spec": spec, "quantiles": list(quantiles), "estimators": list(estimators),
            "replications": replications, "table": table, "failures": failures,
            "per_task": per_task}
