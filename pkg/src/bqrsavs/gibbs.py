"""Gibbs sampler for quantile regression under the ALD working likelihood.

The cycle draws the latent mixture vector Z, the ALD scale sigma, the
coefficient vector beta (either through a K x K Cholesky or the T x T
data-augmentation sampler for K >> T), and finally the prior hyperparameters.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from .data import Dataset
from .priors import PriorConfig, PriorState, init_prior_state, prior_variance, update_prior
from .quantile import QuantileLevel
from .rng import inverse_gaussian, rng_for

RESID_FLOOR = 1e-10
Z_MIN, Z_MAX = 1e-12, 1e12


class NumericalError(RuntimeError):
    """Raised when a sampler step fails; carries the iteration index."""


@dataclass(frozen=True)
class ChainConfig:
    burn_in: int = 5000
    retained: int = 5000
    thin: int = 1
    seed: int = 0
    beta_sampler: str = "auto"  # auto | direct | fast

    def __post_init__(self):
        if self.burn_in < 0 or self.retained < 1 or self.thin < 1:
            raise ValueError("need burn_in >= 0, retained >= 1, thin >= 1")
        if self.beta_sampler not in ("auto", "direct", "fast"):
            raise ValueError(f"unknown beta_sampler {self.beta_sampler!r}")


@dataclass
class GibbsState:
    beta: np.ndarray
    sigma: float
    z: np.ndarray
    prior: PriorState


@dataclass
class PosteriorParams:
    """Assembled conditional-posterior parameters for one state (test surface)."""

    beta_mean: np.ndarray
    beta_cov_chol: np.ndarray  # lower Cholesky factor of the posterior covariance
    a_bar: float
    b_bar: float
    c_bar: np.ndarray
    d_bar: float


@dataclass
class PosteriorChain:
    beta_draws: np.ndarray  # S x K
    sigma_draws: np.ndarray  # S
    model_size_draws: np.ndarray | None
    quantile: QuantileLevel
    meta: dict = field(default_factory=dict)

    @property
    def S(self) -> int:
        return self.beta_draws.shape[0]

    @property
    def K(self) -> int:
        return self.beta_draws.shape[1]


def z_params(data: Dataset, beta: np.ndarray, sigma: float,
             q: QuantileLevel) -> tuple[np.ndarray, float]:
    """Location vector c_bar and rate d_bar of the latent-Z conditional."""
    root = np.sqrt(q.xi ** 2 + 2.0 * q.tau_sq)
    resid = np.abs(data.y - data.X @ beta)
    c_bar = root / np.maximum(resid, RESID_FLOOR)
    d_bar = (q.xi ** 2 + 2.0 * q.tau_sq) / (sigma * q.tau_sq)
    return c_bar, d_bar


def draw_z(state: GibbsState, data: Dataset, q: QuantileLevel,
           rng: np.random.Generator) -> np.ndarray:
    """Draw the T latent mixture variables as reciprocals of inverse Gaussians."""
    if state.sigma <= 0.0:
        raise ValueError("sigma must be positive")
    c_bar, d_bar = z_params(data, state.beta, state.sigma, q)
    v = inverse_gaussian(c_bar, d_bar, rng)
    return np.clip(1.0 / v, Z_MIN, Z_MAX)


def sigma_params(data: Dataset, beta: np.ndarray, z: np.ndarray, q: QuantileLevel,
                 cfg: PriorConfig) -> tuple[float, float]:
    """Shape a_bar = a + 3T/2 and rate b_bar of the scale conditional."""
    a_bar = cfg.sigma_a + 1.5 * data.T
    resid = data.y - data.X @ beta - q.xi * z
    b_bar = cfg.sigma_b + float(np.sum(resid ** 2 / (2.0 * z * q.tau_sq)) + np.sum(z))
    return a_bar, b_bar


def draw_sigma(state: GibbsState, data: Dataset, q: QuantileLevel, cfg: PriorConfig,
               rng: np.random.Generator) -> float:
    a_bar, b_bar = sigma_params(data, state.beta, state.z, q, cfg)
    return float(b_bar / rng.gamma(a_bar))


def _obs_weights(z: np.ndarray, sigma: float, q: QuantileLevel) -> np.ndarray:
    """Diagonal of Sigma^{-1}-free observation precision 1/(tau^2 z_t sigma)."""
    return 1.0 / (q.tau_sq * z * sigma)


def beta_posterior_direct(data: Dataset, state: GibbsState, lam_star: np.ndarray,
                          q: QuantileLevel) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and upper Cholesky of the precision (direct route)."""
    w = _obs_weights(state.z, state.sigma, q)
    xw = data.X * w[:, None]
    prec = data.X.T @ xw
    prec.flat[:: data.K + 1] += 1.0 / lam_star
    rhs = xw.T @ (data.y - q.xi * state.z)
    chol = _chol_with_jitter(prec)
    mean = cho_solve((chol, False), rhs, check_finite=False)
    return mean, chol


def draw_beta_direct(data: Dataset, state: GibbsState, lam_star: np.ndarray,
                     q: QuantileLevel, rng: np.random.Generator) -> np.ndarray:
    """Draw beta from its Gaussian conditional via a K x K Cholesky."""
    mean, chol = beta_posterior_direct(data, state, lam_star, q)
    eps = rng.standard_normal(data.K)
    return mean + solve_triangular(chol, eps, lower=False, check_finite=False)


def draw_beta_fast(data: Dataset, state: GibbsState, lam_star: np.ndarray,
                   q: QuantileLevel, rng: np.random.Generator) -> np.ndarray:
    """Draw beta through T x T data augmentation; exact for any diagonal prior."""
    u = np.sqrt(lam_star) * rng.standard_normal(data.K)
    delta = rng.standard_normal(data.T)
    return _fast_draw_core(data, state, lam_star, q, u, delta)


def _fast_draw_core(data: Dataset, state: GibbsState, lam_star: np.ndarray,
                    q: QuantileLevel, u: np.ndarray, delta: np.ndarray) -> np.ndarray:
    w = _obs_weights(state.z, state.sigma, q)
    sw = np.sqrt(w)
    phi = data.X * sw[:, None]
    alpha = sw * (data.y - q.xi * state.z)
    phid = phi * lam_star[None, :]
    m = phid @ phi.T
    m.flat[:: data.T + 1] += 1.0
    noise = phi @ u + delta
    chol = _chol_with_jitter(m)
    sol = cho_solve((chol, False), alpha - noise, check_finite=False)
    return u + phid.T @ sol


def _chol_with_jitter(a: np.ndarray) -> np.ndarray:
    # cho_factor leaves junk in the unused triangle; zero it so the factor is
    # a genuine upper-triangular matrix for downstream algebra
    try:
        return np.triu(cho_factor(a, lower=False, check_finite=False)[0])
    except np.linalg.LinAlgError:
        pass
    jitter = 1e-8 * np.trace(a) / a.shape[0]
    bumped = a + jitter * np.eye(a.shape[0])
    return np.triu(cho_factor(bumped, lower=False, check_finite=False)[0])


def conditional_params(data: Dataset, state: GibbsState, q: QuantileLevel,
                       cfg: PriorConfig) -> PosteriorParams:
    """All conditional-posterior parameters at the current state."""
    lam_star = prior_variance(state.prior, cfg)
    mean, chol = beta_posterior_direct(data, state, lam_star, q)
    a_bar, b_bar = sigma_params(data, state.beta, state.z, q, cfg)
    c_bar, d_bar = z_params(data, state.beta, state.sigma, q)
    cov_chol = solve_triangular(chol, np.eye(data.K), lower=False, check_finite=False)
    return PosteriorParams(mean, cov_chol, a_bar, b_bar, c_bar, d_bar)


def run_gibbs(data: Dataset, q: QuantileLevel, prior: PriorConfig,
              cc: ChainConfig) -> PosteriorChain:
    """Run the full Gibbs cycle and return the retained draws.

    Deterministic given the seed; ``beta_sampler='auto'`` switches to the
    T x T augmentation sampler when K > T.
    """
    if data.T < 2:
        raise ValueError("need at least two observations")
    use_fast = cc.beta_sampler == "fast" or (cc.beta_sampler == "auto" and data.K > data.T)
    draw_beta = draw_beta_fast if use_fast else draw_beta_direct

    rng = rng_for(cc.seed)
    state = GibbsState(
        beta=np.zeros(data.K),
        sigma=1.0,
        z=np.ones(data.T),
        prior=init_prior_state(data.K),
    )

    total = cc.burn_in + cc.retained * cc.thin
    beta_draws = np.empty((cc.retained, data.K))
    sigma_draws = np.empty(cc.retained)
    is_ssvs = prior.family == "ssvs"
    size_draws = np.empty(cc.retained, dtype=np.int64) if is_ssvs else None
    gamma_sum = np.zeros(data.K) if is_ssvs else None

    t0 = time.perf_counter()
    kept = 0
    for it in range(total):
        try:
            state.z = draw_z(state, data, q, rng)
            state.sigma = draw_sigma(state, data, q, prior, rng)
            lam_star = prior_variance(state.prior, prior)
            state.beta = draw_beta(data, state, lam_star, q, rng)
            state.prior = update_prior(state.prior, state.beta, prior, rng)
        except Exception as exc:  # noqa: BLE001 - annotate and rethrow
            raise NumericalError(f"sampler failed at iteration {it}: {exc}") from exc
        j = it - cc.burn_in
        if j >= 0 and j % cc.thin == 0:
            beta_draws[kept] = state.beta
            sigma_draws[kept] = state.sigma
            if is_ssvs:
                size_draws[kept] = int(np.sum(state.prior.gamma))
                gamma_sum += state.prior.gamma
            kept += 1
    elapsed = time.perf_counter() - t0

    meta = {
        "seed": cc.seed,
        "burn_in": cc.burn_in,
        "retained": cc.retained,
        "thin": cc.thin,
        "beta_sampler": "fast" if use_fast else "direct",
        "prior": prior.family,
        "quantile": q.p,
        "elapsed_sec": elapsed,
        "diagnostics": {
            "sigma_ess": effective_sample_size(sigma_draws),
            "sigma_geweke_z": geweke_z(sigma_draws),
        },
    }
    if is_ssvs:
        meta["gamma_freq"] = gamma_sum / cc.retained
    return PosteriorChain(beta_draws, sigma_draws, size_draws, q, meta)


def effective_sample_size(draws: np.ndarray, max_lag: int = 200) -> float:
    """Initial-positive-sequence ESS estimate; reported only, never a gate."""
    x = np.asarray(draws, dtype=float)
    n = len(x)
    if n < 10 or np.var(x) == 0.0:
        return float(n)
    x = x - x.mean()
    var = float(x @ x) / n
    s = 0.0
    for lag in range(1, min(max_lag, n - 1)):
        acf = float(x[:-lag] @ x[lag:]) / ((n - lag) * var)
        if acf <= 0.0:
            break
        s += acf
    return float(n / (1.0 + 2.0 * s))


def geweke_z(draws: np.ndarray, first: float = 0.1, last: float = 0.5) -> float:
    x = np.asarray(draws, dtype=float)
    n = len(x)
    if n < 20:
        return 0.0
    a = x[: int(first * n)]
    b = x[-int(last * n):]
    denom = np.sqrt(np.var(a) / len(a) + np.var(b) / len(b))
    if denom == 0.0:
        return 0.0
    return float((a.mean() - b.mean()) / denom)
