"""Shrinkage-prior hierarchies and their conditional hyperparameter updates.

Each family produces the diagonal prior variance of the coefficient vector:
lasso uses per-coefficient variances lambda_j, the horseshoe nu^2 * lambda_j^2
with half-Cauchy scales, and the spike-and-slab mixture lambda_j^2 or
c * lambda_j^2 according to the inclusion indicator gamma_j.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, gammainc, gammaincinv

from .rng import inverse_gaussian

SCALE_MIN = 1e-12
SCALE_MAX = 1e12
BETA_SQ_FLOOR = 1e-12

FAMILIES = ("lasso", "horseshoe", "ssvs")


@dataclass(frozen=True)
class PriorConfig:
    family: str = "horseshoe"
    # lasso global-rate gamma prior
    a1: float = 0.1
    b1: float = 0.1
    # ssvs local-scale gamma prior and slab-probability beta prior
    a2: float = 0.1
    b2: float = 0.1
    a3: float = 1.0
    b3: float = 1.0
    c: float = 1e-5
    # error-scale inverse-gamma prior
    sigma_a: float = 0.1
    sigma_b: float = 0.1
    # compatibility switch for the nonstandard slab-probability update
    ssvs_literal_pi0: bool = False

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown prior family {self.family!r}, expected one of {FAMILIES}")
        for name in ("a1", "b1", "a2", "b2", "a3", "b3", "sigma_a", "sigma_b"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"prior hyperparameter {name} must be positive")
        if not 0.0 < self.c < 1.0:
            raise ValueError("spike shrink factor c must lie in (0, 1)")


@dataclass
class PriorState:
    """Current hyperparameter draws; only the fields of the active family are used."""

    lambda_sq: np.ndarray
    nu_sq: float = 1.0
    phi: float = 1.0
    gamma: np.ndarray = field(default_factory=lambda: np.ones(0, dtype=np.int64))
    pi0: float = 0.5

    def copy(self) -> "PriorState":
        return PriorState(
            lambda_sq=self.lambda_sq.copy(),
            nu_sq=self.nu_sq,
            phi=self.phi,
            gamma=self.gamma.copy(),
            pi0=self.pi0,
        )


def init_prior_state(k: int) -> PriorState:
    return PriorState(lambda_sq=np.ones(k), gamma=np.ones(k, dtype=np.int64))


def prior_variance(state: PriorState, cfg: PriorConfig) -> np.ndarray:
    """Diagonal of the K x K prior variance for the active family."""
    if cfg.family == "lasso":
        lam = state.lambda_sq
    elif cfg.family == "horseshoe":
        lam = state.nu_sq * state.lambda_sq
    else:
        lam = np.where(state.gamma == 1, state.lambda_sq, cfg.c * state.lambda_sq)
    return np.clip(lam, SCALE_MIN, SCALE_MAX)


def lasso_update(state: PriorState, beta: np.ndarray, cfg: PriorConfig,
                 rng: np.random.Generator) -> PriorState:
    """One sweep of the lasso hierarchy.

    Draws 1/lambda_j ~ InvGaussian(sqrt(phi / beta_j^2), phi) for each j, then
    the global rate phi ~ Gamma(K + a1, sum(lambda)/2 + b1).
    """
    beta_sq = np.maximum(np.asarray(beta, dtype=float) ** 2, BETA_SQ_FLOOR)
    inv_lam = inverse_gaussian(np.sqrt(state.phi / beta_sq), state.phi, rng)
    lam = np.clip(1.0 / inv_lam, SCALE_MIN, SCALE_MAX)
    shape, rate = _lasso_phi_params(lam, cfg)
    phi = rng.gamma(shape, 1.0 / rate)
    return replace_state(state, lambda_sq=lam, phi=float(phi))


def _lasso_phi_params(lambda_: np.ndarray, cfg: PriorConfig) -> tuple[float, float]:
    return len(lambda_) + cfg.a1, 0.5 * float(np.sum(lambda_)) + cfg.b1


def horseshoe_update(state: PriorState, beta: np.ndarray, rng: np.random.Generator,
                     sigma_independent: bool = True, sigma: float = 1.0) -> PriorState:
    """One slice-sampling sweep over the local scales and then the global scale.

    Targets lambda_j^2 | beta_j, nu^2 under the half-Cauchy prior via the
    eta = 1/lambda^2 reparameterisation: an auxiliary uniform slices the
    1/(1+eta) factor, leaving a truncated Gamma for eta. The global nu^2 is
    updated the same way against all coefficients jointly. When
    ``sigma_independent`` is False the coefficient scale is sigma * lambda^2 * nu^2.
    """
    beta = np.asarray(beta, dtype=float)
    scale = 1.0 if sigma_independent else float(sigma)
    beta_sq = beta * beta / scale

    eta = 1.0 / np.clip(state.lambda_sq, SCALE_MIN, SCALE_MAX)
    rate = beta_sq / (2.0 * state.nu_sq)
    eta = _slice_truncated_gamma(eta, 1.0, rate, rng)
    lam_sq = np.clip(1.0 / eta, SCALE_MIN, SCALE_MAX)

    eta_nu = 1.0 / np.clip(np.asarray([state.nu_sq]), SCALE_MIN, SCALE_MAX)
    rate_nu = np.asarray([0.5 * float(np.sum(beta_sq / lam_sq))])
    eta_nu = _slice_truncated_gamma(eta_nu, 0.5 * (len(beta) + 1.0), rate_nu, rng)
    nu_sq = float(np.clip(1.0 / eta_nu[0], SCALE_MIN, SCALE_MAX))

    return replace_state(state, lambda_sq=lam_sq, nu_sq=nu_sq)


def _slice_truncated_gamma(eta: np.ndarray, shape: float, rate: np.ndarray,
                           rng: np.random.Generator) -> np.ndarray:
    """Slice step for densities prop. to eta^(shape-1) exp(-rate*eta) / (1+eta)."""
    u = rng.uniform(0.0, 1.0 / (1.0 + eta))
    upper = (1.0 - u) / u
    v = rng.uniform(size=eta.shape)
    # rate ~ 0 degenerates to eta^(shape-1) on (0, upper): inverse-cdf directly
    tiny = rate < 1e-300
    safe_rate = np.where(tiny, 1.0, rate)
    if shape == 1.0:
        # truncated exponential in closed form (gammaincinv is ~50x slower)
        cap = -np.expm1(-safe_rate * upper)
        with np.errstate(divide="ignore", invalid="ignore"):
            drawn = -np.log1p(-v * cap) / safe_rate
    else:
        cap = gammainc(shape, safe_rate * upper)
        with np.errstate(divide="ignore", invalid="ignore"):
            drawn = gammaincinv(shape, v * cap) / safe_rate
    power = upper * v ** (1.0 / shape)
    out = np.where(tiny | (cap <= 0.0) | ~np.isfinite(drawn), power, drawn)
    return np.clip(out, SCALE_MIN, SCALE_MAX)


def ssvs_update(state: PriorState, beta: np.ndarray, cfg: PriorConfig,
                rng: np.random.Generator) -> PriorState:
    """One sweep of the spike-and-slab hierarchy.

    lambda_j^2 ~ Gamma(a2 + 1/2, beta_j^2/2 + b2), inclusion gamma_j with the
    log-space density ratio of slab versus spike, and the slab probability pi0
    from its Beta conditional.
    """
    beta = np.asarray(beta, dtype=float)
    lam_sq = rng.gamma(cfg.a2 + 0.5, 1.0 / (0.5 * beta * beta + cfg.b2))
    lam_sq = np.clip(lam_sq, SCALE_MIN, SCALE_MAX)

    prob = _ssvs_inclusion_prob(beta, lam_sq, state.pi0, cfg.c)
    gamma = (rng.uniform(size=beta.shape) < prob).astype(np.int64)

    k = int(np.sum(gamma))
    if cfg.ssvs_literal_pi0:
        a_post = 1.0 + cfg.a3
        b_post = max(k - 1.0 + cfg.b3, 1e-3)
    else:
        a_post = cfg.a3 + k
        b_post = cfg.b3 + len(beta) - k
    pi0 = float(rng.beta(a_post, b_post))
    pi0 = min(max(pi0, 1e-12), 1.0 - 1e-12)

    return replace_state(state, lambda_sq=lam_sq, gamma=gamma, pi0=pi0)


def _ssvs_inclusion_prob(beta: np.ndarray, lam_sq: np.ndarray, pi0: float,
                         c: float) -> np.ndarray:
    """P(gamma_j = 1 | .) computed from log-densities to avoid underflow."""
    beta_sq = beta * beta
    log_slab = -0.5 * np.log(lam_sq) - beta_sq / (2.0 * lam_sq)
    log_spike = -0.5 * np.log(c * lam_sq) - beta_sq / (2.0 * c * lam_sq)
    return expit(np.log(pi0) - np.log1p(-pi0) + log_slab - log_spike)


def replace_state(state: PriorState, **kwargs) -> PriorState:
    new = state.copy()
    for name, value in kwargs.items():
        setattr(new, name, value)
    return new


def update_prior(state: PriorState, beta: np.ndarray, cfg: PriorConfig,
                 rng: np.random.Generator) -> PriorState:
    """Dispatch one hyperparameter sweep for the configured family."""
    if cfg.family == "lasso":
        return lasso_update(state, beta, cfg, rng)
    if cfg.family == "horseshoe":
        return horseshoe_update(state, beta, rng)
    return ssvs_update(state, beta, cfg, rng)
