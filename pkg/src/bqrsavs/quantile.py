"""Quantile-level constants, tick loss, and asymmetric-Laplace likelihood."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class QuantileLevel:
    """A quantile p with its asymmetric-Laplace mixture constants.

    xi = (1 - 2p) / (p(1-p)) and tau_sq = 2 / (p(1-p)) are the deterministic
    constants of the exponential-normal mixture representation of ALD errors.
    """

    p: float
    xi: float
    tau_sq: float


def quantile_constants(p: float) -> QuantileLevel:
    """Build the QuantileLevel for probability ``p`` in (0, 1)."""
    p = float(p)
    if not 0.0 < p < 1.0:
        raise ValueError(f"quantile level must lie in (0, 1), got {p}")
    pq = p * (1.0 - p)
    return QuantileLevel(p=p, xi=(1.0 - 2.0 * p) / pq, tau_sq=2.0 / pq)


def tick_loss(u, p: float):
    """Tick (check) loss [p - 1{u<0}] * u; nonnegative for all residuals."""
    u = np.asarray(u, dtype=float)
    out = (p - (u < 0.0)) * u
    return float(out) if out.ndim == 0 else out


def ald_log_likelihood(data, beta: np.ndarray, sigma: float, q: QuantileLevel) -> float:
    """Log working likelihood T*log(p(1-p)) - T*log(sigma) - sum(rho_p(resid))/sigma."""
    if sigma <= 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    resid = data.y - data.X @ np.asarray(beta, dtype=float)
    loss = float(np.sum(tick_loss(resid, q.p)))
    t = data.T
    return t * np.log(q.p * (1.0 - q.p)) - t * np.log(sigma) - loss / sigma
