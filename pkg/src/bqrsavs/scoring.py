"""Density- and quantile-forecast scoring rules, PITs, and the DM test."""

from __future__ import annotations

import numpy as np
from scipy.special import ndtr

LOG_DENSITY_FLOOR = np.log(1e-300)

QUANTILE_GRID_19 = np.round(np.arange(1, 20) * 0.05, 2)


def score_lpds(grid: np.ndarray, density: np.ndarray, realized: float) -> float:
    """Log predictive density at the realisation, floored against underflow."""
    val = float(np.interp(realized, grid, density, left=0.0, right=0.0))
    if val <= 0.0:
        return LOG_DENSITY_FLOOR
    return float(np.log(val))


def score_crps(draws: np.ndarray, realized: float, rng: np.random.Generator) -> float:
    """CRPS from paired independent resamples: E|y - A| - 0.5 E|A - B|."""
    draws = np.asarray(draws, dtype=float).reshape(-1)
    if draws.size < 2:
        raise ValueError("need at least two predictive draws")
    n = draws.size
    a = draws[rng.integers(0, n, size=n)]
    b = draws[rng.integers(0, n, size=n)]
    return float(np.mean(np.abs(realized - a)) - 0.5 * np.mean(np.abs(a - b)))


def crps_from_density(grid: np.ndarray, density: np.ndarray, realized: float) -> float:
    """CRPS as the integrated squared difference between the CDF and the step."""
    cdf = cumulative_from_density(grid, density)
    step = (grid >= realized).astype(float)
    return float(np.trapezoid((cdf - step) ** 2, grid))


def cumulative_from_density(grid: np.ndarray, density: np.ndarray) -> np.ndarray:
    dx = np.diff(grid)
    inc = 0.5 * (density[1:] + density[:-1]) * dx
    cdf = np.concatenate([[0.0], np.cumsum(inc)])
    # guard against roundoff overshoot
    return np.clip(cdf / max(cdf[-1], 1e-300), 0.0, 1.0)


def score_qs(yhat_p: float, realized: float, p: float) -> float:
    """Quantile (pinball) score (y - yhat)(p - 1{y - yhat < 0})."""
    diff = realized - yhat_p
    return float((p - (diff < 0.0)) * diff)


def score_qwcrps(qs_by_p: dict[float, float] | np.ndarray,
                 levels: np.ndarray = QUANTILE_GRID_19) -> float:
    """Left-tail weighted Riemann sum of quantile scores.

    sum_p (1-p)^2 QS_p * dp over an equidistant level grid; the default grid
    is the 19 levels 0.05, ..., 0.95 with dp = 0.05.
    """
    levels = np.asarray(levels, dtype=float)
    if levels.size < 2:
        raise ValueError("need an equidistant grid of at least two levels")
    if isinstance(qs_by_p, dict):
        qs = np.asarray([qs_by_p[p] for p in levels])
    else:
        qs = np.asarray(qs_by_p, dtype=float)
        if qs.shape != levels.shape:
            raise ValueError("quantile scores do not align with the level grid")
    weights = (1.0 - levels) ** 2
    dp = float(levels[1] - levels[0])
    return float(np.sum(weights * qs) * dp)


def pit(draws: np.ndarray, realized: float) -> float:
    """Empirical predictive CDF evaluated at the realisation."""
    draws = np.asarray(draws, dtype=float).reshape(-1)
    if draws.size == 0:
        raise ValueError("need predictive draws")
    return float(np.mean(draws <= realized))


def pit_from_density(grid: np.ndarray, density: np.ndarray, realized: float) -> float:
    cdf = cumulative_from_density(grid, density)
    return float(np.interp(realized, grid, cdf, left=0.0, right=1.0))


def dm_test(score_diffs: np.ndarray, h: int = 1) -> dict:
    """Diebold-Mariano test with Bartlett HAC variance at lag h-1.

    Returns the statistic and the two-sided normal p-value; refuses fewer than
    ten observations.
    """
    d = np.asarray(score_diffs, dtype=float).reshape(-1)
    n = d.size
    if n < 10:
        raise ValueError(f"DM test needs at least 10 score differences, got {n}")
    centred = d - d.mean()
    gamma0 = float(centred @ centred) / n
    var = gamma0
    for lag in range(1, max(h, 1)):
        cov = float(centred[:-lag] @ centred[lag:]) / n
        var += 2.0 * (1.0 - lag / h) * cov
    if var <= 0.0:
        var = gamma0
    if var == 0.0:
        return {"stat": 0.0, "pvalue": 1.0}
    stat = d.mean() / np.sqrt(var / n)
    pvalue = 2.0 * (1.0 - ndtr(abs(stat)))
    return {"stat": float(stat), "pvalue": float(pvalue)}
