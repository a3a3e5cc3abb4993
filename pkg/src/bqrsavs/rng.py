"""Random-variate helpers shared by the samplers."""

from __future__ import annotations

import numpy as np


def rng_for(seed: int, *key: int) -> np.random.Generator:
    """Generator keyed by (seed, task identity).

    Streams depend only on the key, never on scheduling order, so concurrent
    runs reproduce sequential ones exactly.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(ss)


def inverse_gaussian(mu, lam, rng: np.random.Generator):
    """Inverse-Gaussian draws with location ``mu`` and rate ``lam``.

    Michael-Schucany-Haas transformation: one chi-square root of the defining
    quadratic plus a size-biased coin flip. Exact and constant-time.
    """
    mu = np.asarray(mu, dtype=float)
    lam = np.asarray(lam, dtype=float)
    shape = np.broadcast_shapes(mu.shape, lam.shape)
    nu = rng.standard_normal(shape)
    w = nu * nu
    ratio = mu / lam
    x = mu * (1.0 + 0.5 * ratio * w - 0.5 * np.sqrt(4.0 * ratio * w + (ratio * w) ** 2))
    # roundoff can push the smaller root slightly negative
    x = np.maximum(x, 1e-300)
    u = rng.uniform(size=shape)
    with np.errstate(over="ignore"):
        out = np.where(u <= mu / (mu + x), x, np.minimum(mu * mu / x, 1e300))
    return out if shape else float(out)


def inverse_gamma(shape_a, rate_b, rng: np.random.Generator, size=None):
    """Inverse-Gamma draws with shape ``shape_a`` and rate ``rate_b``."""
    g = rng.gamma(shape_a, 1.0 / np.asarray(rate_b, dtype=float), size=size)
    return 1.0 / g
