"""Random gradient matrices: log-uniform radius, uniform direction."""
import numpy as np

DEFAULT_RADIUS_RANGE = (1e-4, 1e4)


def substream(seed, *keys):
    """Deterministic generator for the stream identified by ``(seed, *keys)``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), *map(int, keys)]))


def directions(rng, count, N, n):
    v = rng.standard_normal((count, N, n))
    r = np.sqrt(np.sum(v * v, axis=(1, 2)))
    return v / r[:, None, None]


def log_uniform(rng, count, lo, hi):
    return np.exp(rng.uniform(np.log(lo), np.log(hi), count))


def matrices(rng, count, N, n, radius_range=DEFAULT_RADIUS_RANGE):
    r = log_uniform(rng, count, *radius_range)
    return r[:, None, None] * directions(rng, count, N, n)


def pairs(rng, count, N, n, radius_range=DEFAULT_RADIUS_RANGE, near_fraction=0.2):
    """Pairs ``(xi0, xi1)``; a fraction are near-coincident.

    Near pairs have ``|xi1 - xi0| <= 1e-6 max(|xi0|, 1)`` with a
    log-uniform separation over three decades below that cap.
    """
    x0 = matrices(rng, count, N, n, radius_range)
    x1 = matrices(rng, count, N, n, radius_range)
    near = rng.uniform(size=count) < near_fraction
    k = int(near.sum())
    if k:
        cap = 1e-6 * np.maximum(np.sqrt(np.sum(x0[near] ** 2, axis=(1, 2))), 1.0)
        sep = cap * log_uniform(rng, k, 1e-3, 1.0)
        x1[near] = x0[near] + sep[:, None, None] * directions(rng, k, N, n)
    return x0, x1
