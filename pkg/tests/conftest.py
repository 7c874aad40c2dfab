import itertools

import numpy as np
import pytest

from twospecies.quantile import StatePair


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def brute_isotonic(y):
    """Monotone least squares by enumerating every split into contiguous blocks."""
    y = np.asarray(y, dtype=float)
    n = y.size
    best, best_cost = None, np.inf
    for mask in itertools.product((0, 1), repeat=n - 1):
        cuts = [0] + [i + 1 for i, c in enumerate(mask) if c] + [n]
        means = [y[a:b].mean() for a, b in zip(cuts[:-1], cuts[1:])]
        if any(m1 > m2 for m1, m2 in zip(means[:-1], means[1:])):
            continue
        fit = np.concatenate([np.full(b - a, m) for a, b, m in zip(cuts[:-1], cuts[1:], means)])
        cost = float(np.sum((fit - y) ** 2))
        if cost < best_cost:
            best, best_cost = fit, cost
    return best


def random_state(rng, n, ties=False, spread=1.0):
    """Random cone state; with ``ties`` some values are snapped to a coarse lattice."""
    x = rng.normal(scale=spread, size=n)
    y = rng.normal(scale=spread, size=n)
    if ties:
        x = np.round(x * 2) / 2
        y = np.round(y * 2) / 2
    return StatePair.from_arrays(np.sort(x), np.sort(y))
