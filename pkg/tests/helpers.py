"""Shared helpers for the test suite."""

import numpy as np


def draw_keys(rng, n, hi=2**63):
    """n distinct uniform 64-bit keys."""
    if n == 0:
        return np.zeros(0, dtype=np.uint64)
    out = np.unique(rng.integers(0, hi, size=n + 64, dtype=np.uint64))
    assert out.size >= n
    return out[:n]


def split_universe(rng, total, positives):
    """Disjoint (positive, negative) key arrays covering a universe."""
    u = draw_keys(rng, total)
    pos_idx = rng.choice(total, size=positives, replace=False)
    mask = np.zeros(total, dtype=bool)
    mask[pos_idx] = True
    return u[mask], u[~mask]
