import numpy as np
import pytest

from supremix.core import LabelRange, LabeledBatch, group_by_label
from supremix.mixgen import MixNegConfig, MixPosConfig, build_contrast_sets
from supremix.rng import substream

UNIT_RANGE = LabelRange(0.0, 1.0)


def random_batch(seed, n=12, d=6, n_labels=5):
    """Unit-norm batch with labels drawn from an equispaced grid,
    guaranteed to contain at least two distinct labels."""
    rng = substream(seed, 99)
    raw = rng.normal(size=(n, d))
    grid = np.linspace(0.0, 1.0, n_labels)
    labels = grid[rng.integers(n_labels, size=n)]
    while np.unique(labels).size < 2:
        labels = grid[rng.integers(n_labels, size=n)]
    return LabeledBatch.from_raw(raw, labels)


def full_sets(batch, seed=0, gamma=2, window_mode="rank", cap=32):
    groups = group_by_label(batch.labels)
    sets = build_contrast_sets(
        batch, groups, MixNegConfig(),
        MixPosConfig(gamma=gamma, window_mode=window_mode, max_pos_per_anchor=cap),
        seed=seed,
    )
    return groups, sets


class FixedBeta:
    """Generator stand-in whose beta() returns scripted values."""

    def __init__(self, values):
        self._values = list(values)

    def beta(self, a, b, size=None):
        if size is None:
            return self._values.pop(0)
        out = [self._values.pop(0) for _ in range(int(size))]
        return np.asarray(out)

    def choice(self, n, size, replace):
        return np.arange(size)
