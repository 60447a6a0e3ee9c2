"""Deterministic random substreams.

Every stochastic operation draws from a generator derived from a master
seed plus a small integer path (for example the anchor index).  Deriving
substreams this way keeps results bit-identical no matter in which order
anchors are processed, which is what makes parallel execution and rerun
determinism cheap to guarantee.
"""

from __future__ import annotations

import numpy as np

# Substream purposes, so draws for one use never shift another.
MIX_NEG_STREAM = 0
MIX_POS_STREAM = 1
SPLIT_STREAM = 2
SHUFFLE_STREAM = 3
INIT_STREAM = 4


def substream(master_seed: int, *path: int) -> np.random.Generator:
    """Return a generator for ``(master_seed, *path)``.

    The same tuple always yields the same stream; distinct tuples yield
    independent streams.
    """
    if master_seed < 0 or any(p < 0 for p in path):
        raise ValueError("seed path components must be non-negative")
    return np.random.default_rng(np.random.SeedSequence([master_seed, *path]))


def anchor_rng(master_seed: int, anchor_index: int, purpose: int) -> np.random.Generator:
    """Per-anchor stream used by mixture construction."""
    return substream(master_seed, anchor_index, purpose)
