"""Per-anchor hard contrastive pairs built by embedding-level mixup.

Two families of mixtures are generated for every anchor:

* anchor-inclusive hard negatives: one convex mixture of the anchor with
  each real negative, using a Beta-distributed coefficient, labeled with
  the matching convex combination of labels;
* anchor-exclusive hard positives: mixtures of one sample from a group
  below the anchor's label and one from a group above, with the unique
  deterministic coefficient that makes the mixed label equal the anchor's.

Mixtures are renormalized to unit norm because the loss consumes inner
products of norm-1 embeddings.  Each anchor draws from its own random
substream, so construction is reproducible independent of processing
order.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .core import LabeledBatch, LabelGroups, QuantizationRule
from .errors import InvalidArgumentError
from .rng import substream

LAMBDA_CLAMP = 1e-6
_MIN_MIX_NORM = 1e-12

WINDOW_RANK = "rank"
WINDOW_LABEL_DISTANCE = "label_distance"


@dataclass(frozen=True)
class MixNegConfig:
    """Beta shape parameters controlling hard-negative hardness.

    The default (2, 8) skews mixtures toward the negative sample, which
    produces moderate rather than aggressive hard negatives.
    """

    alpha: float = 2.0
    beta: float = 8.0

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise InvalidArgumentError("Beta shape parameters must be positive")


@dataclass(frozen=True)
class MixPosConfig:
    """Window for hard-positive source selection.

    ``rank`` mode admits source groups within ``ceil(gamma)`` group ranks
    of the anchor's group; ``label_distance`` mode admits groups whose
    label lies within ``gamma`` of the anchor's group label.  At most
    ``max_pos_per_anchor`` mixtures are kept per anchor (deterministic
    seeded subsample when the candidate count exceeds the cap).
    """

    gamma: float = 1.0
    window_mode: str = WINDOW_RANK
    max_pos_per_anchor: int = 32

    def __post_init__(self):
        if not self.gamma > 0:
            raise InvalidArgumentError("gamma must be positive")
        if self.window_mode not in (WINDOW_RANK, WINDOW_LABEL_DISTANCE):
            raise InvalidArgumentError(f"unknown window_mode {self.window_mode!r}")
        if self.max_pos_per_anchor < 1:
            raise InvalidArgumentError("max_pos_per_anchor must be >= 1")


@dataclass(frozen=True)
class MixedEmbedding:
    """One mixture: unit vector, mixed label, and its provenance."""

    vector: np.ndarray
    mixed_label: float
    kind: str  # "mix_neg" | "mix_pos"
    source_a: int
    source_b: int
    lam: float


def _row_norms(mat: np.ndarray) -> np.ndarray:
    return np.sqrt(np.einsum("ij,ij->i", mat, mat))


def _mix_vectors(z: np.ndarray, sources: np.ndarray, lambdas: np.ndarray) -> tuple:
    """Renormalized convex combinations ``lam*z[s0] + (1-lam)*z[s1]``.

    Returns ``(unit_vectors, prenorm_norms)``.  Shared by construction and
    by the loss, which rebuilds mixture vectors from current embeddings so
    gradients can chain through both sources.
    """
    lam = lambdas[:, None]
    pre = lam * z[sources[:, 0]] + (1.0 - lam) * z[sources[:, 1]]
    norms = _row_norms(pre)
    safe = np.maximum(norms, _MIN_MIX_NORM)
    return pre / safe[:, None], norms


@dataclass(frozen=True)
class AnchorContrastSet:
    """Everything one anchor is contrasted against.

    Real elements are stored as index arrays into the batch; mixtures are
    stored as parallel arrays (sources, coefficients, labels, vectors) so
    the loss can consume them without per-object overhead.  The
    ``positive_mix`` / ``negative_mix`` properties expose the same data as
    :class:`MixedEmbedding` lists.
    """

    anchor_index: int
    anchor_label: float
    positive_real: np.ndarray
    negative_real: np.ndarray
    neg_mix_sources: np.ndarray  # (K, 2) int, column 0 is the anchor
    neg_mix_lambdas: np.ndarray
    neg_mix_labels: np.ndarray
    neg_mix_vectors: np.ndarray
    pos_mix_sources: np.ndarray  # (K, 2) int, (below, above)
    pos_mix_lambdas: np.ndarray
    pos_mix_labels: np.ndarray
    pos_mix_vectors: np.ndarray

    def _mix_list(self, kind, sources, lambdas, labels, vectors) -> list:
        return [
            MixedEmbedding(
                vector=vectors[k],
                mixed_label=float(labels[k]),
                kind=kind,
                source_a=int(sources[k, 0]),
                source_b=int(sources[k, 1]),
                lam=float(lambdas[k]),
            )
            for k in range(sources.shape[0])
        ]

    @property
    def negative_mix(self) -> list:
        return self._mix_list("mix_neg", self.neg_mix_sources, self.neg_mix_lambdas,
                              self.neg_mix_labels, self.neg_mix_vectors)

    @property
    def positive_mix(self) -> list:
        return self._mix_list("mix_pos", self.pos_mix_sources, self.pos_mix_lambdas,
                              self.pos_mix_labels, self.pos_mix_vectors)


def _empty_mix() -> tuple:
    return (
        np.empty((0, 2), dtype=np.intp),
        np.empty(0, dtype=float),
        np.empty(0, dtype=float),
    )


def sample_lambda1(config: MixNegConfig, rng: np.random.Generator) -> float:
    """One Beta(alpha, beta) draw, clamped away from {0, 1}."""
    lam = float(rng.beta(config.alpha, config.beta))
    return min(max(lam, LAMBDA_CLAMP), 1.0 - LAMBDA_CLAMP)


def _draw_lambdas(config: MixNegConfig, rng: np.random.Generator, size: int) -> np.ndarray:
    return np.clip(rng.beta(config.alpha, config.beta, size=size),
                   LAMBDA_CLAMP, 1.0 - LAMBDA_CLAMP)


def make_mix_neg(
    anchor: int,
    batch: LabeledBatch,
    groups: LabelGroups,
    config: MixNegConfig,
    rng: np.random.Generator,
    rule: QuantizationRule = QuantizationRule(),
    allowed: np.ndarray | None = None,
) -> list:
    """Hard negatives for one anchor: one mixture per real negative.

    A mixture whose mixed label lands back in the anchor's label bin is
    resampled once and then dropped; degenerate (near-zero) mixtures are
    dropped with a warning.  ``allowed`` optionally restricts candidate
    negatives (category-constrained mixing).
    """
    if not batch.normalized:
        raise InvalidArgumentError("batch must be normalized before mixing")
    sources, lambdas, labels = _make_mix_neg_arrays(
        anchor, batch, groups, config, rng, rule, allowed
    )
    vectors, _ = _mix_vectors(batch.embeddings, sources, lambdas)
    return [
        MixedEmbedding(vectors[k], float(labels[k]), "mix_neg",
                       int(sources[k, 0]), int(sources[k, 1]), float(lambdas[k]))
        for k in range(sources.shape[0])
    ]


def _make_mix_neg_arrays(anchor, batch, groups, config, rng, rule, allowed):
    z = batch.embeddings
    lab = batch.labels
    rank = groups.rank_of_sample[anchor]
    neg_mask = groups.rank_of_sample != rank
    if allowed is not None:
        neg_mask &= allowed
    negatives = np.flatnonzero(neg_mask)
    if negatives.size == 0:
        return _empty_mix()

    anchor_bin = rule.quantize(np.array([lab[anchor]]))[0]
    lambdas = _draw_lambdas(config, rng, negatives.size)
    mixed = lambdas * lab[anchor] + (1.0 - lambdas) * lab[negatives]

    # Mixtures falling in the anchor's own bin are not negatives: resample
    # those coefficients once, then drop persistent offenders.
    collide = rule.quantize(mixed) == anchor_bin
    if np.any(collide):
        idx = np.flatnonzero(collide)
        redraw = _draw_lambdas(config, rng, idx.size)
        lambdas[idx] = redraw
        mixed[idx] = redraw * lab[anchor] + (1.0 - redraw) * lab[negatives[idx]]
        still = rule.quantize(mixed) == anchor_bin
        if np.any(still):
            keep = ~still
            negatives, lambdas, mixed = negatives[keep], lambdas[keep], mixed[keep]

    pre = lambdas[:, None] * z[anchor] + (1.0 - lambdas)[:, None] * z[negatives]
    degenerate = _row_norms(pre) <= _MIN_MIX_NORM
    if np.any(degenerate):
        warnings.warn(
            f"dropped {int(degenerate.sum())} degenerate mixture(s) for anchor {anchor} "
            "(near-antipodal sources)",
            RuntimeWarning,
            stacklevel=2,
        )
        keep = ~degenerate
        negatives, lambdas, mixed = negatives[keep], lambdas[keep], mixed[keep]
    sources = np.column_stack([np.full(negatives.size, anchor, dtype=np.intp),
                               negatives.astype(np.intp)])
    return sources, lambdas, mixed


def solve_lambda2(m: float, m_lo: float, m_hi: float) -> float:
    """Coefficient placing the mixed label of (m_lo, m_hi) exactly at m."""
    if m_lo == m_hi:
        raise ZeroDivisionError("source labels coincide; coefficient is undefined")
    if not (m_lo < m < m_hi):
        raise InvalidArgumentError(
            f"anchor label {m} must lie strictly inside ({m_lo}, {m_hi})"
        )
    return (m - m_hi) / (m_lo - m_hi)


def _window_group_ranks(groups: LabelGroups, rank: int, config: MixPosConfig):
    """Group ranks strictly below/above the anchor's group, inside the window."""
    if config.window_mode == WINDOW_RANK:
        reach = math.ceil(config.gamma)
        below = range(max(0, rank - reach), rank)
        above = range(rank + 1, min(groups.n_groups, rank + reach + 1))
        return list(below), list(above)
    center = groups.unique_labels[rank]
    near = np.abs(groups.unique_labels - center) <= config.gamma
    below = [r for r in range(rank) if near[r]]
    above = [r for r in range(rank + 1, groups.n_groups) if near[r]]
    return below, above


def enumerate_mix_pos(
    anchor: int,
    batch: LabeledBatch,
    groups: LabelGroups,
    config: MixPosConfig,
    rng: np.random.Generator,
    allowed: np.ndarray | None = None,
) -> list:
    """Hard positives for one anchor: all (below, above) source pairs in
    the window, subsampled to the per-anchor cap when necessary.

    Anchors holding an extreme label have no admissible pairs and get an
    empty list.
    """
    if not batch.normalized:
        raise InvalidArgumentError("batch must be normalized before mixing")
    sources, lambdas, labels = _enumerate_mix_pos_arrays(
        anchor, batch, groups, config, rng, allowed
    )
    vectors, _ = _mix_vectors(batch.embeddings, sources, lambdas)
    return [
        MixedEmbedding(vectors[k], float(labels[k]), "mix_pos",
                       int(sources[k, 0]), int(sources[k, 1]), float(lambdas[k]))
        for k in range(sources.shape[0])
    ]


def _enumerate_mix_pos_arrays(anchor, batch, groups, config, rng, allowed):
    lab = batch.labels
    m = lab[anchor]
    rank = groups.rank_of_sample[anchor]
    below_ranks, above_ranks = _window_group_ranks(groups, rank, config)
    if not below_ranks or not above_ranks:
        return _empty_mix()

    def pool(ranks):
        if len(ranks) == 1:
            idx = groups.group_indices[ranks[0]]
        else:
            idx = np.concatenate([groups.group_indices[r] for r in ranks])
        if allowed is not None:
            idx = idx[allowed[idx]]
        return idx

    below = pool(below_ranks)
    above = pool(above_ranks)
    if below.size == 0 or above.size == 0:
        return _empty_mix()

    # Full candidate grid (below x above), deterministically ordered.
    pairs = np.column_stack([
        np.repeat(below, above.size).astype(np.intp),
        np.tile(above, below.size).astype(np.intp),
    ])
    if pairs.shape[0] > config.max_pos_per_anchor:
        pick = rng.choice(pairs.shape[0], size=config.max_pos_per_anchor, replace=False)
        pairs = pairs[np.sort(pick)]

    m_lo = lab[pairs[:, 0]]
    m_hi = lab[pairs[:, 1]]
    lambdas = (m - m_hi) / (m_lo - m_hi)
    labels = np.full(pairs.shape[0], float(m))
    return pairs, lambdas, labels


def build_contrast_sets(
    batch: LabeledBatch,
    groups: LabelGroups,
    neg_cfg: MixNegConfig | None,
    pos_cfg: MixPosConfig | None,
    seed: int,
    group_constraint=None,
    rule: QuantizationRule = QuantizationRule(),
) -> list:
    """One contrast set per sample.

    Pass ``neg_cfg=None`` / ``pos_cfg=None`` to skip building that mixture
    family (the corresponding arrays come back empty).  When
    ``group_constraint`` is given (one category token per sample), mixture
    sources are restricted to samples sharing the anchor's category; real
    positives and negatives stay unrestricted.

    Each anchor uses the substream derived from ``(seed, anchor_index)``:
    hard-negative coefficients are drawn first, then the hard-positive
    subsample, so results do not depend on anchor processing order.
    """
    if not batch.normalized:
        raise InvalidArgumentError("batch must be normalized before mixing")
    constraint = None
    if group_constraint is not None:
        constraint = np.asarray(group_constraint)
        if constraint.shape[0] != batch.n:
            raise InvalidArgumentError("group_constraint length must equal batch size")

    z = batch.embeddings
    all_idx = np.arange(batch.n)
    ranks = groups.rank_of_sample
    sets = []
    for a in range(batch.n):
        same = ranks == ranks[a]
        positive_real = all_idx[same & (all_idx != a)]
        negative_real = all_idx[~same]
        allowed = None if constraint is None else (constraint == constraint[a])

        if neg_cfg is not None or pos_cfg is not None:
            rng_a = substream(seed, a)
        if neg_cfg is not None:
            ns, nl, nml = _make_mix_neg_arrays(a, batch, groups, neg_cfg, rng_a, rule, allowed)
        else:
            ns, nl, nml = _empty_mix()
        if pos_cfg is not None:
            ps, pl, pml = _enumerate_mix_pos_arrays(a, batch, groups, pos_cfg, rng_a, allowed)
        else:
            ps, pl, pml = _empty_mix()

        nv, _ = _mix_vectors(z, ns, nl)
        pv, _ = _mix_vectors(z, ps, pl)
        sets.append(AnchorContrastSet(
            anchor_index=a,
            anchor_label=float(batch.labels[a]),
            positive_real=positive_real,
            negative_real=negative_real,
            neg_mix_sources=ns, neg_mix_lambdas=nl, neg_mix_labels=nml, neg_mix_vectors=nv,
            pos_mix_sources=ps, pos_mix_lambdas=pl, pos_mix_labels=pml, pos_mix_vectors=pv,
        ))
    return sets
