"""Executable checks of the loss's structural guarantees.

Three properties are verified numerically:

* distance magnifying: for any anchor and two negatives at strictly
  different label distances, both logit derivatives are positive and the
  weighted derivative ratio exceeds the unweighted one;
* lower bound / infimum: the loss never falls below its closed-form
  bound, and on the ordered collinear construction the gap shrinks as the
  temperature is driven toward zero;
* epsilon-ordered predicate: same-label embeddings sit within epsilon of
  a common representative while cross-label similarities stay bounded
  away from 1.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .core import LabelGroups, LabelRange, LabeledBatch, group_by_label, label_range
from .errors import InvalidArgumentError
from .loss import (
    LossConfig,
    _element_blocks,
    _term_from_logits,
    loss_lower_bound,
    loss_value_from_raw,
)
from .mixgen import MixNegConfig, MixPosConfig, build_contrast_sets

_DM_PERTURB_H = 1e-5


@dataclass(frozen=True)
class DmCheckReport:
    """Tally of distance-magnifying trials.

    ``min_ratio_margin`` is the smallest observed value of
    ``weighted_ratio / unweighted_ratio - 1`` (positive iff the property
    held in every trial); ``max_derivative_rel_err`` compares the
    closed-form logit derivative against central differences.
    """

    trials: int
    positivity_failures: int
    ratio_failures: int
    min_ratio_margin: float
    max_derivative_rel_err: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


@dataclass(frozen=True)
class InfimumReport:
    """Loss-versus-bound gaps along a descending temperature schedule.

    ``min_cross_label_angle`` is the smallest angle (radians) between
    distinct-label embeddings of the evaluated construction;
    ``mix_pos_max_deviation`` records how far renormalized hard positives
    land from their anchor (1 - cosine), which bounds the residual the
    schedule cannot remove.
    """

    taus: list
    losses: list
    lower_bound: float
    gaps: list
    min_cross_label_angle: float
    mix_pos_max_deviation: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


def check_distance_magnifying(
    batch: LabeledBatch,
    sets: list,
    config: LossConfig,
    trials: int,
    rng: np.random.Generator,
) -> DmCheckReport:
    """Sample anchor/negative-pair trials and verify the derivative
    ordering that the distance weights are designed to produce.

    Each trial picks an anchor with at least one positive and two of its
    negative elements at strictly different label distances (equal
    distances are re-drawn), then checks positivity of both logit
    derivatives, agreement of the closed form with a central-difference
    perturbation, and that weighting magnifies the far/near ratio.
    """
    if trials < 1:
        raise InvalidArgumentError("trials must be >= 1")
    if not config.use_dm:
        raise InvalidArgumentError("distance-magnifying check needs use_dm=True")
    if np.unique(batch.labels).size < 3:
        raise InvalidArgumentError("need >= 3 distinct labels")

    norms = np.linalg.norm(batch.embeddings, axis=1)
    z = batch.embeddings / norms[:, None]
    labels = batch.labels

    positivity_failures = 0
    ratio_failures = 0
    min_margin = math.inf
    max_rel_err = 0.0

    done = 0
    attempts = 0
    max_attempts = 200 * trials
    while done < trials:
        attempts += 1
        if attempts > max_attempts:
            raise InvalidArgumentError(
                "could not draw enough valid trials: no anchor offers two negatives "
                "at strictly different label distances"
            )
        cset = sets[int(rng.integers(len(sets)))]
        blocks = _element_blocks(z, labels, cset, config)
        if blocks is None:
            continue
        P = blocks["pos_count"]
        n_elem = blocks["X"].shape[0]
        n_neg = n_elem - P
        if n_neg < 2:
            continue
        gaps = np.abs(cset.anchor_label - blocks["neg_labels"])
        picked = None
        for _ in range(50):
            c1, c2 = rng.choice(n_neg, size=2, replace=False)
            # Equal label distances are excluded; "equal" includes gaps so
            # close that the +1 in the weight absorbs their difference,
            # which would make the two weights bit-identical.
            if abs(gaps[c1] - gaps[c2]) <= 1e-9 * (1.0 + max(gaps[c1], gaps[c2])):
                continue
            picked = (c1, c2) if gaps[c1] > gaps[c2] else (c2, c1)
            break
        if picked is None:
            continue
        far, near = (P + picked[0], P + picked[1])

        logits = blocks["X"] @ z[cset.anchor_index]
        _, q = _term_from_logits(logits, blocks["weights"], P, blocks["k_m"], config.tau)
        _, q_unweighted = _term_from_logits(logits, np.ones(n_elem), P, blocks["k_m"], config.tau)

        scale = P / (blocks["k_m"] * config.tau)
        closed_far, closed_near = scale * q[far], scale * q[near]

        def numeric(idx):
            bumped = logits.copy()
            bumped[idx] += _DM_PERTURB_H
            up, _ = _term_from_logits(bumped, blocks["weights"], P, blocks["k_m"], config.tau)
            bumped[idx] -= 2 * _DM_PERTURB_H
            down, _ = _term_from_logits(bumped, blocks["weights"], P, blocks["k_m"], config.tau)
            return (up - down) / (2 * _DM_PERTURB_H)

        num_far, num_near = numeric(far), numeric(near)
        if not (num_far > 0 and num_near > 0 and closed_far > 0 and closed_near > 0):
            positivity_failures += 1
        for closed, num in ((closed_far, num_far), (closed_near, num_near)):
            rel = abs(num - closed) / max(abs(closed), 1e-300)
            max_rel_err = max(max_rel_err, rel)

        ratio_weighted = q[far] / q[near]
        ratio_unweighted = q_unweighted[far] / q_unweighted[near]
        margin = ratio_weighted / ratio_unweighted - 1.0
        min_margin = min(min_margin, margin)
        if not ratio_weighted > ratio_unweighted:
            ratio_failures += 1
        done += 1

    return DmCheckReport(
        trials=trials,
        positivity_failures=positivity_failures,
        ratio_failures=ratio_failures,
        min_ratio_margin=min_margin,
        max_derivative_rel_err=max_rel_err,
    )


def construct_ordered_embeddings(labels, d_e: int) -> LabeledBatch:
    """Collinear construction on which the loss approaches its bound.

    All samples sharing a label receive the identical embedding; before
    normalization the points are ``(1, t, 0, ...)`` with ``t`` the label
    rescaled to [0, 1], so normalized angular positions are strictly
    monotone in label and stay within the first quadrant of a 2-plane.
    """
    lab = np.asarray(labels, dtype=float)
    if d_e < 2:
        raise InvalidArgumentError("d_e must be >= 2")
    rng = label_range(lab)
    t = (lab - rng.m_min) / rng.width
    pre = np.zeros((lab.shape[0], d_e))
    pre[:, 0] = 1.0
    pre[:, 1] = t
    return LabeledBatch.from_raw(pre, lab)


def infimum_gap(
    labels,
    d_e: int,
    taus,
    neg_cfg: MixNegConfig | None = MixNegConfig(),
    pos_cfg: MixPosConfig | None = MixPosConfig(),
    seed: int = 0,
) -> InfimumReport:
    """Evaluate loss-minus-bound on the ordered construction along a
    strictly decreasing temperature schedule.

    Contrast sets (and their mixing coefficients) are built once and
    reused for every temperature, so the schedule isolates the
    temperature's effect.  Hard positives of the construction coincide
    with their anchor up to the renormalization residual, which is
    reported as a diagnostic.
    """
    taus = [float(t) for t in taus]
    if not taus or any(t <= 0 for t in taus):
        raise InvalidArgumentError("temperatures must be positive")
    if any(b >= a for a, b in zip(taus, taus[1:])):
        raise InvalidArgumentError("temperature schedule must be strictly decreasing")

    batch = construct_ordered_embeddings(labels, d_e)
    groups = group_by_label(batch.labels)
    rng_range = label_range(batch.labels)
    sets = build_contrast_sets(batch, groups, neg_cfg, pos_cfg, seed=seed)

    bound = loss_lower_bound(sets, groups, rng_range)
    losses = []
    for tau in taus:
        config = LossConfig(
            tau=tau,
            use_dm=True,
            use_mix_neg=neg_cfg is not None,
            use_mix_pos=pos_cfg is not None,
            label_range=rng_range,
        )
        losses.append(loss_value_from_raw(batch.embeddings, batch.labels, sets, config))
    gaps = [lo - bound for lo in losses]

    reps = np.stack([batch.embeddings[g[0]] for g in groups.group_indices])
    cross = reps @ reps.T
    mask = ~np.eye(reps.shape[0], dtype=bool)
    min_angle = float(np.arccos(np.clip(np.max(cross[mask]), -1.0, 1.0)))

    max_dev = 0.0
    for cset in sets:
        if cset.pos_mix_sources.shape[0]:
            cos = cset.pos_mix_vectors @ batch.embeddings[cset.anchor_index]
            max_dev = max(max_dev, float(np.max(1.0 - cos)))

    return InfimumReport(
        taus=taus,
        losses=[float(v) for v in losses],
        lower_bound=float(bound),
        gaps=[float(g) for g in gaps],
        min_cross_label_angle=min_angle,
        mix_pos_max_deviation=max_dev,
    )


def check_epsilon_ordered(batch: LabeledBatch, groups: LabelGroups, epsilon: float):
    """Test the two ordering conditions and enumerate violations.

    Condition (a): every sample lies within ``epsilon`` of its group's
    renormalized centroid.  Condition (b): every cross-label pair has
    ``|inner product| < 1 - epsilon``.  Returns ``(ok, violations)`` with
    one record per violated pair/sample.
    """
    if not batch.normalized:
        raise InvalidArgumentError("batch must be normalized")
    if not epsilon > 0:
        raise InvalidArgumentError("epsilon must be positive")

    z = batch.embeddings
    violations = []
    for rank, members in enumerate(groups.group_indices):
        centroid = z[members].mean(axis=0)
        norm = np.linalg.norm(centroid)
        if norm <= 1e-12:
            violations.append({
                "condition": "same_label_spread",
                "group_rank": int(rank),
                "sample": int(members[0]),
                "value": math.inf,
            })
            continue
        rep = centroid / norm
        dists = np.linalg.norm(z[members] - rep, axis=1)
        for i in np.flatnonzero(dists >= epsilon):
            violations.append({
                "condition": "same_label_spread",
                "group_rank": int(rank),
                "sample": int(members[i]),
                "value": float(dists[i]),
            })

    gram = z @ z.T
    ranks = groups.rank_of_sample
    cross = ranks[:, None] != ranks[None, :]
    upper = np.triu(np.ones_like(cross, dtype=bool), k=1)
    bad = cross & upper & (np.abs(gram) >= 1.0 - epsilon)
    for i, j in zip(*np.nonzero(bad)):
        violations.append({
            "condition": "cross_label_similarity",
            "i": int(i),
            "j": int(j),
            "value": float(abs(gram[i, j])),
        })

    return len(violations) == 0, violations
