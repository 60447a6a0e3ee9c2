"""Regression metrics and representation-quality analytics.

Beyond the usual regression metrics this module quantifies how smooth
and how ordered a learned embedding is:

* the normalized Lipschitz factor distribution (NLFD) measures local
  smoothness as |target gap| / ||embedding gap|| to each point's nearest
  neighbor, after per-coordinate standardization and sqrt(d) scaling;
* the z-score gap compares two NLFDs (reference minus candidate, in
  pooled-scale units), positive when the candidate is smoother;
* the ordinality score is the absolute Spearman correlation between
  labels and the projection onto the first principal direction.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats

from .core import LabelGroups, LabeledBatch
from .errors import InvalidArgumentError
from .rng import substream

GM_EPSILON = 1e-6


@dataclass(frozen=True)
class Metrics:
    """MAE, MSE, geometric-mean error, and Pearson correlation.

    ``pearson`` is ``None`` when either series is constant.
    """

    mae: float
    mse: float
    gm: float
    pearson: float | None

    def to_dict(self) -> dict:
        return {"mae": self.mae, "mse": self.mse, "gm": self.gm, "pearson": self.pearson}


@dataclass(frozen=True)
class NlfdResult:
    """Factor list plus summary statistics of one embedding's NLFD.

    ``excluded_pairs`` counts points whose factor is undefined or zero
    (duplicate nearest neighbor, or equal targets).  Statistics are NaN
    when every point was excluded.
    """

    factors: np.ndarray
    mean: float
    std: float
    skewness: float
    d: int
    excluded_pairs: int

    @classmethod
    def from_factors(cls, factors, d: int, excluded_pairs: int) -> "NlfdResult":
        arr = np.asarray(factors, dtype=float)
        if arr.size == 0:
            return cls(arr, math.nan, math.nan, math.nan, d, excluded_pairs)
        mean = float(np.mean(arr))
        std = float(np.std(arr, ddof=1)) if arr.size > 1 else 0.0
        skew = math.nan  # undefined for constant or tiny samples
        if arr.size > 2 and np.ptp(arr) > 0:
            with warnings.catch_warnings():
                # Near-identical factors make the third moment meaningless;
                # report NaN instead of an unreliable number.
                warnings.simplefilter("error", RuntimeWarning)
                try:
                    skew = float(stats.skew(arr, bias=False))
                except RuntimeWarning:
                    skew = math.nan
        return cls(arr, mean, std, skew, d, excluded_pairs)

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "std": self.std,
            "skewness": self.skewness,
            "d": self.d,
            "excluded_pairs": self.excluded_pairs,
            "n_factors": int(self.factors.size),
        }


@dataclass(frozen=True)
class ZGapReport:
    """Bootstrap pairing of smoothness gaps with performance gaps."""

    z: float
    pairs: list  # (nlfd gap, performance gap) per resample
    pearson_of_gaps: float | None
    B: int

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


def compute_metrics(predictions, targets) -> Metrics:
    """Standard regression metrics over aligned prediction/target vectors."""
    p = np.asarray(predictions, dtype=float)
    t = np.asarray(targets, dtype=float)
    if p.shape != t.shape or p.ndim != 1 or p.size < 2:
        raise InvalidArgumentError("predictions and targets must be equal-length vectors, n >= 2")
    err = np.abs(p - t)
    mae = float(np.mean(err))
    mse = float(np.mean(err ** 2))
    gm = float(np.exp(np.mean(np.log(err + GM_EPSILON))))
    if np.std(p) == 0 or np.std(t) == 0:
        pearson = None
    else:
        pearson = float(np.corrcoef(p, t)[0, 1])
    return Metrics(mae=mae, mse=mse, gm=gm, pearson=pearson)


def compute_nlfd(embeddings, targets) -> NlfdResult:
    """Nearest-neighbor Lipschitz factors of an embedding.

    Coordinates are standardized to zero mean / unit variance over the
    full set (constant coordinates stay at zero), each point is matched
    to its nearest standardized neighbor, and |target gap| / distance is
    scaled by sqrt(d).  Points with a zero-distance neighbor or a zero
    target gap are excluded and counted rather than clamped, since a
    clamp would bias the distribution's skewness.
    """
    phi = np.asarray(embeddings, dtype=float)
    t = np.asarray(targets, dtype=float)
    if phi.ndim != 2 or t.ndim != 1 or phi.shape[0] != t.shape[0]:
        raise InvalidArgumentError("embeddings must be N x d with one target per row")
    n, d = phi.shape
    if n < 3:
        raise InvalidArgumentError("need at least 3 points")

    centered = phi - phi.mean(axis=0)
    std = centered.std(axis=0)
    scale = np.where(std > 0, std, 1.0)
    standardized = np.where(std > 0, centered / scale, 0.0)

    # Exact pairwise distances, row-chunked to bound memory at O(chunk*N*d).
    nearest = np.empty(n, dtype=np.intp)
    nearest_dist = np.empty(n)
    chunk = max(1, min(n, 8_388_608 // (n * d + 1)))
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        diff = standardized[start:stop, None, :] - standardized[None, :, :]
        dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        rows = np.arange(start, stop)
        dist[rows - start, rows] = np.inf
        nearest[start:stop] = np.argmin(dist, axis=1)
        nearest_dist[start:stop] = dist[rows - start, nearest[start:stop]]
    if not np.any(nearest_dist > 0):
        raise InvalidArgumentError("all pairwise distances are zero; representation is degenerate")
    target_gap = np.abs(t - t[nearest])

    usable = nearest_dist > 0
    factors = np.empty(n)
    factors[usable] = target_gap[usable] / nearest_dist[usable] * math.sqrt(d)
    keep = usable & (target_gap > 0)
    excluded = int(n - keep.sum())
    if not np.any(keep):
        warnings.warn("every point excluded from the NLFD (duplicate neighbors or equal targets)",
                      RuntimeWarning, stacklevel=2)
    return NlfdResult.from_factors(factors[keep], d=d, excluded_pairs=excluded)


def z_gap(candidate: NlfdResult, reference: NlfdResult) -> float:
    """Mean gap (reference minus candidate) in pooled-deviation units.

    Positive values mean the candidate's factors are smaller on average,
    i.e. the candidate representation is smoother.
    """
    if candidate.factors.size == 0 or reference.factors.size == 0:
        raise InvalidArgumentError("both factor distributions must be non-degenerate")
    denom = math.sqrt(candidate.std ** 2 + reference.std ** 2)
    if denom == 0:
        raise InvalidArgumentError("both distributions have zero spread; gap is undefined")
    return (reference.mean - candidate.mean) / denom


def bootstrap_gap(
    candidate_embeddings,
    candidate_predictions,
    reference_embeddings,
    reference_predictions,
    targets,
    B: int = 100,
    seed: int = 0,
) -> ZGapReport:
    """Bootstrap the (smoothness gap, performance gap) relationship.

    Each of ``B`` seeded resamples (with replacement) yields the NLFD
    z-gap between the two representations and the difference in Pearson
    correlation of their predictions (candidate minus reference).  The
    report correlates the two series; the correlation is ``None`` when
    either series is (numerically) constant.
    """
    if B < 2:
        raise InvalidArgumentError("B must be >= 2")
    t = np.asarray(targets, dtype=float)
    ce = np.asarray(candidate_embeddings, dtype=float)
    re = np.asarray(reference_embeddings, dtype=float)
    cp = np.asarray(candidate_predictions, dtype=float)
    rp = np.asarray(reference_predictions, dtype=float)
    n = t.shape[0]

    full = z_gap(compute_nlfd(ce, t), compute_nlfd(re, t))
    pairs = []
    for b in range(B):
        idx = substream(seed, 3, b).integers(n, size=n)
        zg = z_gap(compute_nlfd(ce[idx], t[idx]), compute_nlfd(re[idx], t[idx]))
        m_c = compute_metrics(cp[idx], t[idx])
        m_r = compute_metrics(rp[idx], t[idx])
        if m_c.pearson is None or m_r.pearson is None:
            perf = math.nan
        else:
            perf = m_c.pearson - m_r.pearson
        pairs.append((float(zg), float(perf)))

    arr = np.asarray(pairs)
    finite = np.all(np.isfinite(arr), axis=1)
    if finite.sum() >= 2 and np.std(arr[finite, 0]) > 0 and np.std(arr[finite, 1]) > 0:
        corr = float(np.corrcoef(arr[finite, 0], arr[finite, 1])[0, 1])
    else:
        corr = None
    return ZGapReport(z=float(full), pairs=pairs, pearson_of_gaps=corr, B=B)


def track_logits(batch: LabeledBatch, groups: LabelGroups, k: int = 1000):
    """Positive/negative similarity summary over real pairs.

    Returns ``(avg_pos_logit, mean_top_k_neg_logit)`` over unordered
    pairs; a side with no pairs yields NaN.
    """
    if not batch.normalized:
        raise InvalidArgumentError("batch must be normalized")
    if k < 1:
        raise InvalidArgumentError("k must be >= 1")
    gram = batch.embeddings @ batch.embeddings.T
    same = groups.rank_of_sample[:, None] == groups.rank_of_sample[None, :]
    upper = np.triu(np.ones_like(same, dtype=bool), k=1)
    pos = gram[same & upper]
    neg = gram[~same & upper]
    avg_pos = float(np.mean(pos)) if pos.size else math.nan
    if neg.size:
        kk = min(k, neg.size)
        top = np.sort(neg)[::-1][:kk]
        mean_top = float(np.mean(top))
    else:
        mean_top = math.nan
    return avg_pos, mean_top


def ordinality_score(embeddings, labels) -> float:
    """Absolute Spearman correlation between labels and the projection of
    the embeddings onto their first principal direction."""
    phi = np.asarray(embeddings, dtype=float)
    lab = np.asarray(labels, dtype=float)
    if phi.ndim != 2 or phi.shape[0] != lab.shape[0] or phi.shape[0] < 3:
        raise InvalidArgumentError("need N >= 3 embeddings with matching labels")
    if np.unique(lab).size < 3:
        raise InvalidArgumentError("need >= 3 distinct labels")
    centered = phi - phi.mean(axis=0)
    if not np.any(centered):
        raise InvalidArgumentError("embeddings have zero variance")
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    projection = centered @ vt[0]
    rho = stats.spearmanr(lab, projection).statistic
    return float(abs(rho))
