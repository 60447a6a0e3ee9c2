"""Labeled embedding batches, label grouping, and quantization rules.

Labels are plain finite floats.  A batch couples an ``N x d_e`` embedding
matrix with one label per row; most operations additionally need the rows
partitioned into same-label groups sorted by label value, which is what
:class:`LabelGroups` provides.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateEmbeddingError, DegenerateRangeError, InvalidArgumentError

_NORM_TOL = 1e-9
_MIN_ROW_NORM = 1e-12


def _as_label_vector(labels) -> np.ndarray:
    arr = np.asarray(labels, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidArgumentError("labels must be a non-empty 1-D vector")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError("labels must be finite")
    return arr


@dataclass(frozen=True)
class QuantizationRule:
    """Grouping rule: ``bin_width == 0`` means exact float equality,
    otherwise labels are binned and represented by the bin center."""

    bin_width: float = 0.0

    def __post_init__(self):
        if self.bin_width < 0:
            raise InvalidArgumentError("bin_width must be >= 0")

    def quantize(self, labels) -> np.ndarray:
        """Map raw labels to their group representative."""
        arr = np.asarray(labels, dtype=float)
        if self.bin_width == 0:
            return arr.copy()
        w = self.bin_width
        return np.floor(arr / w) * w + w / 2


@dataclass(frozen=True)
class LabeledBatch:
    """Embeddings plus scalar labels; ``normalized`` asserts unit-norm rows."""

    embeddings: np.ndarray
    labels: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        emb = np.asarray(self.embeddings, dtype=float)
        lab = _as_label_vector(self.labels)
        if emb.ndim != 2:
            raise InvalidArgumentError("embeddings must be a 2-D matrix")
        n, d = emb.shape
        if n < 2 or d < 2:
            raise InvalidArgumentError(f"batch needs N >= 2 and d_e >= 2, got {n}x{d}")
        if lab.shape[0] != n:
            raise InvalidArgumentError("labels length must match embedding rows")
        if not np.all(np.isfinite(emb)):
            raise InvalidArgumentError("embeddings must be finite")
        if self.normalized:
            norms = np.linalg.norm(emb, axis=1)
            if not np.all(np.abs(norms - 1.0) <= _NORM_TOL):
                worst = int(np.argmax(np.abs(norms - 1.0)))
                raise InvalidArgumentError(
                    f"row {worst} has norm {norms[worst]:.12f}, expected 1 within {_NORM_TOL}"
                )
        object.__setattr__(self, "embeddings", emb)
        object.__setattr__(self, "labels", lab)

    @property
    def n(self) -> int:
        return self.embeddings.shape[0]

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]

    @classmethod
    def from_raw(cls, raw_embeddings, labels) -> "LabeledBatch":
        """Normalize rows of ``raw_embeddings`` and wrap them in a batch."""
        return cls(normalize_embeddings(raw_embeddings), labels, normalized=True)


@dataclass(frozen=True)
class LabelGroups:
    """Partition of sample indices into same-label groups, sorted by label.

    ``rank_of_sample[i]`` is the rank of sample ``i``'s group within
    ``unique_labels``; group index lists keep the samples' original
    (insertion) order, which fixes tie order without affecting any sums.
    """

    unique_labels: np.ndarray
    group_indices: tuple
    rank_of_sample: np.ndarray

    @property
    def n_groups(self) -> int:
        return len(self.unique_labels)

    @property
    def n_samples(self) -> int:
        return self.rank_of_sample.shape[0]

    def group_size(self, rank: int) -> int:
        return len(self.group_indices[rank])


@dataclass(frozen=True)
class LabelRange:
    """Global min/max of the training labels; fixed once per run so the
    distance weights stay consistent between pretraining and evaluation."""

    m_min: float
    m_max: float

    def __post_init__(self):
        if not (np.isfinite(self.m_min) and np.isfinite(self.m_max)):
            raise InvalidArgumentError("label range endpoints must be finite")
        if not self.m_max > self.m_min:
            raise DegenerateRangeError(
                f"label range must satisfy m_max > m_min, got [{self.m_min}, {self.m_max}]"
            )

    @property
    def width(self) -> float:
        return self.m_max - self.m_min


def group_by_label(labels, rule: QuantizationRule = QuantizationRule()) -> LabelGroups:
    """Group sample indices by (quantized) label, ascending.

    Samples whose quantized labels compare exactly equal share a group;
    within a group the original sample order is kept.
    """
    lab = _as_label_vector(labels)
    quantized = rule.quantize(lab)
    unique, inverse = np.unique(quantized, return_inverse=True)
    groups = tuple(np.flatnonzero(inverse == k) for k in range(unique.shape[0]))
    return LabelGroups(unique_labels=unique, group_indices=groups, rank_of_sample=inverse)


def normalize_embeddings(raw) -> np.ndarray:
    """Divide every row by its Euclidean norm.

    Raises :class:`DegenerateEmbeddingError` naming the first row whose
    norm falls below 1e-12.
    """
    mat = np.asarray(raw, dtype=float)
    if mat.ndim != 2:
        raise InvalidArgumentError("expected a 2-D matrix")
    norms = np.linalg.norm(mat, axis=1)
    bad = np.flatnonzero(norms <= _MIN_ROW_NORM)
    if bad.size:
        raise DegenerateEmbeddingError(
            f"row {int(bad[0])} has norm {norms[bad[0]]:.3e}; cannot normalize"
        )
    return mat / norms[:, None]


def label_range(train_labels) -> LabelRange:
    """Label range over the training split. Requires >= 2 distinct values."""
    lab = _as_label_vector(train_labels)
    lo, hi = float(np.min(lab)), float(np.max(lab))
    if hi == lo:
        raise DegenerateRangeError("all training labels are equal; range is degenerate")
    return LabelRange(m_min=lo, m_max=hi)
