"""Synthetic ordinal datasets, CSV ingestion, and training-split edits.

Synthetic targets live on a discrete grid in [0, 1] so exact-match
positive pairs exist, mirroring discrete-valued regression targets such
as ages in months.  Inputs are smooth injective maps of the target plus
isotropic noise: a rotated helix, or a sum of random sinusoids per
coordinate.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import CsvFormatError, InvalidArgumentError
from .rng import SPLIT_STREAM, substream

KIND_HELIX = "helix"
KIND_SMOOTH_RANDOM = "smooth_random"
SPLITS = ("train", "val", "test")


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for one synthetic dataset draw."""

    kind: str = KIND_HELIX
    n: int = 2000
    input_dim: int = 16
    noise_sigma: float = 0.05
    label_grid: int = 41
    seed: int = 0

    def __post_init__(self):
        if self.kind not in (KIND_HELIX, KIND_SMOOTH_RANDOM):
            raise InvalidArgumentError(f"unknown synthetic kind {self.kind!r}")
        if self.n < 10:
            raise InvalidArgumentError("n must be >= 10")
        if self.input_dim < 3:
            raise InvalidArgumentError("input_dim must be >= 3")
        if self.noise_sigma < 0:
            raise InvalidArgumentError("noise_sigma must be >= 0")
        if self.label_grid < 2:
            raise InvalidArgumentError("label_grid must be >= 2")


@dataclass(frozen=True)
class PermutationSpec:
    seed: int = 0


@dataclass(frozen=True)
class Dataset:
    """Feature matrix, labels, per-sample split, optional category tokens."""

    inputs: np.ndarray
    labels: np.ndarray
    split: np.ndarray
    groups: np.ndarray | None = None

    def __post_init__(self):
        inputs = np.asarray(self.inputs, dtype=float)
        labels = np.asarray(self.labels, dtype=float)
        split = np.asarray(self.split)
        if inputs.ndim != 2 or labels.ndim != 1 or inputs.shape[0] != labels.shape[0]:
            raise InvalidArgumentError("inputs must be n x D with one label per row")
        if split.shape[0] != labels.shape[0]:
            raise InvalidArgumentError("split length must match sample count")
        unknown = set(np.unique(split)) - set(SPLITS)
        if unknown:
            raise InvalidArgumentError(f"unknown split values: {sorted(unknown)}")
        if self.groups is not None and np.asarray(self.groups).shape[0] != labels.shape[0]:
            raise InvalidArgumentError("groups length must match sample count")
        train_labels = labels[split == "train"]
        if np.unique(train_labels).size < 2:
            raise InvalidArgumentError("train split needs >= 2 distinct labels")
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "split", split)

    @property
    def n(self) -> int:
        return self.labels.shape[0]

    def indices(self, split: str) -> np.ndarray:
        return np.flatnonzero(self.split == split)

    def subset_arrays(self, split: str):
        idx = self.indices(split)
        grp = None if self.groups is None else self.groups[idx]
        return self.inputs[idx], self.labels[idx], grp


def _assign_split(n: int, seed: int, rng: np.random.Generator | None = None) -> np.ndarray:
    """Seeded 80/10/10 assignment via a shuffled index cut."""
    gen = rng if rng is not None else substream(seed, SPLIT_STREAM)
    order = gen.permutation(n)
    n_train = round(0.8 * n)
    n_val = round(0.1 * n)
    split = np.empty(n, dtype="<U5")
    split[order[:n_train]] = "train"
    split[order[n_train:n_train + n_val]] = "val"
    split[order[n_train + n_val:]] = "test"
    return split


def _helix_inputs(t: np.ndarray, dim: int, rng: np.random.Generator) -> np.ndarray:
    base = np.column_stack([np.cos(4 * math.pi * t), np.sin(4 * math.pi * t), t])
    # Random orthonormal frame embedding the 3-D curve into the input space.
    q, _ = np.linalg.qr(rng.normal(size=(dim, 3)))
    return base @ q.T


def _smooth_random_inputs(t: np.ndarray, dim: int, rng: np.random.Generator) -> np.ndarray:
    amp = rng.normal(size=(dim, 5))
    freq = rng.uniform(0.5, 6.0, size=(dim, 5))
    phase = rng.uniform(0, 2 * math.pi, size=(dim, 5))
    # x_d(t) = sum_j amp_dj * sin(2*pi*freq_dj*t + phase_dj)
    angles = 2 * math.pi * freq[None, :, :] * t[:, None, None] + phase[None, :, :]
    return np.sum(amp[None, :, :] * np.sin(angles), axis=2)


def gen_synthetic(spec: SyntheticSpec) -> Dataset:
    """Draw a dataset: grid labels, smooth manifold inputs, noise, split.

    Pure in its recipe: the same recipe always produces identical bytes.
    """
    rng = substream(spec.seed, 0)
    grid = np.linspace(0.0, 1.0, spec.label_grid)
    labels = grid[rng.integers(spec.label_grid, size=spec.n)]
    if spec.kind == KIND_HELIX:
        clean = _helix_inputs(labels, spec.input_dim, rng)
    else:
        clean = _smooth_random_inputs(labels, spec.input_dim, rng)
    inputs = clean + spec.noise_sigma * rng.normal(size=clean.shape)

    split_rng = substream(spec.seed, SPLIT_STREAM)
    for _ in range(10):
        split = _assign_split(spec.n, spec.seed, rng=split_rng)
        if np.unique(labels[split == "train"]).size >= 2:
            return Dataset(inputs=inputs, labels=labels, split=split)
    raise InvalidArgumentError("could not draw a train split with 2 distinct labels")


def save_csv(dataset: Dataset, path: str) -> None:
    """Write the dataset in the package CSV schema (features x0..x{D-1},
    label column ``y``, ``split`` column, optional ``group`` column)."""
    d = dataset.inputs.shape[1]
    header = [f"x{j}" for j in range(d)] + ["y", "split"]
    if dataset.groups is not None:
        header.append("group")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(dataset.n):
            row = [repr(float(v)) for v in dataset.inputs[i]]
            row.append(repr(float(dataset.labels[i])))
            row.append(str(dataset.split[i]))
            if dataset.groups is not None:
                row.append(str(dataset.groups[i]))
            writer.writerow(row)


def load_csv(
    path: str,
    label_column: str = "y",
    group_column: str | None = None,
    split_seed: int = 0,
) -> Dataset:
    """Load a dataset from CSV.

    Every column other than the label, the optional group column, and an
    optional ``split`` column becomes a feature.  Rows without a split
    column are assigned 80/10/10 by a per-row seeded hash, so one row's
    assignment never depends on the others.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError(f"{path}: empty file") from None
        rows = list(reader)
    if label_column not in header:
        raise CsvFormatError(f"{path}: missing label column {label_column!r}")
    if group_column is not None and group_column not in header:
        raise CsvFormatError(f"{path}: missing group column {group_column!r}")

    label_idx = header.index(label_column)
    group_idx = header.index(group_column) if group_column else None
    split_idx = header.index("split") if "split" in header else None
    feature_idx = [
        j for j in range(len(header)) if j not in (label_idx, group_idx, split_idx)
    ]

    def parse(cell: str, i: int, j: int) -> float:
        try:
            return float(cell)
        except ValueError:
            raise CsvFormatError(
                f"{path}: non-numeric cell {cell!r} at row {i + 2}, column {header[j]!r}"
            ) from None

    n = len(rows)
    inputs = np.empty((n, len(feature_idx)))
    labels = np.empty(n)
    split = np.empty(n, dtype="<U5")
    groups = np.empty(n, dtype=object) if group_idx is not None else None
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise CsvFormatError(f"{path}: row {i + 2} has {len(row)} cells, expected {len(header)}")
        for k, j in enumerate(feature_idx):
            inputs[i, k] = parse(row[j], i, j)
        labels[i] = parse(row[label_idx], i, label_idx)
        if split_idx is not None:
            if row[split_idx] not in SPLITS:
                raise CsvFormatError(
                    f"{path}: row {i + 2} has unknown split {row[split_idx]!r}"
                )
            split[i] = row[split_idx]
        else:
            u = substream(split_seed, SPLIT_STREAM, i).random()
            split[i] = "train" if u < 0.8 else ("val" if u < 0.9 else "test")
        if groups is not None:
            groups[i] = row[group_idx]
    if groups is not None:
        groups = groups.astype(str)
    return Dataset(inputs=inputs, labels=labels, split=split, groups=groups)


def permute_labels(dataset: Dataset, spec: PermutationSpec) -> Dataset:
    """Apply a seeded non-identity bijection to the unique label values.

    Samples that shared a label before the permutation still share one
    after it; only the ordering between groups is disrupted.
    """
    unique = np.unique(dataset.labels)
    if unique.size < 2:
        raise InvalidArgumentError("need >= 2 distinct labels to permute")
    rng = substream(spec.seed, 1)
    perm = rng.permutation(unique.size)
    while np.all(perm == np.arange(unique.size)):
        perm = rng.permutation(unique.size)
    mapping = dict(zip(unique.tolist(), unique[perm].tolist()))
    new_labels = np.array([mapping[v] for v in dataset.labels.tolist()])
    return replace(dataset, labels=new_labels)


def subsample(dataset: Dataset, n_train: int, seed: int) -> Dataset:
    """Seeded uniform subsample of the train split; val/test untouched."""
    train_idx = dataset.indices("train")
    if n_train > train_idx.size:
        raise InvalidArgumentError(
            f"n_train={n_train} exceeds current train size {train_idx.size}"
        )
    rng = substream(seed, 2)
    for _ in range(10):
        keep = rng.choice(train_idx, size=n_train, replace=False)
        if np.unique(dataset.labels[keep]).size >= 2:
            break
    else:
        raise InvalidArgumentError("subsample keeps fewer than 2 distinct train labels")
    drop = np.setdiff1d(train_idx, keep)
    mask = np.ones(dataset.n, dtype=bool)
    mask[drop] = False
    groups = None if dataset.groups is None else dataset.groups[mask]
    return Dataset(inputs=dataset.inputs[mask], labels=dataset.labels[mask],
                   split=dataset.split[mask], groups=groups)


def filter_label_range(dataset: Dataset, excluded_intervals) -> Dataset:
    """Drop train samples whose labels fall in any closed interval;
    validation and test splits are left untouched."""
    intervals = [(float(lo), float(hi)) for lo, hi in excluded_intervals]
    for lo, hi in intervals:
        if not (math.isfinite(lo) and math.isfinite(hi) and lo <= hi):
            raise InvalidArgumentError(f"malformed interval [{lo}, {hi}]")
    if not intervals:
        return dataset
    in_any = np.zeros(dataset.n, dtype=bool)
    for lo, hi in intervals:
        in_any |= (dataset.labels >= lo) & (dataset.labels <= hi)
    drop = in_any & (dataset.split == "train")
    keep = ~drop
    if not np.any((dataset.split == "train") & keep):
        raise InvalidArgumentError("exclusion intervals empty the train split")
    groups = None if dataset.groups is None else dataset.groups[keep]
    return Dataset(inputs=dataset.inputs[keep], labels=dataset.labels[keep],
                   split=dataset.split[keep], groups=groups)
