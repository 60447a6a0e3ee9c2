import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from supremix.core import (
    LabelRange,
    LabeledBatch,
    QuantizationRule,
    group_by_label,
    label_range,
    normalize_embeddings,
)
from supremix.errors import (
    DegenerateEmbeddingError,
    DegenerateRangeError,
    InvalidArgumentError,
)


def test_group_exact_match():
    groups = group_by_label([3.0, 1.0, 3.0, 2.0])
    assert groups.unique_labels.tolist() == [1.0, 2.0, 3.0]
    assert groups.group_indices[0].tolist() == [1]
    assert groups.group_indices[1].tolist() == [3]
    assert groups.group_indices[2].tolist() == [0, 2]


def test_group_floor_binning():
    groups = group_by_label([0.1, 0.9, 1.1], QuantizationRule(bin_width=1.0))
    assert groups.n_groups == 2
    assert groups.group_indices[0].tolist() == [0, 1]
    assert groups.group_indices[1].tolist() == [2]
    assert groups.unique_labels.tolist() == [0.5, 1.5]


def test_group_recount_oracle():
    rng = np.random.default_rng(5)
    labels = rng.choice(np.linspace(0, 1, 17), size=500)
    groups = group_by_label(labels)
    # Brute-force recount: collect indices per value with a plain loop.
    expected = {}
    for i, v in enumerate(labels.tolist()):
        expected.setdefault(v, []).append(i)
    assert sum(len(g) for g in groups.group_indices) == 500
    assert np.all(np.diff(groups.unique_labels) > 0)
    for value, members in zip(groups.unique_labels, groups.group_indices):
        assert expected[float(value)] == members.tolist()


def test_group_empty_raises():
    with pytest.raises(InvalidArgumentError):
        group_by_label([])


def test_group_nonfinite_raises():
    with pytest.raises(InvalidArgumentError):
        group_by_label([0.0, float("nan")])


@given(st.lists(st.integers(min_value=-50, max_value=50), min_size=1, max_size=60),
       st.sampled_from([0.0, 0.5, 1.0, 3.0]))
def test_groups_partition_property(labels, bin_width):
    groups = group_by_label(np.asarray(labels, dtype=float), QuantizationRule(bin_width))
    flat = np.concatenate(groups.group_indices)
    assert sorted(flat.tolist()) == list(range(len(labels)))


@given(st.lists(st.integers(min_value=-50, max_value=50), min_size=2, max_size=40))
def test_rank_monotone_in_quantized_label(labels):
    rule = QuantizationRule(bin_width=2.0)
    arr = np.asarray(labels, dtype=float)
    groups = group_by_label(arr, rule)
    q = rule.quantize(arr)
    for a in range(len(labels)):
        for b in range(len(labels)):
            assert (groups.rank_of_sample[a] < groups.rank_of_sample[b]) == (q[a] < q[b])


def test_normalize_345():
    out = normalize_embeddings(np.array([[3.0, 4.0]]))
    assert np.allclose(out, [[0.6, 0.8]], atol=1e-12)


def test_normalize_idempotent_unit_row():
    row = np.array([[0.6, 0.8]])
    assert np.max(np.abs(normalize_embeddings(row) - row)) <= 1e-12


def test_normalize_random_norms():
    rng = np.random.default_rng(0)
    out = normalize_embeddings(rng.normal(size=(32, 8)))
    assert np.max(np.abs(np.linalg.norm(out, axis=1) - 1)) <= 1e-12


def test_normalize_zero_row_names_index():
    bad = np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 1.0]])
    with pytest.raises(DegenerateEmbeddingError, match="row 1"):
        normalize_embeddings(bad)


@settings(max_examples=50)
@given(st.integers(min_value=0, max_value=10_000))
def test_normalize_idempotence_property(seed):
    rng = np.random.default_rng(seed)
    mat = rng.normal(size=(5, 4)) + 0.1
    once = normalize_embeddings(mat)
    twice = normalize_embeddings(once)
    assert np.max(np.abs(once - twice)) <= 1e-12


def test_label_range_examples():
    assert label_range([1.0, 228.0]) == LabelRange(1.0, 228.0)
    assert label_range([0.0, 0.0, 1.0]) == LabelRange(0.0, 1.0)
    with pytest.raises(DegenerateRangeError):
        label_range([4.0, 4.0, 4.0])


def test_label_range_is_global_not_per_batch():
    rng = label_range([0.0, 10.0, 3.0, 7.0])
    assert rng.width == 10.0


def test_batch_validation():
    emb = np.array([[1.0, 0.0], [0.0, 1.0]])
    batch = LabeledBatch(emb, [0.0, 1.0], normalized=True)
    assert batch.n == 2 and batch.dim == 2
    with pytest.raises(InvalidArgumentError):
        LabeledBatch(emb * 2, [0.0, 1.0], normalized=True)
    with pytest.raises(InvalidArgumentError):
        LabeledBatch(emb[:1], [0.0])  # N >= 2
    with pytest.raises(InvalidArgumentError):
        LabeledBatch(emb, [0.0])  # label length mismatch


def test_quantization_rule_validation():
    with pytest.raises(InvalidArgumentError):
        QuantizationRule(bin_width=-1.0)
    rule = QuantizationRule(bin_width=1.0)
    assert rule.quantize(np.array([1.1]))[0] == pytest.approx(1.5)
    assert rule.quantize(np.array([-0.2]))[0] == pytest.approx(-0.5)
