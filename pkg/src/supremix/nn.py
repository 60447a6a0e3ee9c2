"""Minimal trainable encoder stack: MLP with a unit-norm output head,
linear probe, end-to-end regression baseline, and an Adam optimizer with
warmup-cosine schedule and global-norm gradient clipping.

Everything is plain numpy with explicit caches and analytic backward
passes, so each gradient path can be verified against central finite
differences and training is bit-reproducible from a seed.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .analysis import Metrics, compute_metrics
from .core import LabelRange, LabeledBatch, QuantizationRule, group_by_label, label_range, normalize_embeddings
from .data import Dataset
from .errors import (
    CheckpointFormatError,
    ContractViolationError,
    InvalidArgumentError,
)
from .loss import LossConfig, supremix_loss
from .mixgen import MixNegConfig, MixPosConfig, build_contrast_sets
from .rng import INIT_STREAM, SHUFFLE_STREAM, substream

CHECKPOINT_VERSION = 1
_MIX_SEED_STREAM = 5


@dataclass(frozen=True)
class EncoderConfig:
    """MLP shape: affine+rectifier hidden layers, affine output head whose
    rows are projected to unit norm."""

    input_dim: int
    hidden_dims: tuple = (64, 64)
    embed_dim: int = 16

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if self.input_dim < 1 or any(h < 1 for h in self.hidden_dims):
            raise InvalidArgumentError("all layer widths must be >= 1")
        if self.embed_dim < 2:
            raise InvalidArgumentError("embed_dim must be >= 2")

    @property
    def layer_dims(self) -> list:
        return [self.input_dim, *self.hidden_dims, self.embed_dim]


@dataclass
class MlpParams:
    """Per-layer weight matrices (in x out) and bias vectors."""

    weights: list
    biases: list

    def as_list(self) -> list:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out

    def decay_mask(self) -> list:
        # Weight decay applies to weight matrices, never to biases.
        return [True, False] * len(self.weights)

    @classmethod
    def from_list(cls, arrays) -> "MlpParams":
        return cls(weights=list(arrays[0::2]), biases=list(arrays[1::2]))

    def copy(self) -> "MlpParams":
        return MlpParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])


@dataclass
class ProbeParams:
    """Linear regression head on the embedding."""

    weight: np.ndarray
    bias: float

    def predict(self, embeddings: np.ndarray) -> np.ndarray:
        return embeddings @ self.weight + self.bias


@dataclass
class OptimState:
    """Adam accumulators matching a parameter list."""

    m: list
    v: list
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, arrays) -> "OptimState":
        return cls(m=[np.zeros_like(a) for a in arrays],
                   v=[np.zeros_like(a) for a in arrays])


@dataclass(frozen=True)
class TrainConfig:
    pretrain_epochs: int = 200
    probe_epochs: int = 100
    batch_size: int = 64
    base_lr: float = 1e-3
    weight_decay: float = 1e-4
    clip_norm: float = 1.0
    warmup_epochs: int = 10
    min_lr: float = 1e-5
    seed: int = 0

    def __post_init__(self):
        positive = {
            "pretrain_epochs": self.pretrain_epochs,
            "probe_epochs": self.probe_epochs,
            "batch_size": self.batch_size,
            "base_lr": self.base_lr,
            "clip_norm": self.clip_norm,
            "min_lr": self.min_lr,
        }
        for name, value in positive.items():
            if not value > 0:
                raise InvalidArgumentError(f"{name} must be positive")
        if self.weight_decay < 0 or self.warmup_epochs < 0 or self.seed < 0:
            raise InvalidArgumentError("weight_decay, warmup_epochs, seed must be >= 0")
        if self.warmup_epochs >= self.pretrain_epochs:
            raise InvalidArgumentError("warmup_epochs must be < pretrain_epochs")


@dataclass
class ForwardCache:
    """Activations needed by the backward pass."""

    layer_inputs: list  # input to each affine layer
    pre_activations: list  # hidden-layer pre-rectifier values
    prenorm: np.ndarray
    norms: np.ndarray


def init_mlp_params(config: EncoderConfig, seed: int) -> MlpParams:
    """Fan-in-scaled Gaussian init for rectifier layers, zero biases."""
    rng = substream(seed, INIT_STREAM)
    dims = config.layer_dims
    weights, biases = [], []
    for i, (d_in, d_out) in enumerate(zip(dims[:-1], dims[1:])):
        gain = 2.0 if i < len(dims) - 2 else 1.0
        weights.append(rng.normal(scale=math.sqrt(gain / d_in), size=(d_in, d_out)))
        biases.append(np.zeros(d_out))
    return MlpParams(weights=weights, biases=biases)


def encoder_forward(params: MlpParams, X: np.ndarray):
    """Run the MLP and project rows to unit norm.

    Returns ``(prenorm, embeddings, cache)``.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != params.weights[0].shape[0]:
        raise InvalidArgumentError(
            f"input must be 2-D with {params.weights[0].shape[0]} columns"
        )
    layer_inputs = [X]
    pre_activations = []
    h = X
    n_layers = len(params.weights)
    for i in range(n_layers - 1):
        pre = h @ params.weights[i] + params.biases[i]
        pre_activations.append(pre)
        h = np.maximum(pre, 0.0)
        layer_inputs.append(h)
    prenorm = h @ params.weights[-1] + params.biases[-1]
    embeddings = normalize_embeddings(prenorm)
    norms = np.linalg.norm(prenorm, axis=1)
    cache = ForwardCache(layer_inputs=layer_inputs, pre_activations=pre_activations,
                         prenorm=prenorm, norms=norms)
    return prenorm, embeddings, cache


def encoder_backward(params: MlpParams, cache: ForwardCache, dL_dprenorm: np.ndarray) -> MlpParams:
    """Reverse-mode pass from the pre-normalization output to all
    parameters.  Returns gradients shaped like ``params``."""
    if len(cache.layer_inputs) != len(params.weights):
        raise ContractViolationError("cache does not match the parameter stack")
    if dL_dprenorm.shape != cache.prenorm.shape:
        raise ContractViolationError("upstream gradient shape does not match the cached forward")
    d_weights = [None] * len(params.weights)
    d_biases = [None] * len(params.biases)
    delta = np.asarray(dL_dprenorm, dtype=float)
    for i in reversed(range(len(params.weights))):
        d_weights[i] = cache.layer_inputs[i].T @ delta
        d_biases[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ params.weights[i].T) * (cache.pre_activations[i - 1] > 0)
    return MlpParams(weights=d_weights, biases=d_biases)


def clip_global_norm(grads: list, max_norm: float) -> list:
    """Scale the whole gradient list so its global L2 norm is <= max_norm."""
    total = math.sqrt(math.fsum(float(np.sum(g * g)) for g in grads))
    if total > max_norm and total > 0:
        scale = max_norm / total
        return [g * scale for g in grads]
    return list(grads)


def adam_step(arrays: list, grads: list, state: OptimState, lr: float,
              *, clip_norm: float, weight_decay: float, decay_mask: list):
    """One Adam update with global-norm clipping and decoupled weight
    decay (applied to entries flagged in ``decay_mask`` only)."""
    if len(arrays) != len(grads) or len(arrays) != len(state.m):
        raise InvalidArgumentError("parameter, gradient, and state lists must align")
    clipped = clip_global_norm(grads, clip_norm)
    t = state.step + 1
    b1, b2, eps = state.beta1, state.beta2, state.eps
    new_arrays, new_m, new_v = [], [], []
    for a, g, m, v, decay in zip(arrays, clipped, state.m, state.v, decay_mask):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        update = lr * m_hat / (np.sqrt(v_hat) + eps)
        if decay and weight_decay > 0:
            update = update + lr * weight_decay * a
        new_arrays.append(a - update)
        new_m.append(m)
        new_v.append(v)
    return new_arrays, replace(state, m=new_m, v=new_v, step=t)


def lr_at(epoch: int, config: TrainConfig, total_epochs: int | None = None) -> float:
    """Linear warmup to the base rate, then cosine decay to the floor.

    Defined on [0, total]; the endpoint evaluates to ``min_lr`` exactly
    (training loops use epochs 0..total-1).
    """
    total = config.pretrain_epochs if total_epochs is None else total_epochs
    if not 0 <= epoch <= total:
        raise InvalidArgumentError(f"epoch {epoch} outside [0, {total}]")
    warmup = min(config.warmup_epochs, total - 1)
    if epoch < warmup:
        return config.base_lr * epoch / warmup
    t = epoch - warmup
    T = total - warmup
    return config.min_lr + 0.5 * (config.base_lr - config.min_lr) * (1 + math.cos(t * math.pi / T))


def _train_batches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        chunk = order[start:start + batch_size]
        if chunk.size >= 2:
            yield chunk


@dataclass
class PretrainResult:
    params: MlpParams
    history: list  # one dict per epoch
    label_range: LabelRange


def pretrain(
    dataset: Dataset,
    encoder_cfg: EncoderConfig,
    train_cfg: TrainConfig,
    neg_cfg: MixNegConfig | None,
    pos_cfg: MixPosConfig | None,
    loss_cfg: LossConfig,
    rule: QuantizationRule = QuantizationRule(),
    use_group_constraint: bool = False,
) -> PretrainResult:
    """Contrastive pretraining loop.

    Per batch: encode, normalize, build contrast sets, evaluate the loss,
    chain its gradient through the encoder, and take one Adam step.  The
    label range is computed once from the train split and frozen into the
    loss configuration.  Logs per epoch: mean loss, learning rate, mean
    positive logit, and mean of the hardest negative logits.
    """
    X, y, grp = dataset.subset_arrays("train")
    if np.unique(y).size < 2:
        raise InvalidArgumentError("training set needs >= 2 distinct labels")
    rng_range = label_range(y)
    loss_cfg = replace(loss_cfg, label_range=rng_range)
    if not loss_cfg.use_mix_neg:
        neg_cfg = None
    if not loss_cfg.use_mix_pos:
        pos_cfg = None
    constraint = grp if (use_group_constraint and grp is not None) else None

    params = init_mlp_params(encoder_cfg, train_cfg.seed)
    state = OptimState.for_params(params.as_list())
    mask = params.decay_mask()
    history = []
    for epoch in range(train_cfg.pretrain_epochs):
        lr = lr_at(epoch, train_cfg)
        shuffle_rng = substream(train_cfg.seed, SHUFFLE_STREAM, epoch)
        losses, pos_logits, hard_neg = [], [], []
        for b, idx in enumerate(_train_batches(X.shape[0], train_cfg.batch_size, shuffle_rng)):
            prenorm, z, cache = encoder_forward(params, X[idx])
            batch = LabeledBatch(z, y[idx], normalized=True)
            groups = group_by_label(batch.labels, rule)
            mix_seed = int(substream(train_cfg.seed, _MIX_SEED_STREAM, epoch, b).integers(2 ** 62))
            batch_constraint = None if constraint is None else constraint[idx]
            sets = build_contrast_sets(batch, groups, neg_cfg, pos_cfg, seed=mix_seed,
                                       group_constraint=batch_constraint, rule=rule)
            out = supremix_loss(batch, sets, loss_cfg)
            dV = out.grad / cache.norms[:, None]
            grads = encoder_backward(params, cache, dV)
            new_arrays, state = adam_step(
                params.as_list(), grads.as_list(), state, lr,
                clip_norm=train_cfg.clip_norm, weight_decay=train_cfg.weight_decay,
                decay_mask=mask,
            )
            params = MlpParams.from_list(new_arrays)
            losses.append(out.loss)
            pos_logits.append(out.avg_pos_logit)
            hard_neg.append(np.mean(out.top_k_neg_logits) if out.top_k_neg_logits else math.nan)
        with np.errstate(invalid="ignore"):
            history.append({
                "epoch": epoch,
                "loss": float(np.mean(losses)),
                "lr": lr,
                "avg_pos_logit": float(np.nanmean(pos_logits)) if not all(map(math.isnan, pos_logits)) else math.nan,
                "mean_top1k_neg_logit": float(np.nanmean(hard_neg)) if not all(map(math.isnan, hard_neg)) else math.nan,
            })
    return PretrainResult(params=params, history=history, label_range=rng_range)


def embed_dataset(params: MlpParams, inputs: np.ndarray) -> np.ndarray:
    _, z, _ = encoder_forward(params, inputs)
    return z


def linear_probe(
    params: MlpParams,
    dataset: Dataset,
    train_cfg: TrainConfig,
    embeddings_override: dict | None = None,
) -> tuple:
    """Train a linear head on frozen embeddings with a mean-absolute-error
    objective; returns ``(ProbeParams, Metrics)`` on the test split.

    ``embeddings_override`` may map split names to fixed embedding
    matrices, bypassing the encoder (used to evaluate externally supplied
    representations); ``params`` may then be ``None``.
    """
    def embed(split):
        idx = dataset.indices(split)
        if embeddings_override is not None and split in embeddings_override:
            return np.asarray(embeddings_override[split], dtype=float), dataset.labels[idx]
        return embed_dataset(params, dataset.inputs[idx]), dataset.labels[idx]

    Z_train, y_train = embed("train")
    probe = ProbeParams(weight=np.zeros(Z_train.shape[1]), bias=0.0)
    arrays = [probe.weight, np.array([probe.bias])]
    state = OptimState.for_params(arrays)
    mask = [True, False]
    for epoch in range(train_cfg.probe_epochs):
        lr = lr_at(epoch, train_cfg, total_epochs=train_cfg.probe_epochs)
        shuffle_rng = substream(train_cfg.seed, SHUFFLE_STREAM, 10_000 + epoch)
        for idx in _train_batches(Z_train.shape[0], train_cfg.batch_size, shuffle_rng):
            zb, yb = Z_train[idx], y_train[idx]
            resid = zb @ arrays[0] + arrays[1][0] - yb
            sign = np.sign(resid) / idx.size
            grads = [zb.T @ sign, np.array([np.sum(sign)])]
            arrays, state = adam_step(arrays, grads, state, lr,
                                      clip_norm=train_cfg.clip_norm, weight_decay=0.0,
                                      decay_mask=mask)
    probe = ProbeParams(weight=arrays[0], bias=float(arrays[1][0]))

    Z_test, y_test = embed("test")
    metrics = compute_metrics(probe.predict(Z_test), y_test)
    return probe, metrics


def vanilla_train(
    dataset: Dataset,
    encoder_cfg: EncoderConfig,
    train_cfg: TrainConfig,
) -> tuple:
    """End-to-end L1 regression baseline: encoder and linear head trained
    jointly.  Returns ``(MlpParams, ProbeParams, history)``."""
    X, y, _ = dataset.subset_arrays("train")
    if np.unique(y).size < 2:
        raise InvalidArgumentError("training set needs >= 2 distinct labels")
    params = init_mlp_params(encoder_cfg, train_cfg.seed)
    head = [np.zeros(encoder_cfg.embed_dim), np.array([0.0])]
    arrays = params.as_list() + head
    mask = params.decay_mask() + [True, False]
    state = OptimState.for_params(arrays)
    n_encoder = len(params.as_list())
    history = []
    for epoch in range(train_cfg.pretrain_epochs):
        lr = lr_at(epoch, train_cfg)
        shuffle_rng = substream(train_cfg.seed, SHUFFLE_STREAM, epoch)
        losses = []
        for idx in _train_batches(X.shape[0], train_cfg.batch_size, shuffle_rng):
            params = MlpParams.from_list(arrays[:n_encoder])
            w, b = arrays[n_encoder], arrays[n_encoder + 1]
            prenorm, z, cache = encoder_forward(params, X[idx])
            resid = z @ w + b[0] - y[idx]
            losses.append(float(np.mean(np.abs(resid))))
            dpred = np.sign(resid) / idx.size
            dw = z.T @ dpred
            db = np.array([np.sum(dpred)])
            dz = dpred[:, None] * w[None, :]
            inner = np.sum(z * dz, axis=1, keepdims=True)
            dV = (dz - inner * z) / cache.norms[:, None]
            enc_grads = encoder_backward(params, cache, dV)
            arrays, state = adam_step(arrays, enc_grads.as_list() + [dw, db], state, lr,
                                      clip_norm=train_cfg.clip_norm,
                                      weight_decay=train_cfg.weight_decay, decay_mask=mask)
        history.append({"epoch": epoch, "loss": float(np.mean(losses)), "lr": lr})
    params = MlpParams.from_list(arrays[:n_encoder])
    probe = ProbeParams(weight=arrays[n_encoder], bias=float(arrays[n_encoder + 1][0]))
    return params, probe, history


def save_checkpoint(path: str, encoder_cfg: EncoderConfig, params: MlpParams,
                    rng: LabelRange, config_echo: dict | None = None,
                    probe: ProbeParams | None = None) -> None:
    """Write a versioned JSON checkpoint with row-major parameter arrays
    and a stable field order."""
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "config": config_echo or {},
        "label_range": {"m_min": rng.m_min, "m_max": rng.m_max},
        "encoder": {
            "input_dim": encoder_cfg.input_dim,
            "hidden_dims": list(encoder_cfg.hidden_dims),
            "embed_dim": encoder_cfg.embed_dim,
        },
        "layers": [
            {"weight": w.tolist(), "bias": b.tolist()}
            for w, b in zip(params.weights, params.biases)
        ],
    }
    if probe is not None:
        payload["probe"] = {"weight": probe.weight.tolist(), "bias": probe.bias}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def load_checkpoint(path: str):
    """Read a checkpoint; returns ``(encoder_cfg, params, label_range,
    config_echo, probe_or_None)``."""
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("format_version") != CHECKPOINT_VERSION:
        raise CheckpointFormatError(
            f"{path}: unsupported checkpoint version {payload.get('format_version')!r}"
        )
    enc = payload["encoder"]
    encoder_cfg = EncoderConfig(input_dim=enc["input_dim"],
                                hidden_dims=tuple(enc["hidden_dims"]),
                                embed_dim=enc["embed_dim"])
    weights = [np.asarray(layer["weight"], dtype=float) for layer in payload["layers"]]
    biases = [np.asarray(layer["bias"], dtype=float) for layer in payload["layers"]]
    dims = encoder_cfg.layer_dims
    for i, (w, b) in enumerate(zip(weights, biases)):
        if w.shape != (dims[i], dims[i + 1]) or b.shape != (dims[i + 1],):
            raise CheckpointFormatError(f"{path}: layer {i} shape mismatch")
    params = MlpParams(weights=weights, biases=biases)
    rng = LabelRange(payload["label_range"]["m_min"], payload["label_range"]["m_max"])
    probe = None
    if "probe" in payload:
        probe = ProbeParams(weight=np.asarray(payload["probe"]["weight"], dtype=float),
                            bias=float(payload["probe"]["bias"]))
    return encoder_cfg, params, rng, payload.get("config", {}), probe
