"""Run configuration: TOML-style sectioned files mapped onto the
module-level dataclasses, with validation at load time.

Sections: ``[data]``, ``[mix]``, ``[loss]``, ``[train]``, ``[encoder]``,
and optional ``[verify]`` for the property-check command.  Seeds resolve
in priority order: explicit CLI override, config value, the
``SUPREMIX_SEED`` environment variable, then 0.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace

import tomli

from .core import QuantizationRule
from .errors import ValidationError
from .loss import LossConfig
from .mixgen import MixNegConfig, MixPosConfig, WINDOW_LABEL_DISTANCE, WINDOW_RANK
from .nn import EncoderConfig, TrainConfig

SEED_ENV_VAR = "SUPREMIX_SEED"


@dataclass(frozen=True)
class DataSection:
    kind: str = "helix"
    n: int = 2000
    dim: int = 16
    noise: float = 0.05
    label_grid: int = 41
    seed: int = 0
    csv_path: str | None = None
    label_column: str = "y"
    group_column: str | None = None


@dataclass(frozen=True)
class MixSection:
    alpha: float = 2.0
    beta: float = 8.0
    gamma: float = 5.0
    window_mode: str = WINDOW_RANK
    max_pos_per_anchor: int = 32
    use_group_constraint: bool = False


@dataclass(frozen=True)
class LossSection:
    tau: float = 0.5
    use_dm: bool = True
    use_mix_neg: bool = True
    use_mix_pos: bool = True
    quant_bin_width: float = 0.0


@dataclass(frozen=True)
class TrainSection:
    pretrain_epochs: int = 200
    probe_epochs: int = 100
    batch_size: int = 64
    lr: float = 1e-3
    weight_decay: float = 1e-4
    clip_norm: float = 1.0
    warmup_epochs: int = 10
    min_lr: float = 1e-5
    seed: int | None = None


@dataclass(frozen=True)
class EncoderSection:
    hidden_dims: tuple = (64, 64)
    embed_dim: int = 16


@dataclass(frozen=True)
class VerifySection:
    trials: int = 1000
    grad_batches: int = 20
    taus: tuple = (1.0, 0.5, 0.2, 0.1, 0.05)
    epsilon: float | None = None
    bound_trials: int = 200


@dataclass(frozen=True)
class RunConfig:
    data: DataSection = DataSection()
    mix: MixSection = MixSection()
    loss: LossSection = LossSection()
    train: TrainSection = TrainSection()
    encoder: EncoderSection = EncoderSection()
    verify: VerifySection = VerifySection()

    def resolved_seed(self, override: int | None = None) -> int:
        if override is not None:
            return override
        if self.train.seed is not None:
            return self.train.seed
        env = os.environ.get(SEED_ENV_VAR)
        if env is not None:
            try:
                return int(env)
            except ValueError:
                raise ValidationError(f"{SEED_ENV_VAR} must be an integer, got {env!r}") from None
        return 0

    # Adapters to the dataclasses the modules consume; these constructors
    # re-validate every invariant, so a bad config fails here.
    def mix_neg_config(self) -> MixNegConfig:
        return MixNegConfig(alpha=self.mix.alpha, beta=self.mix.beta)

    def mix_pos_config(self) -> MixPosConfig:
        return MixPosConfig(gamma=self.mix.gamma, window_mode=self.mix.window_mode,
                            max_pos_per_anchor=self.mix.max_pos_per_anchor)

    def loss_config(self) -> LossConfig:
        return LossConfig(tau=self.loss.tau, use_dm=self.loss.use_dm,
                          use_mix_neg=self.loss.use_mix_neg,
                          use_mix_pos=self.loss.use_mix_pos)

    def quant_rule(self) -> QuantizationRule:
        return QuantizationRule(bin_width=self.loss.quant_bin_width)

    def train_config(self, seed: int) -> TrainConfig:
        t = self.train
        return TrainConfig(pretrain_epochs=t.pretrain_epochs, probe_epochs=t.probe_epochs,
                           batch_size=t.batch_size, base_lr=t.lr,
                           weight_decay=t.weight_decay, clip_norm=t.clip_norm,
                           warmup_epochs=t.warmup_epochs, min_lr=t.min_lr, seed=seed)

    def encoder_config(self, input_dim: int) -> EncoderConfig:
        return EncoderConfig(input_dim=input_dim, hidden_dims=self.encoder.hidden_dims,
                             embed_dim=self.encoder.embed_dim)


_SECTIONS = {
    "data": DataSection,
    "mix": MixSection,
    "loss": LossSection,
    "train": TrainSection,
    "encoder": EncoderSection,
    "verify": VerifySection,
}


def _build_section(name: str, cls, values: dict):
    valid = {f for f in cls.__dataclass_fields__}
    unknown = set(values) - valid
    if unknown:
        raise ValidationError(f"[{name}] has unknown keys: {sorted(unknown)}")
    coerced = dict(values)
    for key in ("hidden_dims", "taus"):
        if key in coerced:
            coerced[key] = tuple(coerced[key])
    try:
        return cls(**coerced)
    except TypeError as exc:
        raise ValidationError(f"[{name}]: {exc}") from None


def parse_config(text: str) -> RunConfig:
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ValidationError(f"config parse error: {exc}") from None
    unknown = set(raw) - set(_SECTIONS)
    if unknown:
        raise ValidationError(f"unknown config sections: {sorted(unknown)}")
    sections = {}
    for name, cls in _SECTIONS.items():
        sections[name] = _build_section(name, cls, raw.get(name, {}))
    config = RunConfig(**sections)
    validate_config(config)
    return config


def load_config(path: str) -> RunConfig:
    try:
        with open(path) as fh:
            return parse_config(fh.read())
    except FileNotFoundError:
        raise ValidationError(f"config file not found: {path}") from None


def validate_config(config: RunConfig) -> None:
    """Run every section through its owning module's invariants."""
    problems = []
    try:
        config.mix_neg_config()
        config.mix_pos_config()
    except Exception as exc:
        problems.append(f"mix: {exc}")
    try:
        config.loss_config()
        config.quant_rule()
    except Exception as exc:
        problems.append(f"loss: {exc}")
    try:
        config.train_config(config.resolved_seed())
    except Exception as exc:
        problems.append(f"train: {exc}")
    try:
        config.encoder_config(input_dim=max(1, config.data.dim))
    except Exception as exc:
        problems.append(f"encoder: {exc}")
    v = config.verify
    if v.trials < 1 or v.grad_batches < 1 or v.bound_trials < 1:
        problems.append("verify: trials, grad_batches, bound_trials must be >= 1")
    if not v.taus or any(t <= 0 for t in v.taus):
        problems.append("verify: taus must be positive")
    elif any(b >= a for a, b in zip(v.taus, v.taus[1:])):
        problems.append("verify: taus must be strictly decreasing")
    if v.epsilon is not None and not v.epsilon > 0:
        problems.append("verify: epsilon must be positive")
    if config.data.kind not in ("helix", "smooth_random") and config.data.csv_path is None:
        problems.append(f"data: unknown kind {config.data.kind!r}")
    for name, value in (("n", config.data.n), ("dim", config.data.dim),
                        ("label_grid", config.data.label_grid)):
        if value < 1:
            problems.append(f"data: {name} must be positive")
    if config.data.noise < 0:
        problems.append("data: noise must be >= 0")
    if problems:
        raise ValidationError("invalid configuration: " + "; ".join(problems))


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_format_value(v) for v in value) + "]"
    raise ValidationError(f"cannot serialize config value {value!r}")


def serialize_config(config: RunConfig) -> str:
    """Render a config back to TOML text with a stable key order.

    ``parse_config(serialize_config(c))`` equals ``c``, making the
    load/serialize round trip idempotent.
    """
    lines = []
    for name in _SECTIONS:
        section = getattr(config, name)
        lines.append(f"[{name}]")
        for fname in section.__dataclass_fields__:
            value = getattr(section, fname)
            if value is None:
                continue  # TOML has no null; absent key means default/unset
            lines.append(f"{fname} = {_format_value(value)}")
        lines.append("")
    return "\n".join(lines)


def config_echo(config: RunConfig) -> dict:
    """JSON-ready nested dict of the full configuration."""
    echo = {}
    for name in _SECTIONS:
        section = getattr(config, name)
        echo[name] = {
            fname: (list(v) if isinstance(v := getattr(section, fname), tuple) else v)
            for fname in section.__dataclass_fields__
        }
    return echo
