"""Supervised contrastive regression with embedding-level mixup."""

from .analysis import (
    Metrics,
    NlfdResult,
    ZGapReport,
    bootstrap_gap,
    compute_metrics,
    compute_nlfd,
    ordinality_score,
    track_logits,
    z_gap,
)
from .core import (
    LabelGroups,
    LabelRange,
    LabeledBatch,
    QuantizationRule,
    group_by_label,
    label_range,
    normalize_embeddings,
)
from .data import (
    Dataset,
    PermutationSpec,
    SyntheticSpec,
    filter_label_range,
    gen_synthetic,
    load_csv,
    permute_labels,
    save_csv,
    subsample,
)
from .loss import (
    LossConfig,
    LossOutput,
    dm_weight,
    finite_difference_gradient,
    loss_lower_bound,
    supcon_baseline_loss,
    supremix_loss,
)
from .mixgen import (
    AnchorContrastSet,
    MixNegConfig,
    MixPosConfig,
    MixedEmbedding,
    build_contrast_sets,
    enumerate_mix_pos,
    make_mix_neg,
    sample_lambda1,
    solve_lambda2,
)
from .nn import (
    EncoderConfig,
    MlpParams,
    OptimState,
    ProbeParams,
    TrainConfig,
    adam_step,
    encoder_backward,
    encoder_forward,
    linear_probe,
    lr_at,
    pretrain,
    vanilla_train,
)
from .theory import (
    DmCheckReport,
    InfimumReport,
    check_distance_magnifying,
    check_epsilon_ordered,
    construct_ordered_embeddings,
    infimum_gap,
)

__all__ = [
    "AnchorContrastSet",
    "Dataset",
    "DmCheckReport",
    "EncoderConfig",
    "InfimumReport",
    "LabelGroups",
    "LabelRange",
    "LabeledBatch",
    "LossConfig",
    "LossOutput",
    "Metrics",
    "MixNegConfig",
    "MixPosConfig",
    "MixedEmbedding",
    "MlpParams",
    "NlfdResult",
    "OptimState",
    "PermutationSpec",
    "ProbeParams",
    "QuantizationRule",
    "SyntheticSpec",
    "TrainConfig",
    "ZGapReport",
    "adam_step",
    "bootstrap_gap",
    "build_contrast_sets",
    "check_distance_magnifying",
    "check_epsilon_ordered",
    "compute_metrics",
    "compute_nlfd",
    "construct_ordered_embeddings",
    "dm_weight",
    "encoder_backward",
    "encoder_forward",
    "enumerate_mix_pos",
    "filter_label_range",
    "finite_difference_gradient",
    "gen_synthetic",
    "group_by_label",
    "infimum_gap",
    "label_range",
    "linear_probe",
    "load_csv",
    "loss_lower_bound",
    "lr_at",
    "make_mix_neg",
    "normalize_embeddings",
    "ordinality_score",
    "permute_labels",
    "pretrain",
    "sample_lambda1",
    "save_csv",
    "solve_lambda2",
    "subsample",
    "supcon_baseline_loss",
    "supremix_loss",
    "track_logits",
    "vanilla_train",
    "z_gap",
]
