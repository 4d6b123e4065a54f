"""Label-occurrence-balanced mixup for long-tailed classification."""

from .longtail import (
    ClassCounts,
    ClassIndex,
    DatasetManifest,
    ImbalanceProfile,
    LabeledDataset,
    apply_manifest,
    exponential_counts,
    imbalance_ratio,
    load_cifar10_binary,
    longtail_split,
    pareto_counts,
    step_counts,
    subsample_longtail,
    synth_gaussian_mixture,
    write_cifar10_binary,
)
from .mixer import (
    MixConfig,
    MixedBatch,
    MixedExample,
    MixKind,
    SoftLabel,
    make_batch,
    make_batch_lob,
    make_batch_vanilla,
    mix_pair,
    sample_lambda,
)
from .occurrence import (
    OccurrenceReport,
    SamplerCombo,
    analytic_occurrence,
    balance_ratio,
    empirical_occurrence,
    head_label_incidence,
)
from .samplers import (
    CB,
    IB,
    SamplerKind,
    SamplerState,
    SamplingDistribution,
    next_index,
    pair_stream,
    sample_batch,
    selection_probability,
)
from .trainer import (
    EvalReport,
    ModelParams,
    Strategy,
    TrainConfig,
    evaluate,
    forward,
    grad,
    soft_cross_entropy,
    train,
)

__all__ = [
    "CB",
    "ClassCounts",
    "ClassIndex",
    "DatasetManifest",
    "EvalReport",
    "IB",
    "ImbalanceProfile",
    "LabeledDataset",
    "MixConfig",
    "MixKind",
    "MixedBatch",
    "MixedExample",
    "ModelParams",
    "OccurrenceReport",
    "SamplerCombo",
    "SamplerKind",
    "SamplerState",
    "SamplingDistribution",
    "SoftLabel",
    "Strategy",
    "TrainConfig",
    "analytic_occurrence",
    "apply_manifest",
    "balance_ratio",
    "empirical_occurrence",
    "evaluate",
    "exponential_counts",
    "forward",
    "grad",
    "head_label_incidence",
    "imbalance_ratio",
    "load_cifar10_binary",
    "longtail_split",
    "make_batch",
    "make_batch_lob",
    "make_batch_vanilla",
    "mix_pair",
    "next_index",
    "pair_stream",
    "pareto_counts",
    "sample_batch",
    "sample_lambda",
    "selection_probability",
    "soft_cross_entropy",
    "step_counts",
    "subsample_longtail",
    "synth_gaussian_mixture",
    "train",
    "write_cifar10_binary",
]
