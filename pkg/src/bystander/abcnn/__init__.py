"""Adapted balanced multi-task attribute classifier at desk scale."""

from .loss import (
    AdaptedWeights,
    ClassDistribution,
    DegenerateDistributionError,
    LabeledDataset,
    adapted_weights,
    attribute_accuracy,
    classify,
    compute_distribution,
    hinge_loss,
    loss_gradient,
    mean_accuracy,
    weighted_loss,
)
from .network import (
    CheckpointError,
    GradientCheckResult,
    MicroNetwork,
    backprop,
    forward,
    gradient_check,
    gradient_check_details,
    load_checkpoint,
    save_checkpoint,
)
from .training import (
    DivergenceError,
    EpochRecord,
    TrainConfig,
    average_accuracy,
    exact_fraction_data,
    per_attribute_accuracy,
    predict,
    synthetic_attribute_data,
    trace_to_csv,
    train,
)

__all__ = [
    "AdaptedWeights",
    "CheckpointError",
    "ClassDistribution",
    "DegenerateDistributionError",
    "DivergenceError",
    "EpochRecord",
    "GradientCheckResult",
    "LabeledDataset",
    "MicroNetwork",
    "TrainConfig",
    "adapted_weights",
    "attribute_accuracy",
    "average_accuracy",
    "backprop",
    "classify",
    "compute_distribution",
    "exact_fraction_data",
    "forward",
    "gradient_check",
    "gradient_check_details",
    "hinge_loss",
    "load_checkpoint",
    "loss_gradient",
    "mean_accuracy",
    "per_attribute_accuracy",
    "predict",
    "save_checkpoint",
    "synthetic_attribute_data",
    "trace_to_csv",
    "train",
]
