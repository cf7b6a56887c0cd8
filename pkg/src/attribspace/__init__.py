"""Single-class attribution-space detection for AI-generated image features.

Fit an encoder-decoder to one class's feature manifold, represent every
sample by the elementwise absolute reconstruction residual (its
"attribution deviation"), and train a linear probe on those deviations.
Off-manifold samples produce large deviations, so the representation
amplifies the separation between the fitted class and everything else.
"""

from .acm import (
    AcmModel,
    acm_train_epoch,
    attribution_deviation,
    build_acm,
    default_bottleneck_dim,
)
from .detector import (
    DetectorModel,
    TrainConfig,
    TrainResult,
    classifier_train_epoch,
    model_from_checkpoint,
    predict,
    to_checkpoint,
    train,
)
from .errors import (
    ArgumentError,
    AttribspaceError,
    CorruptionError,
    EmptyInputError,
    EmptySubsetError,
    FormatError,
    ShapeError,
    UndefinedMetricError,
    ValidationError,
)
from .metrics import (
    MetricsReport,
    SeparabilityReport,
    accuracy_suite,
    average_precision,
    decide,
    separability,
)
from .nn import (
    Activation,
    AdamState,
    Layer,
    LayerGrads,
    Mlp,
    adam_step,
    bce_loss,
    init_mlp,
    l1_loss,
    mlp_backward,
    mlp_forward,
    sigmoid,
)
from .rng import Rng, derive_seed
from .store import (
    AttributionSource,
    Checkpoint,
    FeatureDataset,
    Selector,
    load_checkpoint,
    load_features,
    save_checkpoint,
    save_features,
    select_subset,
    split,
)
from .synthbench import SynthSpec, generate, manifold_distance_oracle

__version__ = "0.1.0"

__all__ = [
    "AcmModel",
    "Activation",
    "AdamState",
    "ArgumentError",
    "AttribspaceError",
    "AttributionSource",
    "Checkpoint",
    "CorruptionError",
    "DetectorModel",
    "EmptyInputError",
    "EmptySubsetError",
    "FeatureDataset",
    "FormatError",
    "Layer",
    "LayerGrads",
    "MetricsReport",
    "Mlp",
    "Rng",
    "Selector",
    "SeparabilityReport",
    "ShapeError",
    "SynthSpec",
    "TrainConfig",
    "TrainResult",
    "UndefinedMetricError",
    "ValidationError",
    "accuracy_suite",
    "acm_train_epoch",
    "adam_step",
    "attribution_deviation",
    "average_precision",
    "bce_loss",
    "build_acm",
    "classifier_train_epoch",
    "decide",
    "default_bottleneck_dim",
    "derive_seed",
    "generate",
    "init_mlp",
    "l1_loss",
    "load_checkpoint",
    "load_features",
    "manifold_distance_oracle",
    "mlp_backward",
    "mlp_forward",
    "model_from_checkpoint",
    "predict",
    "save_checkpoint",
    "save_features",
    "select_subset",
    "separability",
    "sigmoid",
    "split",
    "to_checkpoint",
    "train",
]
