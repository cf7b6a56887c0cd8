"""The full detector: a linear probe over attribution deviations, trained in
alternation with the manifold model.

Training alternates rounds of two phases: refine the encoder-decoder on the
single-class subset with the L1 deviation loss while the classifier is
frozen, then train the classifier on the deviations of the full two-class
dataset with binary cross-entropy while the encoder-decoder is frozen.
Every shuffle is derived from (seed, phase, round, epoch) alone, with no
RNG state threading across phases: runs are exactly reproducible, and the
manifold fit is bitwise independent of where opposite-class records sit in
the incoming file.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .acm import (
    AcmModel,
    acm_train_epoch,
    attribution_deviation,
    build_acm,
    normalize_rows,
    DEFAULT_HIDDEN_DIM,
)
from .errors import ArgumentError, ShapeError
from .nn import (
    AdamState,
    DEFAULT_LEARNING_RATE,
    Mlp,
    _backward_from_cache,
    _forward_cached,
    adam_step,
    bce_loss,
    init_mlp,
    sigmoid,
)
from .rng import Rng, derive_seed
from .store import AttributionSource, Checkpoint, FeatureDataset, Selector, select_subset

DEFAULT_BATCH_SIZE = 256

_STREAM_ENCODER_INIT = 2
_STREAM_DECODER_INIT = 3
_STREAM_CLASSIFIER_INIT = 4
_STREAM_ACM_SHUFFLE = 5
_STREAM_CLS_SHUFFLE = 6

# predict() clamps sigmoid output away from exact 0/1 (float64 saturates
# past |z| ~ 37) so probabilities stay in the open interval.
_PROB_CLAMP = 1e-12


@dataclass
class DetectorModel:
    """Manifold model plus a linear classifier over its deviations."""

    acm: AcmModel
    classifier: Mlp
    normalize: bool = False

    def __post_init__(self):
        if self.classifier.input_dim != self.acm.feature_dim:
            raise ShapeError(
                f"classifier input dim {self.classifier.input_dim} != feature dim "
                f"{self.acm.feature_dim}"
            )
        if self.classifier.output_dim != 1:
            raise ShapeError("classifier must produce a single logit per sample")


@dataclass
class TrainConfig:
    learning_rate: float = DEFAULT_LEARNING_RATE
    batch_size: int = DEFAULT_BATCH_SIZE
    rounds: int = 10
    acm_epochs_per_round: int = 5
    cls_epochs_per_round: int = 5
    source: AttributionSource = field(
        default_factory=lambda: AttributionSource(Selector.REAL_ONLY)
    )
    seed: int = 0
    normalize: bool = False
    hidden_dim: int = DEFAULT_HIDDEN_DIM
    bottleneck_dim: int | None = None

    def __post_init__(self):
        if self.learning_rate <= 0.0:
            raise ArgumentError(f"learning rate must be > 0, got {self.learning_rate}")
        for name in ("batch_size", "rounds", "acm_epochs_per_round", "cls_epochs_per_round", "hidden_dim"):
            if getattr(self, name) < 1:
                raise ArgumentError(f"{name} must be >= 1, got {getattr(self, name)}")

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "rounds": self.rounds,
            "acm_epochs_per_round": self.acm_epochs_per_round,
            "cls_epochs_per_round": self.cls_epochs_per_round,
            "source": self.source.describe(),
            "seed": self.seed,
            "normalize": self.normalize,
            "hidden_dim": self.hidden_dim,
            "bottleneck_dim": self.bottleneck_dim,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {
            "learning_rate",
            "batch_size",
            "rounds",
            "acm_epochs_per_round",
            "cls_epochs_per_round",
            "source",
            "seed",
            "normalize",
            "hidden_dim",
            "bottleneck_dim",
        }
        unknown = set(d) - known
        if unknown:
            raise ArgumentError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(d)
        if "source" in kwargs:
            kwargs["source"] = AttributionSource.parse(kwargs["source"])
        return cls(**kwargs)


@dataclass
class TrainResult:
    model: DetectorModel
    log: list[dict]


def predict(model: DetectorModel, features: np.ndarray) -> np.ndarray:
    """P(generated) per row: sigmoid of the linear probe over deviations."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != model.acm.feature_dim:
        raise ShapeError(
            f"features must be (N, {model.acm.feature_dim}), got shape {features.shape}"
        )
    if model.normalize:
        features = normalize_rows(features)
    dev = attribution_deviation(model.acm, features)
    logits, _ = _forward_cached(model.classifier, dev)
    p = sigmoid(logits.reshape(-1))
    return np.clip(p, _PROB_CLAMP, 1.0 - _PROB_CLAMP)


def classifier_train_epoch(
    model: DetectorModel,
    dataset: FeatureDataset,
    state: AdamState,
    batch_size: int,
    shuffle_seed: int,
) -> float:
    """One BCE epoch over deviations of the full dataset; only the classifier
    moves (the encoder-decoder is read, never written). Returns the epoch
    mean of per-batch losses, or 0.0 on an empty dataset (skipped)."""
    n = len(dataset)
    if n == 0:
        return 0.0
    if len(np.unique(dataset.labels)) < 2:
        warnings.warn(
            "classifier phase running on a single-label dataset; the loss is "
            "well-defined but the probe cannot learn a boundary",
            stacklevel=2,
        )
    x = dataset.matrix()
    if model.normalize:
        x = normalize_rows(x)
    y = dataset.labels.astype(np.float64)
    perm = Rng(shuffle_seed).shuffle_indices(n)
    losses = []
    for start in range(0, n, batch_size):
        idx = perm[start : start + batch_size]
        dev = attribution_deviation(model.acm, x[idx])
        logits, cache = _forward_cached(model.classifier, dev)
        p = sigmoid(logits.reshape(-1))
        loss, dp = bce_loss(p, y[idx])
        dz = (dp * p * (1.0 - p)).reshape(-1, 1)
        grads, _ = _backward_from_cache(model.classifier, cache, dz)
        adam_step(model.classifier.layers, grads, state)
        losses.append(loss)
    return float(np.mean(losses))


def train(dataset: FeatureDataset, config: TrainConfig) -> TrainResult:
    """Alternating optimization; returns the model and a per-epoch loss log."""
    subset = select_subset(dataset, config.source)
    if len(np.unique(dataset.labels)) < 2:
        warnings.warn(
            "training dataset contains a single label; the classifier phase "
            "will not learn a usable boundary",
            stacklevel=2,
        )
    seed = config.seed
    acm = build_acm(
        dataset.dim,
        rng_encoder=Rng(derive_seed(seed, _STREAM_ENCODER_INIT)),
        rng_decoder=Rng(derive_seed(seed, _STREAM_DECODER_INIT)),
        bottleneck_dim=config.bottleneck_dim,
        hidden_dim=config.hidden_dim,
    )
    classifier = init_mlp(
        [dataset.dim, 1], Rng(derive_seed(seed, _STREAM_CLASSIFIER_INIT))
    )
    model = DetectorModel(acm, classifier, normalize=config.normalize)
    acm_state = AdamState.for_layers(acm.layers, learning_rate=config.learning_rate)
    cls_state = AdamState.for_layers(classifier.layers, learning_rate=config.learning_rate)

    log: list[dict] = []
    for rnd in range(config.rounds):
        for epoch in range(config.acm_epochs_per_round):
            loss = acm_train_epoch(
                acm,
                subset,
                acm_state,
                config.batch_size,
                derive_seed(seed, _STREAM_ACM_SHUFFLE, rnd, epoch),
                normalize=config.normalize,
            )
            log.append({"phase": "acm", "round": rnd, "epoch": epoch, "loss": loss})
        for epoch in range(config.cls_epochs_per_round):
            loss = classifier_train_epoch(
                model,
                dataset,
                cls_state,
                config.batch_size,
                derive_seed(seed, _STREAM_CLS_SHUFFLE, rnd, epoch),
            )
            log.append({"phase": "classifier", "round": rnd, "epoch": epoch, "loss": loss})
    return TrainResult(model, log)


def to_checkpoint(model: DetectorModel, config: TrainConfig) -> Checkpoint:
    return Checkpoint(
        feature_dim=model.acm.feature_dim,
        bottleneck_dim=model.acm.bottleneck_dim,
        encoder=model.acm.encoder,
        decoder=model.acm.decoder,
        classifier=model.classifier,
        config=config.to_dict(),
        seed=config.seed,
        normalize=model.normalize,
    )


def model_from_checkpoint(checkpoint: Checkpoint) -> DetectorModel:
    acm = AcmModel(
        checkpoint.encoder,
        checkpoint.decoder,
        checkpoint.feature_dim,
        checkpoint.bottleneck_dim,
    )
    return DetectorModel(acm, checkpoint.classifier, normalize=checkpoint.normalize)
