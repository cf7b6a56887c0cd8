"""Single-class manifold model: an encoder-decoder fit to one class.

The model reconstructs feature vectors through a narrow bottleneck; the
elementwise absolute reconstruction residual ("attribution deviation") is
the representation everything downstream consumes. Samples from the class
the model was fit to reconstruct well and produce small deviations; samples
from elsewhere land off the learned manifold and produce large ones.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyInputError, ShapeError, ValidationError
from .nn import (
    AdamState,
    Mlp,
    _backward_from_cache,
    _forward_cached,
    adam_step,
    init_mlp,
    l1_loss,
)
from .rng import Rng
from .store import FeatureDataset

DEFAULT_HIDDEN_DIM = 512


def default_bottleneck_dim(feature_dim: int) -> int:
    """64 for 768-wide encoder features, else feature_dim // 8 (at least 2)."""
    return 64 if feature_dim == 768 else max(2, feature_dim // 8)


@dataclass
class AcmModel:
    """Encoder (D -> hidden -> k) and decoder (k -> hidden -> D), k <= D/4."""

    encoder: Mlp
    decoder: Mlp
    feature_dim: int
    bottleneck_dim: int

    def __post_init__(self):
        if self.bottleneck_dim * 4 > self.feature_dim:
            raise ValidationError(
                f"bottleneck dim {self.bottleneck_dim} exceeds feature dim "
                f"{self.feature_dim} / 4"
            )
        if self.encoder.input_dim != self.feature_dim or self.encoder.output_dim != self.bottleneck_dim:
            raise ValidationError("encoder dims do not match the declared model dims")
        if self.decoder.input_dim != self.bottleneck_dim or self.decoder.output_dim != self.feature_dim:
            raise ValidationError("decoder dims do not match the declared model dims")

    @property
    def layers(self) -> list:
        return self.encoder.layers + self.decoder.layers

    def digest(self) -> str:
        return self.encoder.digest() + self.decoder.digest()


def build_acm(
    feature_dim: int,
    rng_encoder: Rng,
    rng_decoder: Rng,
    bottleneck_dim: int | None = None,
    hidden_dim: int = DEFAULT_HIDDEN_DIM,
) -> AcmModel:
    k = default_bottleneck_dim(feature_dim) if bottleneck_dim is None else bottleneck_dim
    encoder = init_mlp([feature_dim, hidden_dim, k], rng_encoder)
    decoder = init_mlp([k, hidden_dim, feature_dim], rng_decoder)
    return AcmModel(encoder, decoder, feature_dim, k)


def _check_features(model: AcmModel, features: np.ndarray) -> np.ndarray:
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != model.feature_dim:
        raise ShapeError(
            f"features must be (N, {model.feature_dim}), got shape {features.shape}"
        )
    return features


def reconstruct(model: AcmModel, features: np.ndarray) -> np.ndarray:
    features = _check_features(model, features)
    code, _ = _forward_cached(model.encoder, features)
    recon, _ = _forward_cached(model.decoder, code)
    return recon


def attribution_deviation(model: AcmModel, features: np.ndarray) -> np.ndarray:
    """Elementwise |features - reconstruction|; shape (N, D), all entries >= 0."""
    features = _check_features(model, features)
    deviation = np.abs(features - reconstruct(model, features))
    if not np.isfinite(deviation).all():
        raise ValidationError("attribution deviation produced non-finite values")
    return deviation


def normalize_rows(features: np.ndarray) -> np.ndarray:
    """L2-normalize each row; zero rows pass through unchanged."""
    norms = np.linalg.norm(features, axis=1, keepdims=True)
    return features / np.where(norms == 0.0, 1.0, norms)


def acm_train_epoch(
    model: AcmModel,
    subset: FeatureDataset,
    state: AdamState,
    batch_size: int,
    shuffle_seed: int,
    normalize: bool = False,
) -> float:
    """One pass of Adam over shuffled mini-batches of the single-class subset.

    Minimizes the mean per-sample L1 norm of the attribution deviation and
    returns the epoch mean of the per-batch losses. The shuffle depends only
    on (shuffle_seed, subset size), never on incoming record order.
    """
    n = len(subset)
    if n == 0:
        raise EmptyInputError("cannot train on an empty subset")
    x = subset.matrix()
    if normalize:
        x = normalize_rows(x)
    x = _check_features(model, x)
    perm = Rng(shuffle_seed).shuffle_indices(n)
    layers = model.layers
    losses = []
    for start in range(0, n, batch_size):
        xb = x[perm[start : start + batch_size]]
        code, enc_cache = _forward_cached(model.encoder, xb)
        recon, dec_cache = _forward_cached(model.decoder, code)
        loss, d_residual = l1_loss(xb - recon)
        dec_grads, d_code = _backward_from_cache(model.decoder, dec_cache, -d_residual)
        enc_grads, _ = _backward_from_cache(model.encoder, enc_cache, d_code)
        adam_step(layers, enc_grads + dec_grads, state)
        losses.append(loss)
    return float(np.mean(losses))
