"""Dense numeric core: small MLPs, their gradients, losses, and Adam.

Everything runs in float64. Batches are row-major (one sample per row) and
a layer with weight shape ``(out_dim, in_dim)`` computes
``act(batch @ weight.T + bias)``. Conventions at the non-smooth points:
ReLU'(0) = 0 and sign(0) = 0.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import EmptyInputError, ShapeError, ValidationError
from .rng import Rng

BCE_EPS = 1e-7

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8
DEFAULT_LEARNING_RATE = 2e-4


class Activation(Enum):
    RELU = "relu"
    IDENTITY = "identity"


@dataclass
class Layer:
    """One dense layer: ``act(x @ weight.T + bias)``."""

    weight: np.ndarray  # (out_dim, in_dim)
    bias: np.ndarray  # (out_dim,)
    activation: Activation

    def __post_init__(self):
        self.weight = np.ascontiguousarray(self.weight, dtype=np.float64)
        self.bias = np.ascontiguousarray(self.bias, dtype=np.float64)
        if self.weight.ndim != 2:
            raise ShapeError(f"layer weight must be 2-D, got shape {self.weight.shape}")
        if self.bias.shape != (self.weight.shape[0],):
            raise ShapeError(
                f"bias length {self.bias.shape} does not match weight output dim "
                f"{self.weight.shape[0]}"
            )

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]


@dataclass
class Mlp:
    """An ordered stack of dense layers with compatible dimensions."""

    layers: list[Layer]

    def __post_init__(self):
        if not self.layers:
            raise ShapeError("an MLP needs at least one layer")
        for k in range(1, len(self.layers)):
            prev, cur = self.layers[k - 1], self.layers[k]
            if cur.in_dim != prev.out_dim:
                raise ShapeError(
                    f"layer {k} expects input dim {cur.in_dim} but layer {k - 1} "
                    f"produces {prev.out_dim}"
                )

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim

    def copy(self) -> "Mlp":
        return Mlp(
            [Layer(l.weight.copy(), l.bias.copy(), l.activation) for l in self.layers]
        )

    def digest(self) -> str:
        """SHA-256 over all parameter bytes; used by freeze-contract tests."""
        h = hashlib.sha256()
        for layer in self.layers:
            h.update(layer.weight.tobytes())
            h.update(layer.bias.tobytes())
        return h.hexdigest()


@dataclass
class LayerGrads:
    """Gradient (or moment) arrays shaped like one layer's parameters."""

    weight: np.ndarray
    bias: np.ndarray


def init_mlp(
    dims: list[int],
    rng: Rng,
    hidden_activation: Activation = Activation.RELU,
    output_activation: Activation = Activation.IDENTITY,
) -> Mlp:
    """Glorot-uniform weights in +-sqrt(6/(fan_in+fan_out)), zero biases."""
    if len(dims) < 2:
        raise ShapeError("need at least input and output dims")
    layers = []
    last = len(dims) - 2
    for k in range(len(dims) - 1):
        fan_in, fan_out = dims[k], dims[k + 1]
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weight = (rng.uniform_matrix(fan_out, fan_in) * 2.0 - 1.0) * bound
        bias = np.zeros(fan_out)
        act = output_activation if k == last else hidden_activation
        layers.append(Layer(weight, bias, act))
    return Mlp(layers)


def _as_batch(mlp: Mlp, batch: np.ndarray) -> np.ndarray:
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2:
        raise ShapeError(f"batch must be 2-D, got shape {batch.shape}")
    if batch.shape[1] != mlp.input_dim:
        raise ShapeError(
            f"layer 0 expects input dim {mlp.input_dim}, got {batch.shape[1]}"
        )
    return batch


def _forward_cached(mlp: Mlp, batch: np.ndarray):
    """Forward pass keeping (layer input, pre-activation) per layer."""
    x = _as_batch(mlp, batch)
    caches = []
    for layer in mlp.layers:
        z = x @ layer.weight.T + layer.bias
        caches.append((x, z))
        x = np.maximum(z, 0.0) if layer.activation is Activation.RELU else z
    return x, caches


def mlp_forward(mlp: Mlp, batch: np.ndarray) -> np.ndarray:
    out, _ = _forward_cached(mlp, batch)
    if not np.isfinite(out).all():
        raise ValidationError("forward pass produced non-finite values")
    return out


def _backward_from_cache(mlp: Mlp, caches, output_grad: np.ndarray):
    grad = np.asarray(output_grad, dtype=np.float64)
    grads: list[LayerGrads | None] = [None] * len(mlp.layers)
    for k in range(len(mlp.layers) - 1, -1, -1):
        layer = mlp.layers[k]
        x_in, z = caches[k]
        dz = grad * (z > 0.0) if layer.activation is Activation.RELU else grad
        grads[k] = LayerGrads(dz.T @ x_in, dz.sum(axis=0))
        grad = dz @ layer.weight
    return grads, grad


def mlp_backward(mlp: Mlp, batch: np.ndarray, output_grad: np.ndarray):
    """Gradients of sum(output * output_grad) w.r.t. parameters and input.

    Returns ``(per-layer LayerGrads, input_grad)``.
    """
    out, caches = _forward_cached(mlp, batch)
    output_grad = np.asarray(output_grad, dtype=np.float64)
    if output_grad.shape != out.shape:
        raise ShapeError(
            f"output_grad shape {output_grad.shape} does not match forward output "
            f"shape {out.shape}"
        )
    return _backward_from_cache(mlp, caches, output_grad)


def l1_loss(residuals: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean over rows of the per-row L1 norm, with its gradient."""
    r = np.asarray(residuals, dtype=np.float64)
    if r.ndim != 2:
        raise ShapeError(f"residuals must be 2-D, got shape {r.shape}")
    rows = r.shape[0]
    if rows == 0:
        raise EmptyInputError("l1_loss needs at least one row")
    loss = float(np.abs(r).sum() / rows)
    grad = np.sign(r) / rows
    return loss, grad


def bce_loss(probabilities: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean binary cross-entropy and its gradient w.r.t. the probabilities.

    Probabilities are clamped to [BCE_EPS, 1 - BCE_EPS] before the log; the
    gradient is taken through the clamp, so it is zero where the clamp is
    active (matching what finite differences see).
    """
    p = np.asarray(probabilities, dtype=np.float64).reshape(-1)
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    if p.shape != y.shape:
        raise ShapeError(f"got {p.shape[0]} probabilities but {y.shape[0]} labels")
    n = p.shape[0]
    if n == 0:
        raise EmptyInputError("bce_loss needs at least one sample")
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValidationError("labels must be 0 or 1")
    pc = np.clip(p, BCE_EPS, 1.0 - BCE_EPS)
    loss = float(np.mean(-y * np.log(pc) - (1.0 - y) * np.log1p(-pc)))
    inside = (p > BCE_EPS) & (p < 1.0 - BCE_EPS)
    grad = np.where(inside, (pc - y) / (pc * (1.0 - pc) * n), 0.0)
    return loss, grad


def sigmoid(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class AdamState:
    """Adam moments for a fixed list of layers. Mutated in place by adam_step."""

    learning_rate: float
    beta1: float
    beta2: float
    epsilon: float
    step: int
    m: list[LayerGrads]
    v: list[LayerGrads]

    @classmethod
    def for_layers(
        cls,
        layers: list[Layer],
        learning_rate: float = DEFAULT_LEARNING_RATE,
        beta1: float = ADAM_BETA1,
        beta2: float = ADAM_BETA2,
        epsilon: float = ADAM_EPSILON,
    ) -> "AdamState":
        m = [LayerGrads(np.zeros_like(l.weight), np.zeros_like(l.bias)) for l in layers]
        v = [LayerGrads(np.zeros_like(l.weight), np.zeros_like(l.bias)) for l in layers]
        return cls(learning_rate, beta1, beta2, epsilon, 0, m, v)


def adam_step(layers: list[Layer], grads: list[LayerGrads], state: AdamState) -> None:
    """One bias-corrected Adam update, applied in place."""
    if len(layers) != len(grads) or len(layers) != len(state.m):
        raise ShapeError(
            f"got {len(layers)} layers, {len(grads)} gradients, "
            f"{len(state.m)} moment slots"
        )
    for layer, g in zip(layers, grads):
        if g.weight.shape != layer.weight.shape or g.bias.shape != layer.bias.shape:
            raise ShapeError(
                f"gradient shape {g.weight.shape}/{g.bias.shape} does not match "
                f"parameter shape {layer.weight.shape}/{layer.bias.shape}"
            )
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    mc = 1.0 - b1**state.step
    vc = 1.0 - b2**state.step
    for layer, g, m, v in zip(layers, grads, state.m, state.v):
        for name in ("weight", "bias"):
            param = getattr(layer, name)
            grad = getattr(g, name)
            mom = getattr(m, name)
            var = getattr(v, name)
            mom *= b1
            mom += (1.0 - b1) * grad
            var *= b2
            var += (1.0 - b2) * grad * grad
            param -= state.learning_rate * (mom / mc) / (np.sqrt(var / vc) + state.epsilon)
            if not np.isfinite(param).all():
                raise ValidationError("adam_step produced non-finite parameters")
