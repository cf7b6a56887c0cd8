"""Synthetic two-manifold benchmark with exact ground-truth distances.

Each class lives on a low-dimensional manifold embedded in the ambient
feature space: latent z ~ N(0, I_k) is mapped through a seeded D x k matrix
with orthonormal columns (optionally warped by tanh), shifted by a class
offset, and perturbed by isotropic Gaussian noise. The offset between the
two classes is placed orthogonal to the "real" class's subspace so the
"generated" class is genuinely off-manifold, not a translation within it.

Latent and noise draws are paired across the two classes (common random
numbers): record i of either class shares z_i and noise_i. Per-class
marginals are unchanged, and the zero-separation shared-embedding control
becomes exactly class-identical, which is what an honest detector must
score at chance on.

The distance oracle is closed-form. With orthonormal columns W and offset
b, write r = x - b and y = W^T r. The linear manifold distance is
||r - W y||; the tanh-warped manifold {W t : t in (-1,1)^k} adds the
in-subspace shortfall, giving sqrt(||r - W y||^2 + sum(max(|y|-1, 0)^2)).
Both are exact up to float rounding, far inside the 1e-3 contract the
oracle is documented to satisfy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, ShapeError
from .rng import Rng, derive_seed
from .store import FeatureDataset

TAG_REAL = "synth-real"
TAG_GENERATED = "synth-gen"

_STREAM_EMBED_R = 10
_STREAM_EMBED_G = 11
_STREAM_OFFSET = 12
_STREAM_LATENT = 13
_STREAM_NOISE = 14


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of one benchmark instance; fully determines the dataset."""

    dim: int
    latent_dim: int
    n_per_class: int
    separation: float
    noise_sigma: float
    seed: int
    nonlinear: bool = False
    shared_embedding: bool = False

    def __post_init__(self):
        if self.latent_dim < 1 or self.latent_dim * 4 > self.dim:
            raise ArgumentError(
                f"latent dim must be in [1, dim/4], got {self.latent_dim} for dim {self.dim}"
            )
        if self.separation < 0.0:
            raise ArgumentError(f"separation must be >= 0, got {self.separation}")
        if self.noise_sigma < 0.0:
            raise ArgumentError(f"noise sigma must be >= 0, got {self.noise_sigma}")
        if self.n_per_class < 2:
            raise ArgumentError(f"need at least 2 samples per class, got {self.n_per_class}")

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "latent_dim": self.latent_dim,
            "n_per_class": self.n_per_class,
            "separation": self.separation,
            "noise_sigma": self.noise_sigma,
            "seed": self.seed,
            "nonlinear": self.nonlinear,
            "shared_embedding": self.shared_embedding,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        try:
            return cls(
                dim=int(d["dim"]),
                latent_dim=int(d["latent_dim"]),
                n_per_class=int(d["n_per_class"]),
                separation=float(d["separation"]),
                noise_sigma=float(d["noise_sigma"]),
                seed=int(d["seed"]),
                nonlinear=bool(d.get("nonlinear", False)),
                shared_embedding=bool(d.get("shared_embedding", False)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ArgumentError(f"bad synth spec document: {exc}") from None

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _orthonormal_columns(dim: int, k: int, rng: Rng) -> np.ndarray:
    """QR of a seeded Gaussian matrix, signs fixed so the result is canonical."""
    gauss = rng.normal_matrix(dim, k)
    q, r = np.linalg.qr(gauss)
    signs = np.sign(np.diag(r))
    signs[signs == 0.0] = 1.0
    return q * signs


def _embedding(spec: SynthSpec, which: str) -> np.ndarray:
    if which == "r" or spec.shared_embedding:
        return _orthonormal_columns(spec.dim, spec.latent_dim, Rng(derive_seed(spec.seed, _STREAM_EMBED_R)))
    return _orthonormal_columns(spec.dim, spec.latent_dim, Rng(derive_seed(spec.seed, _STREAM_EMBED_G)))


def _offset(spec: SynthSpec) -> np.ndarray:
    """Class offset of norm `separation`, orthogonal to the real-class subspace."""
    if spec.separation == 0.0:
        return np.zeros(spec.dim)
    w_r = _embedding(spec, "r")
    v = Rng(derive_seed(spec.seed, _STREAM_OFFSET)).normals(spec.dim)
    v = v - w_r @ (w_r.T @ v)
    norm = np.linalg.norm(v)
    if norm < 1e-9:  # measure-zero under Gaussian draws
        raise ArgumentError("offset direction degenerated; use another seed")
    return (spec.separation / norm) * v


def generate(spec: SynthSpec) -> FeatureDataset:
    """The benchmark dataset: class r (label 0) block, then class g (label 1)."""
    n, d, k = spec.n_per_class, spec.dim, spec.latent_dim
    z = Rng(derive_seed(spec.seed, _STREAM_LATENT)).normal_matrix(n, k)
    noise = Rng(derive_seed(spec.seed, _STREAM_NOISE)).normal_matrix(n, d) * spec.noise_sigma
    phi = np.tanh(z) if spec.nonlinear else z
    w_r = _embedding(spec, "r")
    w_g = _embedding(spec, "g")
    b_g = _offset(spec)
    feats_r = phi @ w_r.T + noise
    feats_g = phi @ w_g.T + b_g + noise
    features = np.vstack([feats_r, feats_g]).astype(np.float32)
    labels = np.concatenate([np.zeros(n, dtype=np.uint8), np.ones(n, dtype=np.uint8)])
    tags = (TAG_REAL,) * n + (TAG_GENERATED,) * n
    return FeatureDataset(features, labels, tags)


def manifold_distance_oracle(spec: SynthSpec, features: np.ndarray, which: str) -> np.ndarray:
    """Exact distance of each row to the chosen class manifold ('r' or 'g')."""
    if which not in ("r", "g"):
        raise ArgumentError(f"class must be 'r' or 'g', got {which!r}")
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != spec.dim:
        raise ShapeError(f"features must be (N, {spec.dim}), got shape {x.shape}")
    w = _embedding(spec, which)
    b = _offset(spec) if which == "g" else np.zeros(spec.dim)
    r = x - b
    y = r @ w
    off_subspace = r - y @ w.T
    dist_sq = (off_subspace**2).sum(axis=1)
    if spec.nonlinear:
        shortfall = np.maximum(np.abs(y) - 1.0, 0.0)
        dist_sq = dist_sq + (shortfall**2).sum(axis=1)
    return np.sqrt(dist_sq)
