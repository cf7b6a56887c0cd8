"""Frozen image encoders behind a common interface.

Each encoder owns its preprocessing recipe and exposes
``encode(images) -> (N, dim) float32`` over a list of PIL images. Encoder
names are versioned: a given name must produce identical features forever,
so the detector's stored datasets stay comparable.

``clip-vit-l14`` is the default production encoder (a frozen contrastive
vision transformer, 768-d image embeddings) and needs torch + transformers
plus downloadable weights. ``rp768-v1`` is a fully offline deterministic
encoder (a fixed random projection of downsampled pixels, also 768-d) used
for pipeline tests and environments without model weights.
"""

from __future__ import annotations

import numpy as np
from PIL import Image

CLIP_NAME = "clip-vit-l14"
RP_NAME = "rp768-v1"
DEFAULT_ENCODER = CLIP_NAME

_RP_SEED = 0x52503736  # "RP76"
_RP_SIDE = 32
_RP_DIM = 768


class EncoderUnavailableError(RuntimeError):
    """The encoder's weights or libraries cannot be loaded here."""


class RandomProjection768:
    """Deterministic offline encoder: bilinear 32x32 RGB, pixels scaled to
    [0, 1], flattened and projected by a fixed seeded Gaussian matrix."""

    name = RP_NAME
    dim = _RP_DIM

    def __init__(self):
        flat = 3 * _RP_SIDE * _RP_SIDE
        rng = np.random.Generator(np.random.PCG64(_RP_SEED))
        self._projection = rng.standard_normal((flat, _RP_DIM)) / np.sqrt(flat)

    def preprocess(self) -> dict:
        return {
            "resize": [_RP_SIDE, _RP_SIDE],
            "resample": "bilinear",
            "scale": "1/255",
            "projection_seed": _RP_SEED,
        }

    def encode(self, images: list[Image.Image]) -> np.ndarray:
        rows = []
        for img in images:
            small = img.convert("RGB").resize((_RP_SIDE, _RP_SIDE), Image.Resampling.BILINEAR)
            pixels = np.asarray(small, dtype=np.float64).reshape(-1) / 255.0
            rows.append(pixels @ self._projection)
        return np.asarray(rows, dtype=np.float32)


class ClipVitL14:
    """Frozen CLIP ViT-L/14 image tower with projection head (768-d).

    Preprocessing follows the published recipe: bicubic resize of the short
    side to 224, center crop 224, RGB, per-channel normalization.
    """

    name = CLIP_NAME
    dim = 768

    _MEAN = np.array([0.48145466, 0.4578275, 0.40821073])
    _STD = np.array([0.26862954, 0.26130258, 0.27577711])
    _SIZE = 224
    _WEIGHTS = "openai/clip-vit-large-patch14"

    def __init__(self):
        try:
            import torch
            from transformers import CLIPVisionModelWithProjection
        except ImportError as exc:
            raise EncoderUnavailableError(
                f"{self.name} needs torch and transformers installed: {exc}"
            ) from None
        try:
            self._model = CLIPVisionModelWithProjection.from_pretrained(self._WEIGHTS)
        except Exception as exc:
            raise EncoderUnavailableError(
                f"cannot load weights {self._WEIGHTS!r} (offline?): {exc}"
            ) from None
        self._model.eval()
        self._torch = torch

    def preprocess(self) -> dict:
        return {
            "resize_short_side": self._SIZE,
            "resample": "bicubic",
            "center_crop": self._SIZE,
            "mean": self._MEAN.tolist(),
            "std": self._STD.tolist(),
            "weights": self._WEIGHTS,
        }

    def _to_tensor(self, img: Image.Image) -> np.ndarray:
        img = img.convert("RGB")
        w, h = img.size
        scale = self._SIZE / min(w, h)
        img = img.resize(
            (max(self._SIZE, round(w * scale)), max(self._SIZE, round(h * scale))),
            Image.Resampling.BICUBIC,
        )
        w, h = img.size
        left = (w - self._SIZE) // 2
        top = (h - self._SIZE) // 2
        img = img.crop((left, top, left + self._SIZE, top + self._SIZE))
        arr = np.asarray(img, dtype=np.float64) / 255.0
        arr = (arr - self._MEAN) / self._STD
        return arr.transpose(2, 0, 1)

    def encode(self, images: list[Image.Image]) -> np.ndarray:
        batch = np.stack([self._to_tensor(img) for img in images]).astype(np.float32)
        with self._torch.no_grad():
            out = self._model(pixel_values=self._torch.from_numpy(batch))
        return out.image_embeds.numpy().astype(np.float32)


_REGISTRY = {
    RP_NAME: RandomProjection768,
    CLIP_NAME: ClipVitL14,
}


def available_encoders() -> list[str]:
    return sorted(_REGISTRY)


def load_encoder(name: str):
    try:
        cls = _REGISTRY[name]
    except KeyError:
        raise ValueError(
            f"unknown encoder {name!r}; available: {', '.join(available_encoders())}"
        ) from None
    return cls()
