"""Batch feature extraction from labeled image directories into AFV1 files."""

from __future__ import annotations

import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, ImageFilter, UnidentifiedImageError

from .afv import write_afv
from .encoders import DEFAULT_ENCODER, load_encoder

logger = logging.getLogger(__name__)

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".webp", ".tif", ".tiff", ".gif"}


@dataclass(frozen=True)
class DirectorySpec:
    """One image directory with the label/tag its records will carry."""

    path: Path
    label: int  # 0 = real, 1 = generated
    tag: str

    @classmethod
    def parse(cls, text: str) -> "DirectorySpec":
        """Parse ``path:label:tag`` where label is 0/1 or real/gen."""
        parts = text.rsplit(":", 2)
        if len(parts) != 3:
            raise ValueError(f"--dir wants path:label:tag, got {text!r}")
        raw_path, raw_label, tag = parts
        aliases = {"0": 0, "real": 0, "1": 1, "gen": 1, "generated": 1}
        if raw_label not in aliases:
            raise ValueError(f"label must be 0/1/real/gen, got {raw_label!r}")
        if not tag:
            raise ValueError(f"empty tag in {text!r}")
        return cls(Path(raw_path), aliases[raw_label], tag)


@dataclass
class ExtractJob:
    directories: list[DirectorySpec]
    encoder: str = DEFAULT_ENCODER
    batch_size: int = 32
    out: Path = Path("features.afv")
    jpeg_quality: int | None = None
    blur_sigma: float | None = None

    def __post_init__(self):
        if not self.directories:
            raise ValueError("at least one --dir is required")
        if self.batch_size < 1:
            raise ValueError(f"batch size must be >= 1, got {self.batch_size}")
        if self.jpeg_quality is not None and not (1 <= self.jpeg_quality <= 100):
            raise ValueError(f"jpeg quality must be in [1, 100], got {self.jpeg_quality}")
        if self.blur_sigma is not None and self.blur_sigma <= 0:
            raise ValueError(f"blur sigma must be > 0, got {self.blur_sigma}")
        self.out = Path(self.out)


@dataclass
class ExtractReport:
    records: int
    dim: int
    warnings: int
    skipped: list[str] = field(default_factory=list)
    per_directory: list[dict] = field(default_factory=list)


def _perturb(img: Image.Image, job: ExtractJob) -> Image.Image:
    """Pixel-space perturbations, applied before any encoder preprocessing."""
    if job.blur_sigma is not None:
        img = img.filter(ImageFilter.GaussianBlur(radius=job.blur_sigma))
    if job.jpeg_quality is not None:
        buf = io.BytesIO()
        img.convert("RGB").save(buf, format="JPEG", quality=job.jpeg_quality)
        buf.seek(0)
        img = Image.open(buf)
        img.load()
    return img


def _list_images(directory: Path) -> list[Path]:
    return sorted(
        p for p in directory.iterdir()
        if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
    )


def extract(job: ExtractJob) -> ExtractReport:
    """Encode every decodable image, write one AFV1 file plus a JSON sidecar.

    Undecodable files are skipped with a logged warning. Every directory
    must contribute at least one record. The output file is written once,
    atomically, at the end.
    """
    for spec in job.directories:
        if not spec.path.is_dir():
            raise FileNotFoundError(f"no such directory: {spec.path}")

    encoder = load_encoder(job.encoder)
    features: list[np.ndarray] = []
    labels: list[int] = []
    tags: list[str] = []
    skipped: list[str] = []
    per_directory: list[dict] = []

    for spec in job.directories:
        paths = _list_images(spec.path)
        images: list[Image.Image] = []
        count = 0
        for path in paths:
            try:
                img = Image.open(path)
                img.load()
            except (UnidentifiedImageError, OSError) as exc:
                logger.warning("skipping undecodable image %s: %s", path, exc)
                skipped.append(str(path))
                continue
            images.append(_perturb(img, job))
            count += 1
            if len(images) == job.batch_size:
                features.append(encoder.encode(images))
                images = []
        if images:
            features.append(encoder.encode(images))
        if count == 0:
            raise ValueError(f"directory {spec.path} contains no decodable image")
        labels += [spec.label] * count
        tags += [spec.tag] * count
        per_directory.append(
            {"path": str(spec.path), "label": spec.label, "tag": spec.tag, "records": count}
        )

    matrix = np.vstack(features)
    write_afv(job.out, matrix, labels, tags)
    sidecar = {
        "format": "AFV1",
        "encoder": encoder.name,
        "dim": encoder.dim,
        "preprocess": encoder.preprocess(),
        "perturbation": {"jpeg_quality": job.jpeg_quality, "blur_sigma": job.blur_sigma},
        "directories": per_directory,
        "records": len(labels),
        "skipped": skipped,
    }
    Path(str(job.out) + ".json").write_text(
        json.dumps(sidecar, sort_keys=True, indent=2) + "\n"
    )
    return ExtractReport(
        records=len(labels),
        dim=encoder.dim,
        warnings=len(skipped),
        skipped=skipped,
        per_directory=per_directory,
    )
