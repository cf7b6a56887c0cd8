"""On-disk formats and dataset plumbing.

Two little-endian binary formats are defined here and are the package's
stable external interfaces:

Feature file ("AFV1")
    magic ``AFV1`` (4 bytes), format version u32, feature dim u32, record
    count u64, a source-tag table (u16 tag count, then per tag a u16 byte
    length and that many UTF-8 bytes), then per record: label u8, tag index
    u16, ``dim`` float32 values. Labels are 0 = real, 1 = generated.

Checkpoint file ("ACMCKPT1")
    magic ``ACMCKPT1`` (8 bytes), u32 byte length of a UTF-8 JSON header
    (architecture, dims, training-config snapshot, seed), then the raw
    float64 weight payload: for the encoder, decoder and classifier in that
    order, each layer's weight matrix row-major followed by its bias.

Features are stored as float32 (matching upstream encoders) and widened to
float64 by :meth:`FeatureDataset.matrix` when entering numeric code.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import (
    ArgumentError,
    CorruptionError,
    EmptyInputError,
    EmptySubsetError,
    FormatError,
    ShapeError,
    ValidationError,
)
from .nn import Activation, Layer, Mlp
from .rng import Rng, derive_seed

FEATURE_MAGIC = b"AFV1"
FEATURE_VERSION = 1
CHECKPOINT_MAGIC = b"ACMCKPT1"
CHECKPOINT_VERSION = 1

LABEL_REAL = 0
LABEL_GENERATED = 1

_STREAM_SPLIT = 1


class Selector(Enum):
    REAL_ONLY = "real"
    GENERATED_ONLY = "gen"


@dataclass(frozen=True)
class AttributionSource:
    """Which single class (optionally narrowed to one source tag) trains the
    manifold model."""

    selector: Selector
    tag: str | None = None

    @property
    def label(self) -> int:
        return LABEL_REAL if self.selector is Selector.REAL_ONLY else LABEL_GENERATED

    @classmethod
    def parse(cls, text: str) -> "AttributionSource":
        """Parse ``real``, ``gen``, ``real:tag`` or ``gen:tag``."""
        head, sep, tag = text.partition(":")
        try:
            selector = Selector(head)
        except ValueError:
            raise ArgumentError(
                f"source must be 'real' or 'gen' (optionally ':tag'), got {text!r}"
            ) from None
        if sep and not tag:
            raise ArgumentError(f"empty tag in source {text!r}")
        return cls(selector, tag or None)

    def describe(self) -> str:
        return self.selector.value + (f":{self.tag}" if self.tag else "")


@dataclass
class FeatureDataset:
    """N feature vectors with binary labels and source tags.

    ``features`` is (N, dim) float32, ``labels`` is (N,) uint8 with values
    in {0, 1}, ``tags`` is a tuple of N short strings. Arrays are frozen
    after validation; the dataset is safe to share across readers.
    """

    features: np.ndarray
    labels: np.ndarray
    tags: tuple[str, ...]

    def __post_init__(self):
        if self.features.ndim != 2:
            raise ShapeError(f"features must be 2-D, got shape {self.features.shape}")
        if self.features.dtype != np.float32:
            raise ValidationError(f"features must be float32, got {self.features.dtype}")
        if self.features.shape[1] < 1:
            raise ValidationError("feature dim must be at least 1")
        n = self.features.shape[0]
        if self.labels.shape != (n,) or self.labels.dtype != np.uint8:
            raise ShapeError(f"labels must be ({n},) uint8, got {self.labels.shape} {self.labels.dtype}")
        if len(self.tags) != n:
            raise ShapeError(f"got {len(self.tags)} tags for {n} records")
        bad = ~np.isin(self.labels, (LABEL_REAL, LABEL_GENERATED))
        if bad.any():
            raise ValidationError(f"record {int(np.argmax(bad))} has label outside {{0, 1}}")
        finite = np.isfinite(self.features).all(axis=1)
        if not finite.all():
            raise ValidationError(
                f"record {int(np.argmin(finite))} contains a non-finite feature value"
            )
        self.features.flags.writeable = False
        self.labels.flags.writeable = False

    @classmethod
    def build(cls, features, labels, tags) -> "FeatureDataset":
        """Cast loose inputs into canonical storage dtypes."""
        feats = np.ascontiguousarray(features, dtype=np.float32)
        labs = np.ascontiguousarray(labels, dtype=np.uint8)
        return cls(feats, labs, tuple(tags))

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def __len__(self) -> int:
        return self.features.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, FeatureDataset):
            return NotImplemented
        return (
            self.features.shape == other.features.shape
            and self.features.tobytes() == other.features.tobytes()
            and self.labels.tobytes() == other.labels.tobytes()
            and self.tags == other.tags
        )

    def matrix(self) -> np.ndarray:
        """Features widened to a fresh float64 (N, dim) array."""
        return self.features.astype(np.float64)

    def take(self, indices) -> "FeatureDataset":
        idx = np.asarray(indices, dtype=np.intp)
        return FeatureDataset(
            np.ascontiguousarray(self.features[idx]),
            np.ascontiguousarray(self.labels[idx]),
            tuple(self.tags[i] for i in idx),
        )

    def label_counts(self) -> tuple[int, int]:
        n_fake = int(np.count_nonzero(self.labels))
        return len(self) - n_fake, n_fake


def _record_dtype(dim: int) -> np.dtype:
    return np.dtype([("label", "u1"), ("tag", "<u2"), ("features", "<f4", (dim,))])


def save_features(dataset: FeatureDataset, path) -> None:
    """Write an AFV1 file. Two saves of equal datasets are byte-identical."""
    tag_table: list[str] = []
    tag_index: dict[str, int] = {}
    for tag in dataset.tags:
        if tag not in tag_index:
            tag_index[tag] = len(tag_table)
            tag_table.append(tag)
    if len(tag_table) > 0xFFFF:
        raise ValidationError(f"too many distinct tags ({len(tag_table)}) for a u16 table")

    head = bytearray()
    head += FEATURE_MAGIC
    head += struct.pack("<IIQ", FEATURE_VERSION, dataset.dim, len(dataset))
    head += struct.pack("<H", len(tag_table))
    for tag in tag_table:
        raw = tag.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise ValidationError(f"tag too long: {tag[:32]!r}...")
        head += struct.pack("<H", len(raw)) + raw

    records = np.empty(len(dataset), dtype=_record_dtype(dataset.dim))
    records["label"] = dataset.labels
    records["tag"] = np.array([tag_index[t] for t in dataset.tags], dtype=np.uint16)
    records["features"] = dataset.features
    Path(path).write_bytes(bytes(head) + records.tobytes())


class _Reader:
    """Cursor over file bytes that reports the offset of any truncation."""

    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def read(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.blob):
            raise CorruptionError(f"file truncated while reading {what}", len(self.blob))
        out = self.blob[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.read(struct.calcsize(fmt), what))


def load_features(path) -> FeatureDataset:
    """Read an AFV1 file, validating every dataset invariant."""
    blob = Path(path).read_bytes()
    r = _Reader(blob)
    magic = r.read(4, "magic")
    if magic != FEATURE_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {FEATURE_MAGIC!r}")
    version, dim, count = r.unpack("<IIQ", "header")
    if version != FEATURE_VERSION:
        raise FormatError(f"unsupported feature format version {version}")
    if dim < 1:
        raise ValidationError("feature dim must be at least 1")
    (n_tags,) = r.unpack("<H", "tag table size")
    tag_table = []
    for k in range(n_tags):
        (length,) = r.unpack("<H", f"tag {k} length")
        raw = r.read(length, f"tag {k}")
        try:
            tag_table.append(raw.decode("utf-8"))
        except UnicodeDecodeError as exc:
            raise ValidationError(f"tag {k} is not valid UTF-8: {exc}") from None

    dtype = _record_dtype(dim)
    body = blob[r.pos :]
    expected = count * dtype.itemsize
    if len(body) != expected:
        raise CorruptionError(
            f"expected {expected} record bytes for {count} records, found {len(body)}",
            len(blob) if len(body) < expected else r.pos + expected,
        )
    records = np.frombuffer(body, dtype=dtype)

    tag_idx = records["tag"]
    if count:
        if len(tag_table) == 0:
            raise ValidationError("records present but tag table is empty")
        if int(tag_idx.max()) >= len(tag_table):
            bad = int(np.argmax(tag_idx >= len(tag_table)))
            raise ValidationError(
                f"record {bad} references missing tag index {int(tag_idx[bad])}"
            )
    tags = tuple(tag_table[i] for i in tag_idx)
    return FeatureDataset(
        np.ascontiguousarray(records["features"]).reshape(count, dim),
        np.ascontiguousarray(records["label"]),
        tags,
    )


def select_subset(dataset: FeatureDataset, source: AttributionSource) -> FeatureDataset:
    """Records of the selected class (and tag, if given), original order kept."""
    if len(dataset) == 0:
        raise EmptyInputError("cannot select from an empty dataset")
    mask = dataset.labels == source.label
    if source.tag is not None:
        mask &= np.array([t == source.tag for t in dataset.tags], dtype=bool)
    if not mask.any():
        raise EmptySubsetError(f"no records match source '{source.describe()}'")
    return dataset.take(np.flatnonzero(mask))


def split(dataset: FeatureDataset, fraction: float, seed: int):
    """Deterministic shuffled split into (train, held_out).

    Train size is round(fraction * N) (half away from zero), then grown if
    needed so every label present in the dataset appears at least once in
    the train half.
    """
    if not (0.0 < fraction <= 1.0):
        raise ArgumentError(f"fraction must be in (0, 1], got {fraction}")
    n = len(dataset)
    if n == 0:
        raise EmptyInputError("cannot split an empty dataset")
    perm = Rng(derive_seed(seed, _STREAM_SPLIT)).shuffle_indices(n)
    take = int(np.floor(fraction * n + 0.5))
    take = min(max(take, 1), n)
    train_idx = list(perm[:take])
    rest_idx = list(perm[take:])
    present = np.unique(dataset.labels)
    train_labels = set(int(dataset.labels[i]) for i in train_idx)
    for label in present:
        if int(label) not in train_labels:
            pos = next(k for k, i in enumerate(rest_idx) if dataset.labels[i] == label)
            train_idx.append(rest_idx.pop(pos))
    return dataset.take(train_idx), dataset.take(rest_idx)


@dataclass
class Checkpoint:
    """A trained detector plus everything needed to rebuild and audit it."""

    feature_dim: int
    bottleneck_dim: int
    encoder: Mlp
    decoder: Mlp
    classifier: Mlp
    config: dict
    seed: int
    normalize: bool

    def __post_init__(self):
        if self.encoder.input_dim != self.feature_dim:
            raise ValidationError(
                f"encoder input dim {self.encoder.input_dim} != feature dim {self.feature_dim}"
            )
        if self.decoder.output_dim != self.feature_dim:
            raise ValidationError(
                f"decoder output dim {self.decoder.output_dim} != feature dim {self.feature_dim}"
            )
        if self.encoder.output_dim != self.bottleneck_dim or self.decoder.input_dim != self.bottleneck_dim:
            raise ValidationError("encoder/decoder bottleneck dims are inconsistent")
        if self.classifier.input_dim != self.feature_dim:
            raise ValidationError(
                f"classifier input dim {self.classifier.input_dim} != feature dim {self.feature_dim}"
            )

    def __eq__(self, other) -> bool:
        if not isinstance(other, Checkpoint):
            return NotImplemented
        return (
            self.feature_dim == other.feature_dim
            and self.bottleneck_dim == other.bottleneck_dim
            and self.config == other.config
            and self.seed == other.seed
            and self.normalize == other.normalize
            and all(
                a.digest() == b.digest()
                for a, b in zip(
                    (self.encoder, self.decoder, self.classifier),
                    (other.encoder, other.decoder, other.classifier),
                )
            )
        )


def _mlp_arch(mlp: Mlp) -> list[dict]:
    return [
        {"in": l.in_dim, "out": l.out_dim, "activation": l.activation.value}
        for l in mlp.layers
    ]


def _mlp_payload(mlp: Mlp) -> bytes:
    parts = []
    for layer in mlp.layers:
        parts.append(np.ascontiguousarray(layer.weight, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(layer.bias, dtype="<f8").tobytes())
    return b"".join(parts)


def save_checkpoint(checkpoint: Checkpoint, path) -> None:
    header = {
        "format_version": CHECKPOINT_VERSION,
        "feature_dim": checkpoint.feature_dim,
        "bottleneck_dim": checkpoint.bottleneck_dim,
        "normalize": checkpoint.normalize,
        "seed": checkpoint.seed,
        "config": checkpoint.config,
        "encoder": _mlp_arch(checkpoint.encoder),
        "decoder": _mlp_arch(checkpoint.decoder),
        "classifier": _mlp_arch(checkpoint.classifier),
    }
    raw = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    payload = (
        _mlp_payload(checkpoint.encoder)
        + _mlp_payload(checkpoint.decoder)
        + _mlp_payload(checkpoint.classifier)
    )
    Path(path).write_bytes(
        CHECKPOINT_MAGIC + struct.pack("<I", len(raw)) + raw + payload
    )


def _mlp_from_arch(arch: list[dict], reader: _Reader, what: str) -> Mlp:
    layers = []
    for k, spec in enumerate(arch):
        try:
            in_dim, out_dim = int(spec["in"]), int(spec["out"])
            activation = Activation(spec["activation"])
        except (KeyError, ValueError, TypeError) as exc:
            raise FormatError(f"bad layer spec in {what} layer {k}: {exc}") from None
        weight = np.frombuffer(
            reader.read(8 * in_dim * out_dim, f"{what} layer {k} weight"), dtype="<f8"
        ).reshape(out_dim, in_dim)
        bias = np.frombuffer(reader.read(8 * out_dim, f"{what} layer {k} bias"), dtype="<f8")
        if not (np.isfinite(weight).all() and np.isfinite(bias).all()):
            raise ValidationError(f"{what} layer {k} contains non-finite parameters")
        layers.append(Layer(weight.copy(), bias.copy(), activation))
    return Mlp(layers)


def load_checkpoint(path) -> Checkpoint:
    blob = Path(path).read_bytes()
    r = _Reader(blob)
    magic = r.read(8, "magic")
    if magic != CHECKPOINT_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {CHECKPOINT_MAGIC!r}")
    (header_len,) = r.unpack("<I", "header length")
    raw = r.read(header_len, "JSON header")
    try:
        header = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"unreadable checkpoint header: {exc}") from None
    if header.get("format_version") != CHECKPOINT_VERSION:
        raise FormatError(f"unsupported checkpoint version {header.get('format_version')}")
    try:
        feature_dim = int(header["feature_dim"])
        bottleneck_dim = int(header["bottleneck_dim"])
        normalize = bool(header["normalize"])
        seed = int(header["seed"])
        config = dict(header["config"])
        arches = (header["encoder"], header["decoder"], header["classifier"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"checkpoint header missing field: {exc}") from None
    encoder = _mlp_from_arch(arches[0], r, "encoder")
    decoder = _mlp_from_arch(arches[1], r, "decoder")
    classifier = _mlp_from_arch(arches[2], r, "classifier")
    if r.pos != len(blob):
        raise CorruptionError(f"{len(blob) - r.pos} unexpected trailing bytes", r.pos)
    return Checkpoint(
        feature_dim, bottleneck_dim, encoder, decoder, classifier, config, seed, normalize
    )
