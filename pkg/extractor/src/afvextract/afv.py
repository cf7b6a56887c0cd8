"""Writer for the AFV1 binary feature format.

Little-endian layout: magic ``AFV1``, format version u32, feature dim u32,
record count u64, a tag table (u16 count, then per tag u16 byte length and
UTF-8 bytes), then per record: label u8, tag index u16, ``dim`` float32
values. Labels are 0 = real, 1 = generated. The detector pipeline reads
this format directly.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

MAGIC = b"AFV1"
VERSION = 1


def write_afv(path, features: np.ndarray, labels, tags) -> None:
    """Write one AFV1 file atomically (temp file + rename).

    ``features`` is (N, dim) and is cast to float32; ``labels`` must be 0/1;
    ``tags`` is one short string per record.
    """
    feats = np.ascontiguousarray(features, dtype=np.float32)
    if feats.ndim != 2 or feats.shape[1] < 1:
        raise ValueError(f"features must be (N, dim>=1), got shape {feats.shape}")
    n, dim = feats.shape
    labels = [int(l) for l in labels]
    tags = [str(t) for t in tags]
    if len(labels) != n or len(tags) != n:
        raise ValueError(f"got {n} feature rows, {len(labels)} labels, {len(tags)} tags")
    if any(l not in (0, 1) for l in labels):
        raise ValueError("labels must be 0 (real) or 1 (generated)")
    if not np.isfinite(feats).all():
        raise ValueError("features contain non-finite values")

    table: list[str] = []
    index: dict[str, int] = {}
    for tag in tags:
        if tag not in index:
            index[tag] = len(table)
            table.append(tag)
    if len(table) > 0xFFFF:
        raise ValueError("too many distinct tags for a u16 table")

    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<IIQ", VERSION, dim, n)
    blob += struct.pack("<H", len(table))
    for tag in table:
        raw = tag.encode("utf-8")
        blob += struct.pack("<H", len(raw)) + raw
    record = np.dtype([("label", "u1"), ("tag", "<u2"), ("features", "<f4", (dim,))])
    records = np.empty(n, dtype=record)
    records["label"] = np.array(labels, dtype=np.uint8)
    records["tag"] = np.array([index[t] for t in tags], dtype=np.uint16)
    records["features"] = feats
    blob += records.tobytes()

    out = Path(path)
    tmp = out.with_name(out.name + ".tmp")
    tmp.write_bytes(bytes(blob))
    os.replace(tmp, out)
