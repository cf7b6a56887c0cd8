"""Evaluation metrics: ranking quality, thresholded accuracies, and
class-separability statistics.

Conventions: label 1 ("generated") is the positive class everywhere; the
decision threshold is strict (p > t), so a tie at exactly 0.5 counts as
real. Per-class fields are None when that class is absent.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import EmptyInputError, ShapeError, UndefinedMetricError

DEFAULT_THRESHOLD = 0.5


@dataclass
class MetricsReport:
    ap: float | None
    acc: float
    f1: float
    real_acc: float | None
    fake_acc: float | None
    n_real: int
    n_fake: int

    def to_dict(self) -> dict:
        return {
            "ap": self.ap,
            "acc": self.acc,
            "f1": self.f1,
            "real_acc": self.real_acc,
            "fake_acc": self.fake_acc,
            "n_real": self.n_real,
            "n_fake": self.n_fake,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass
class SeparabilityReport:
    inter_class_distance: float
    intra_class_variance: dict[str, float]  # keys "real", "generated"
    fisher_ratio: float

    def to_dict(self) -> dict:
        return {
            "inter_class_distance": self.inter_class_distance,
            "intra_class_variance": dict(self.intra_class_variance),
            "fisher_ratio": self.fisher_ratio,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _as_vectors(scores, labels):
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    y = np.asarray(labels).reshape(-1)
    if s.shape[0] != y.shape[0]:
        raise ShapeError(f"got {s.shape[0]} scores but {y.shape[0]} labels")
    return s, y.astype(np.int64)


def average_precision(scores, labels) -> float:
    """Non-interpolated AP: mean precision at the rank of each positive.

    Ranking is by descending score, ties broken by original index (stable).
    """
    s, y = _as_vectors(scores, labels)
    n_pos = int(np.count_nonzero(y == 1))
    if n_pos == 0:
        raise UndefinedMetricError("average precision needs at least one positive label")
    order = sorted(range(len(s)), key=lambda i: (-s[i], i))
    hits = 0
    total = 0.0
    for rank, i in enumerate(order, start=1):
        if y[i] == 1:
            hits += 1
            total += hits / rank
    return total / n_pos


def decide(probabilities, threshold: float = DEFAULT_THRESHOLD) -> np.ndarray:
    """Label 1 iff p > threshold (strict: a tie maps to 0)."""
    p = np.asarray(probabilities, dtype=np.float64).reshape(-1)
    return (p > threshold).astype(np.uint8)


def accuracy_suite(probabilities, labels, threshold: float = DEFAULT_THRESHOLD) -> MetricsReport:
    """ACC / F1 / per-class accuracies at the threshold, plus AP.

    F1 treats label 1 as positive and is 0 when precision + recall is 0.
    AP and per-class accuracies are None when their class is absent.
    """
    p, y = _as_vectors(probabilities, labels)
    n = p.shape[0]
    if n == 0:
        raise EmptyInputError("accuracy_suite needs at least one sample")
    pred = decide(p, threshold)
    n_fake = int(np.count_nonzero(y == 1))
    n_real = n - n_fake

    acc = float(np.mean(pred == y))
    tp = int(np.count_nonzero((pred == 1) & (y == 1)))
    fp = int(np.count_nonzero((pred == 1) & (y == 0)))
    fn = int(np.count_nonzero((pred == 0) & (y == 1)))
    precision = tp / (tp + fp) if (tp + fp) > 0 else 0.0
    recall = tp / (tp + fn) if (tp + fn) > 0 else 0.0
    f1 = 2.0 * precision * recall / (precision + recall) if (precision + recall) > 0 else 0.0

    real_acc = float(np.mean(pred[y == 0] == 0)) if n_real else None
    fake_acc = float(np.mean(pred[y == 1] == 1)) if n_fake else None
    ap = average_precision(p, y) if n_fake else None
    return MetricsReport(ap, acc, f1, real_acc, fake_acc, n_real, n_fake)


def separability(features_r: np.ndarray, features_g: np.ndarray) -> SeparabilityReport:
    """Distance between class means, per-class scatter, and their Fisher ratio.

    Intra-class variance is the mean squared Euclidean distance of samples
    to their own class mean (total scatter, not per-dimension). The Fisher
    ratio is inter_class_distance**2 / (intra_r + intra_g); it is undefined
    when both variances vanish (e.g. two identical single points).
    """
    fr = np.asarray(features_r, dtype=np.float64)
    fg = np.asarray(features_g, dtype=np.float64)
    if fr.ndim != 2 or fg.ndim != 2:
        raise ShapeError("separability expects 2-D feature matrices")
    if fr.shape[0] == 0 or fg.shape[0] == 0:
        raise EmptyInputError("both classes need at least one sample")
    if fr.shape[1] != fg.shape[1]:
        raise ShapeError(
            f"feature dims differ between classes: {fr.shape[1]} vs {fg.shape[1]}"
        )
    mean_r = fr.mean(axis=0)
    mean_g = fg.mean(axis=0)
    inter = float(np.linalg.norm(mean_r - mean_g))
    intra_r = float(np.mean(((fr - mean_r) ** 2).sum(axis=1)))
    intra_g = float(np.mean(((fg - mean_g) ** 2).sum(axis=1)))
    denom = intra_r + intra_g
    if denom <= 0.0:
        raise UndefinedMetricError(
            "Fisher ratio undefined: both intra-class variances are zero"
        )
    return SeparabilityReport(
        inter_class_distance=inter,
        intra_class_variance={"real": intra_r, "generated": intra_g},
        fisher_ratio=inter * inter / denom,
    )
