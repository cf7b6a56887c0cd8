"""Brute-force metric oracles, deliberately naive and loop-based.

These recompute everything by direct counting so the fast implementations
in attribspace.metrics can be compared against an independent path.
"""

from __future__ import annotations

import math


def ap_oracle(scores, labels) -> float:
    """Average precision by repeated selection and per-rank recounting."""
    scores = [float(s) for s in scores]
    labels = [int(y) for y in labels]
    n = len(scores)
    remaining = list(range(n))
    order = []
    while remaining:
        best = remaining[0]
        for i in remaining[1:]:
            if scores[i] > scores[best]:  # ties keep the smaller index
                best = i
        order.append(best)
        remaining.remove(best)

    n_pos = sum(1 for y in labels if y == 1)
    total = 0.0
    for rank in range(1, n + 1):
        if labels[order[rank - 1]] == 1:
            hits = sum(1 for j in range(rank) if labels[order[j]] == 1)
            total += hits / rank
    return total / n_pos


def suite_oracle(probabilities, labels, threshold=0.5) -> dict:
    """Confusion-matrix metrics by explicit counting."""
    preds = [1 if float(p) > threshold else 0 for p in probabilities]
    labels = [int(y) for y in labels]
    n = len(labels)
    correct = sum(1 for p, y in zip(preds, labels) if p == y)
    tp = sum(1 for p, y in zip(preds, labels) if p == 1 and y == 1)
    fp = sum(1 for p, y in zip(preds, labels) if p == 1 and y == 0)
    fn = sum(1 for p, y in zip(preds, labels) if p == 0 and y == 1)
    n_fake = sum(1 for y in labels if y == 1)
    n_real = n - n_fake
    precision = tp / (tp + fp) if (tp + fp) > 0 else 0.0
    recall = tp / (tp + fn) if (tp + fn) > 0 else 0.0
    f1 = 2.0 * precision * recall / (precision + recall) if (precision + recall) > 0 else 0.0
    real_acc = (
        sum(1 for p, y in zip(preds, labels) if y == 0 and p == 0) / n_real
        if n_real
        else None
    )
    fake_acc = tp / n_fake if n_fake else None
    return {
        "acc": correct / n,
        "f1": f1,
        "real_acc": real_acc,
        "fake_acc": fake_acc,
        "n_real": n_real,
        "n_fake": n_fake,
    }


def separability_oracle(features_r, features_g) -> dict:
    """Mean distance / scatter statistics with plain Python loops."""
    rows_r = [list(map(float, row)) for row in features_r]
    rows_g = [list(map(float, row)) for row in features_g]
    d = len(rows_r[0])

    def mean(rows):
        return [sum(row[j] for row in rows) / len(rows) for j in range(d)]

    def scatter(rows, mu):
        total = 0.0
        for row in rows:
            total += sum((row[j] - mu[j]) ** 2 for j in range(d))
        return total / len(rows)

    mu_r = mean(rows_r)
    mu_g = mean(rows_g)
    inter = math.sqrt(sum((a - b) ** 2 for a, b in zip(mu_r, mu_g)))
    intra_r = scatter(rows_r, mu_r)
    intra_g = scatter(rows_g, mu_g)
    return {
        "inter_class_distance": inter,
        "intra_r": intra_r,
        "intra_g": intra_g,
        "fisher_ratio": inter * inter / (intra_r + intra_g),
    }
