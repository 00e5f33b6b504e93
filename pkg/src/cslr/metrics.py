"""Classification, feature-selection and reconstruction metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (AllZeroWeights, ConstantInput, DimensionMismatch,
                     EmptyInput)


def _pair(a, b, dtype=np.float64):
    a = np.asarray(a, dtype=dtype).reshape(-1)
    b = np.asarray(b, dtype=dtype).reshape(-1)
    if a.shape != b.shape:
        raise DimensionMismatch(f"lengths differ: {a.shape[0]} vs {b.shape[0]}")
    return a, b


def accuracy(predictions, labels) -> float:
    """Fraction of positions where ``predictions == labels``."""
    p, t = _pair(predictions, labels, np.int64)
    if p.size == 0:
        raise EmptyInput("accuracy of an empty prediction set")
    return float(np.count_nonzero(p == t)) / p.size


@dataclass(frozen=True)
class SelectionScore:
    tp: int
    fp: int
    fn: int
    tn: int
    precision: float
    recall: float
    f1: float


def selection_score(selected_mask, relevant_mask) -> SelectionScore:
    """Score a selected feature set against the truly relevant ones.

    Relevant features are the positive class. Precision (recall) is 0 when
    nothing is selected (nothing is relevant); F1 is 0 when both are 0.
    """
    s, r = _pair(selected_mask, relevant_mask, bool)
    tp = int(np.count_nonzero(s & r))
    fp = int(np.count_nonzero(s & ~r))
    fn = int(np.count_nonzero(~s & r))
    tn = int(np.count_nonzero(~s & ~r))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return SelectionScore(tp, fp, fn, tn, precision, recall, f1)


def grouped_contribution(model, groups):
    """Share of total absolute weight carried by each group of features.

    ``groups`` is a sequence of index collections partitioning the non-bias
    features ``0..D-1``; the bias is excluded.
    """
    w = np.abs(np.asarray(model.weights if hasattr(model, "weights") else model,
                          dtype=np.float64))
    D = w.shape[0]
    seen = np.zeros(D, dtype=int)
    for g in groups:
        seen[np.asarray(list(g), dtype=int)] += 1
    if np.any(seen != 1):
        raise ValueError("groups must partition the feature indices")
    total = w.sum()
    if total == 0:
        raise AllZeroWeights("all non-bias weights are zero")
    return np.array([w[np.asarray(list(g), dtype=int)].sum() / total for g in groups])


def pearson(a, b) -> float:
    a, b = _pair(a, b)
    if a.size < 2:
        raise ConstantInput("need at least two points")
    da = a - a.mean()
    db = b - b.mean()
    va = da @ da
    vb = db @ db
    if va == 0 or vb == 0:
        raise ConstantInput("correlation undefined for a constant vector")
    # one sqrt of the product keeps pearson(a, a) exactly 1
    return float(np.clip(da @ db / np.sqrt(va * vb), -1.0, 1.0))


def mse(a, b) -> float:
    a, b = _pair(a, b)
    if a.size == 0:
        raise EmptyInput("mse of empty vectors")
    d = a - b
    return float(d @ d / d.size)
