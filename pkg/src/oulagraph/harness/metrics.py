from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    f1_weighted: float


def compute_metrics(y_true, y_pred) -> Metrics:
    """Accuracy and support-weighted F1 over the classes present in ``y_true``.

    A class with no true and no predicted members contributes nothing; a class
    with zero precision and recall has F1 0.
    """
    y_true = np.asarray(y_true).astype(int).ravel()
    y_pred = np.asarray(y_pred).astype(int).ravel()
    if len(y_true) == 0:
        raise ValueError("empty label vectors")
    if len(y_true) != len(y_pred):
        raise ValueError(f"length mismatch: {len(y_true)} vs {len(y_pred)}")
    acc = float(np.mean(y_true == y_pred))
    f1 = 0.0
    for c in np.unique(y_true):
        tp = np.sum((y_true == c) & (y_pred == c))
        fp = np.sum((y_true != c) & (y_pred == c))
        fn = np.sum((y_true == c) & (y_pred != c))
        denom = 2 * tp + fp + fn
        f1 += (np.sum(y_true == c) / len(y_true)) * (2 * tp / denom if denom else 0.0)
    return Metrics(acc, float(f1))
