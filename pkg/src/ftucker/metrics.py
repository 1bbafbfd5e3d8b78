"""Classification metrics."""

from __future__ import annotations

import numpy as np


def _pair(truth, pred):
    truth = np.asarray(truth, dtype=int).ravel()
    pred = np.asarray(pred, dtype=int).ravel()
    if truth.size != pred.size:
        raise ValueError(f"length mismatch: {truth.size} labels vs {pred.size} predictions")
    if truth.size == 0:
        raise ValueError("no labels given")
    return truth, pred


def accuracy(truth, pred) -> float:
    truth, pred = _pair(truth, pred)
    return float(np.mean(truth == pred))


def confusion_matrix(truth, pred, num_classes: int | None = None) -> np.ndarray:
    """Counts with rows = true class, columns = predicted class."""
    truth, pred = _pair(truth, pred)
    if num_classes is None:
        num_classes = int(max(truth.max(), pred.max())) + 1
    if truth.min() < 0 or pred.min() < 0 or max(truth.max(), pred.max()) >= num_classes:
        raise ValueError(f"labels must lie in [0, {num_classes - 1}]")
    cm = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(cm, (truth, pred), 1)
    return cm


def per_class_f1(cm: np.ndarray) -> np.ndarray:
    tp = np.diag(cm).astype(float)
    predicted = cm.sum(axis=0)
    actual = cm.sum(axis=1)
    denom = predicted + actual
    # F1 = 2TP / (2TP + FP + FN); classes with no true and no predicted samples score 0
    return np.divide(2 * tp, denom, out=np.zeros_like(tp), where=denom > 0)


def macro_f1(truth, pred, num_classes: int | None = None) -> float:
    """Unweighted mean of per-class F1 over the declared class set."""
    return float(np.mean(per_class_f1(confusion_matrix(truth, pred, num_classes))))


def summary(truth, pred, num_classes: int | None = None) -> dict:
    cm = confusion_matrix(truth, pred, num_classes)
    return {
        "accuracy": accuracy(truth, pred),
        "macro_f1": float(np.mean(per_class_f1(cm))),
        "confusion": cm.tolist(),
    }
