"""Classification metrics computed from a confusion matrix."""
from __future__ import annotations

import numpy as np


def confusion_matrix(y_true, y_pred, labels=None) -> np.ndarray:
    """Counts with rows = true class, columns = predicted class, ordered as ``labels``."""
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if len(y_true) != len(y_pred):
        raise ValueError("y_true and y_pred differ in length")
    if labels is None:
        labels = np.union1d(y_true, y_pred)
    labels = list(labels)
    pos = {c: i for i, c in enumerate(labels)}
    cm = np.zeros((len(labels), len(labels)), dtype=int)
    try:
        np.add.at(cm, ([pos[t] for t in y_true.tolist()], [pos[p] for p in y_pred.tolist()]), 1)
    except KeyError as exc:
        raise ValueError(f"label {exc.args[0]!r} outside the class set") from None
    return cm


def accuracy(y_true, y_pred) -> float:
    y_true = np.asarray(y_true)
    if y_true.size == 0:
        raise ValueError("empty label vectors")
    return float(np.mean(y_true == np.asarray(y_pred)))


def per_class_f1(cm: np.ndarray) -> np.ndarray:
    """F1 per class from a confusion matrix; classes with 2TP+FP+FN = 0 score 0."""
    tp = np.diag(cm).astype(float)
    denom = cm.sum(axis=0) + cm.sum(axis=1)
    return np.divide(2 * tp, denom, out=np.zeros_like(tp), where=denom > 0)


def f1_score(y_true, y_pred, averaging: str = "macro") -> float:
    """F1 averaged over the classes present in ``y_true`` or ``y_pred``.

    ``averaging`` is ``macro`` (unweighted mean) or ``weighted`` (by true
    support).
    """
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.size == 0:
        raise ValueError("empty label vectors")
    cm = confusion_matrix(y_true, y_pred)
    f1 = per_class_f1(cm)
    if averaging == "macro":
        return float(f1.mean())
    if averaging == "weighted":
        support = cm.sum(axis=1)
        return float(np.dot(f1, support) / support.sum())
    raise ValueError(f"unknown averaging {averaging!r}")
