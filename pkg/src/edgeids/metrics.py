"""Accuracy, F1 and confusion matrices for any model exposing class probabilities."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    macro_f1: float
    weighted_f1: float
    confusion: np.ndarray  # rows: true class, columns: predicted class

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "weighted_f1": self.weighted_f1,
            "confusion": self.confusion.tolist(),
        }


def confusion_matrix(y_true, y_pred, n_classes: int) -> np.ndarray:
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (np.asarray(y_true), np.asarray(y_pred)), 1)
    return cm


def report_from_predictions(y_true, y_pred, n_classes: int) -> EvalReport:
    """F1 averages run over classes that occur in truth or prediction; an
    undefined per-class F1 counts as 0."""
    cm = confusion_matrix(y_true, y_pred, n_classes)
    tp = np.diag(cm).astype(np.float64)
    support = cm.sum(axis=1).astype(np.float64)
    predicted = cm.sum(axis=0).astype(np.float64)
    denom = support + predicted
    f1 = np.divide(2 * tp, denom, out=np.zeros_like(tp), where=denom > 0)
    present = denom > 0
    total = support.sum()
    return EvalReport(
        accuracy=float(tp.sum() / total) if total else 0.0,
        macro_f1=float(f1[present].mean()) if present.any() else 0.0,
        weighted_f1=float((f1 * support).sum() / total) if total else 0.0,
        confusion=cm,
    )


def evaluate(model, data) -> EvalReport:
    """``model`` is anything with ``predict_proba(X)``; argmax ties go to the lowest class."""
    proba = np.asarray(model.predict_proba(data.features))
    pred = np.argmax(proba, axis=1)
    return report_from_predictions(data.labels, pred, max(data.n_classes, proba.shape[1]))
