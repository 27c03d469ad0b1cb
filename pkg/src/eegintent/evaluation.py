"""Prediction and metric computation: accuracy plus macro-F1 overall and
split by correct / misarticulated trials."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import N_CLASSES
from .errors import EmptyTestSet
from .model import ModelParams, forward


def predict(params: ModelParams, features) -> np.ndarray | int:
    """Argmax of the class logits; ties go to the lowest class index."""
    class_logits, _, _, _ = forward(params, features)
    if class_logits.ndim == 1:
        return int(np.argmax(class_logits))
    return np.argmax(class_logits, axis=1)


def confusion_matrix(y_true, y_pred, n_classes: int = N_CLASSES) -> np.ndarray:
    m = np.zeros((n_classes, n_classes), dtype=np.int64)
    for t, p in zip(np.asarray(y_true), np.asarray(y_pred)):
        m[t, p] += 1
    return m


def macro_f1(y_true, y_pred, n_classes: int = N_CLASSES) -> tuple[float, tuple[int, ...]]:
    """Macro-averaged F1 in percent, plus the classes absent from y_true.

    Absent classes contribute F1 = 0 to the average.
    """
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    missing = []
    scores = []
    for c in range(n_classes):
        tp = int(np.sum((y_true == c) & (y_pred == c)))
        fp = int(np.sum((y_true != c) & (y_pred == c)))
        fn = int(np.sum((y_true == c) & (y_pred != c)))
        if tp + fn == 0:
            missing.append(c)
        denom = 2 * tp + fp + fn
        scores.append(2.0 * tp / denom if denom else 0.0)
    return 100.0 * float(np.mean(scores)), tuple(missing)


@dataclass(frozen=True)
class EvalReport:
    """Table-1-style metrics: accuracy and macro-F1 overall and per domain."""

    accuracy: float
    f1_all: float
    f1_correct: float
    f1_misarticulated: float
    confusion: np.ndarray
    n_test: int
    missing_classes_correct: tuple[int, ...] = ()
    missing_classes_misarticulated: tuple[int, ...] = ()

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "f1_all": self.f1_all,
            "f1_correct": self.f1_correct,
            "f1_misarticulated": self.f1_misarticulated,
            "confusion": self.confusion.tolist(),
            "n_test": self.n_test,
            "missing_classes_correct": list(self.missing_classes_correct),
            "missing_classes_misarticulated": list(self.missing_classes_misarticulated),
        }


def evaluate(params: ModelParams, x, y_class, y_domain) -> EvalReport:
    """Evaluate trained parameters on a labeled test set.

    f1_correct / f1_misarticulated are macro-F1 over the 4 classes on the
    domain-restricted subsets; a subset missing a class is flagged.
    """
    x = np.asarray(x, dtype=np.float64)
    y_class = np.asarray(y_class, dtype=np.int64)
    y_domain = np.asarray(y_domain, dtype=np.int64)
    if len(x) == 0:
        raise EmptyTestSet("evaluate needs a non-empty test set")
    y_pred = predict(params, x)
    confusion = confusion_matrix(y_class, y_pred)
    accuracy = 100.0 * float(np.trace(confusion)) / len(y_class)
    f1_all, _ = macro_f1(y_class, y_pred)
    correct = y_domain == 0
    mis = y_domain == 1
    f1_correct, miss_c = macro_f1(y_class[correct], y_pred[correct])
    f1_mis, miss_m = macro_f1(y_class[mis], y_pred[mis])
    return EvalReport(
        accuracy=accuracy,
        f1_all=f1_all,
        f1_correct=f1_correct,
        f1_misarticulated=f1_mis,
        confusion=confusion,
        n_test=len(y_class),
        missing_classes_correct=miss_c,
        missing_classes_misarticulated=miss_m,
    )
