"""Confusion matrix, per-class F1 and macro-F1 for the three sentiment classes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from genma.corpus import LABELS

N = len(LABELS)


@dataclass
class EvalReport:
    confusion: np.ndarray
    per_class_f1: np.ndarray
    macro_f1: float
    accuracy: float

    def to_dict(self) -> dict:
        out = {name: float(f) for name, f in zip(LABELS, self.per_class_f1)}
        out["macro_f1"] = float(self.macro_f1)
        out["accuracy"] = float(self.accuracy)
        return out

    def table(self, model_name="model") -> str:
        head = "| Model | Pos Class | Neg Class | Neut Class | Score |"
        p, n, u = self.per_class_f1
        row = f"| {model_name} | {p:.2f} | {n:.2f} | {u:.2f} | {self.macro_f1:.2f} |"
        return "\n".join([head, "|---|---|---|---|---|", row])


def _check_labels(labels, what):
    arr = np.asarray(labels, dtype=np.int64)
    if arr.size and (arr.min() < 0 or arr.max() >= N):
        raise ValueError(f"{what}: labels must lie in 0..{N - 1}")
    return arr


def confusion_matrix(gold, pred) -> np.ndarray:
    """Rows are gold classes, columns predicted classes."""
    if len(gold) != len(pred):
        raise ValueError(f"confusion_matrix: length mismatch {len(gold)} vs {len(pred)}")
    g = _check_labels(gold, "gold")
    p = _check_labels(pred, "pred")
    cm = np.zeros((N, N), dtype=np.int64)
    np.add.at(cm, (g, p), 1)
    return cm


def _ratio(a, b):
    return a / b if b else 0.0


def macro_f1(confusion):
    """(per-class F1 array, unweighted mean); 0/0 anywhere counts as 0."""
    cm = np.asarray(confusion)
    if (cm < 0).any():
        raise ValueError("macro_f1: negative counts")
    if cm.sum() == 0:
        raise ValueError("macro_f1: empty confusion matrix")
    f1 = np.zeros(cm.shape[0])
    for c in range(cm.shape[0]):
        tp = cm[c, c]
        precision = _ratio(tp, cm[:, c].sum())
        recall = _ratio(tp, cm[c, :].sum())
        f1[c] = _ratio(2 * precision * recall, precision + recall)
    return f1, float(f1.mean())


def macro_f1_from_labels(gold, pred):
    """Same quantity as ``macro_f1(confusion_matrix(...))`` via per-class counting."""
    if len(gold) != len(pred):
        raise ValueError(f"length mismatch {len(gold)} vs {len(pred)}")
    if not len(gold):
        raise ValueError("macro_f1_from_labels: no labels")
    f1 = np.zeros(N)
    for c in range(N):
        tp = sum(1 for g, p in zip(gold, pred) if g == c and p == c)
        fp = sum(1 for g, p in zip(gold, pred) if g != c and p == c)
        fn = sum(1 for g, p in zip(gold, pred) if g == c and p != c)
        f1[c] = _ratio(2 * tp, 2 * tp + fp + fn)
    return f1, float(f1.mean())


def evaluate(gold, pred) -> EvalReport:
    cm = confusion_matrix(gold, pred)
    per, macro = macro_f1(cm)
    return EvalReport(cm, per, macro, float(np.trace(cm) / cm.sum()))
