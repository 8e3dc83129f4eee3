"""Confusion matrices, per-class rates and one-vs-all ROC curves."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np


def roc_curve(is_pos, scores) -> tuple[np.ndarray, np.ndarray]:
    """False- and true-positive rates swept over every distinct score.

    Tied scores move together, so the curve has one point per distinct value
    plus the origin.
    """
    is_pos = np.asarray(is_pos, dtype=bool)
    scores = np.asarray(scores, dtype=float)
    order = np.argsort(-scores, kind="mergesort")
    s = scores[order]
    p = is_pos[order]
    last = np.r_[np.flatnonzero(s[1:] != s[:-1]), s.size - 1]
    tps = np.cumsum(p)[last]
    fps = np.cumsum(~p)[last]
    P, N = int(p.sum()), int((~p).sum())
    tpr = np.r_[0.0, tps / P] if P else np.full(last.size + 1, np.nan)
    fpr = np.r_[0.0, fps / N] if N else np.full(last.size + 1, np.nan)
    return fpr, tpr


def auc_trapezoid(fpr, tpr) -> float:
    if np.isnan(fpr).any() or np.isnan(tpr).any():
        return math.nan
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))


def rates_from_matrix(cm: np.ndarray):
    """(accuracy, recall per class, miss rate per class) from a count matrix.

    Rows are true classes. Classes without test rows get NaN rates.
    """
    cm = np.asarray(cm)
    total = cm.sum()
    accuracy = float(np.trace(cm) / total) if total else math.nan
    support = cm.sum(axis=1)
    recall = [float(cm[i, i] / support[i]) if support[i] else math.nan
              for i in range(cm.shape[0])]
    miss = [1.0 - r if not math.isnan(r) else math.nan for r in recall]
    return accuracy, recall, miss


@dataclass
class EvalReport:
    classes: tuple[str, ...]
    confusion: np.ndarray
    accuracy: float
    recall: dict[str, float]
    miss_rate: dict[str, float]
    roc: dict[str, tuple[np.ndarray, np.ndarray]]
    auc: dict[str, float]
    meta: dict = field(default_factory=dict)

    @property
    def chance_level(self) -> float:
        return 1.0 / len(self.classes)

    @property
    def n(self) -> int:
        return int(self.confusion.sum())

    @classmethod
    def from_predictions(cls, y_true, y_pred, scores, classes, meta=None) -> "EvalReport":
        classes = tuple(classes)
        index = {c: i for i, c in enumerate(classes)}
        K = len(classes)
        cm = np.zeros((K, K), dtype=np.int64)
        for t, p in zip(y_true, y_pred):
            cm[index[t], index[p]] += 1
        acc, recall, miss = rates_from_matrix(cm)
        y_true = np.asarray(y_true, dtype=object)
        scores = np.asarray(scores, dtype=float).reshape(len(y_true), K)
        roc, auc = {}, {}
        for i, c in enumerate(classes):
            fpr, tpr = roc_curve(y_true == c, scores[:, i])
            roc[c] = (fpr, tpr)
            auc[c] = auc_trapezoid(fpr, tpr)
        return cls(classes, cm, acc, dict(zip(classes, recall)), dict(zip(classes, miss)),
                   roc, auc, dict(meta or {}))

    def to_json(self, include_roc: bool = True) -> dict:
        def num(v):
            return None if isinstance(v, float) and math.isnan(v) else v

        out = {
            "classes": list(self.classes),
            "confusion_matrix": self.confusion.tolist(),
            "accuracy": num(self.accuracy),
            "chance_level": self.chance_level,
            "recall": {c: num(v) for c, v in self.recall.items()},
            "miss_rate": {c: num(v) for c, v in self.miss_rate.items()},
            "auc": {c: num(v) for c, v in self.auc.items()},
            "meta": self.meta,
        }
        if include_roc:
            out["roc"] = {c: {"fpr": [num(float(v)) for v in f],
                              "tpr": [num(float(v)) for v in t]}
                          for c, (f, t) in self.roc.items()}
        return out

    def confusion_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["true\\predicted", *self.classes])
        for c, row in zip(self.classes, self.confusion.tolist()):
            w.writerow([c, *row])
        return buf.getvalue()


def pool_reports(reports, classes, meta=None) -> EvalReport:
    """Sum confusion matrices; ROC is not poolable from matrices and is omitted."""
    cm = sum(r.confusion for r in reports)
    acc, recall, miss = rates_from_matrix(cm)
    return EvalReport(tuple(classes), cm, acc, dict(zip(classes, recall)),
                      dict(zip(classes, miss)), {}, {}, dict(meta or {}))
