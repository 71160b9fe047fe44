"""Confusion matrix and derived per-class metrics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParamError, ShapeError


@dataclass(frozen=True)
class ConfusionMatrix:
    """K x K counts; rows are true classes, columns are predicted classes."""

    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ShapeError(f"confusion matrix must be square, got {c.shape}")
        if np.any(c < 0):
            raise ParamError("confusion matrix counts must be non-negative")
        object.__setattr__(self, "counts", c.astype(np.int64))

    @classmethod
    def from_pairs(cls, true: np.ndarray, pred: np.ndarray, num_classes: int) -> "ConfusionMatrix":
        counts = np.zeros((num_classes, num_classes), dtype=np.int64)
        np.add.at(counts, (np.asarray(true), np.asarray(pred)), 1)
        return cls(counts)

    @property
    def num_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    precision: tuple[float, ...]
    recall: tuple[float, ...]
    f1: tuple[float, ...]
    fraction_incorrect: tuple[float, ...]
    undefined_precision: tuple[bool, ...]  # class never predicted
    undefined_recall: tuple[bool, ...]  # class absent from the truth
    confusion: ConfusionMatrix = field(repr=False)

    def to_dict(self, class_names: tuple[str, ...] | None = None) -> dict:
        names = class_names or tuple(str(k) for k in range(self.confusion.num_classes))
        per_class = {
            name: {
                "precision": self.precision[k],
                "recall": self.recall[k],
                "f1": self.f1[k],
                "fraction_incorrect": self.fraction_incorrect[k],
                "precision_undefined": self.undefined_precision[k],
                "recall_undefined": self.undefined_recall[k],
            }
            for k, name in enumerate(names)
        }
        return {
            "accuracy": self.accuracy,
            "n_samples": self.confusion.total,
            "per_class": per_class,
            "confusion": self.confusion.counts.tolist(),
        }


def metrics_from_confusion(cm: ConfusionMatrix) -> MetricsReport:
    """Per-class precision/recall/F1 and overall accuracy.

    A zero denominator yields 0.0 with the matching undefined flag set.
    """
    counts = cm.counts
    total = cm.total
    if total <= 0:
        raise ParamError("confusion matrix is empty")
    diag = np.diag(counts).astype(np.float64)
    col = counts.sum(axis=0).astype(np.float64)
    row = counts.sum(axis=1).astype(np.float64)
    precision = np.divide(diag, col, out=np.zeros_like(diag), where=col > 0)
    recall = np.divide(diag, row, out=np.zeros_like(diag), where=row > 0)
    pr = precision + recall
    f1 = np.divide(2.0 * precision * recall, pr, out=np.zeros_like(diag), where=pr > 0)
    return MetricsReport(
        accuracy=float(np.trace(counts)) / total,
        precision=tuple(float(v) for v in precision),
        recall=tuple(float(v) for v in recall),
        f1=tuple(float(v) for v in f1),
        fraction_incorrect=tuple(float(v) for v in np.where(row > 0, 1.0 - recall, 0.0)),
        undefined_precision=tuple(bool(v) for v in col == 0),
        undefined_recall=tuple(bool(v) for v in row == 0),
        confusion=cm,
    )


def fractional_incorrect(cm: ConfusionMatrix) -> np.ndarray:
    """Per-class error rate: 1 - recall."""
    return np.asarray(metrics_from_confusion(cm).fraction_incorrect)
