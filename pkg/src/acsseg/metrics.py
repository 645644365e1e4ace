"""Boundary and chunk-classification metrics."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .core import AcsError, SegmentAnnotation, Segmentation

THRESHOLDS_S = (0.2, 0.5, 1.0)
# errors are differences of decimal timestamps; 5.0 - 4.8 must count as 0.2
HIT_TOLERANCE_S = 1e-9


class MetricsError(AcsError, ValueError):
    pass


@dataclass
class MetricsReport:
    mean_error_s: float = float("nan")
    barrier_acc: dict[float, float] = field(default_factory=dict)
    per_boundary_errors_s: list[float] = field(default_factory=list)
    chunk_accuracy: float = float("nan")
    chunk_f1_macro: float = float("nan")

    def to_dict(self) -> dict[str, float | None]:
        def num(x):
            return None if x is None or (isinstance(x, float) and np.isnan(x)) else float(x)
        return {
            "mean_error_s": num(self.mean_error_s),
            "barrier_acc_0p2": num(self.barrier_acc.get(0.2)),
            "barrier_acc_0p5": num(self.barrier_acc.get(0.5)),
            "barrier_acc_1p0": num(self.barrier_acc.get(1.0)),
            "chunk_accuracy": num(self.chunk_accuracy),
            "chunk_f1_macro": num(self.chunk_f1_macro),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def _boundaries(x) -> list[float]:
    if isinstance(x, (Segmentation, SegmentAnnotation)):
        return list(x.boundaries_s)
    return [float(b) for b in x]


def boundary_errors(pred, truth) -> list[float]:
    p, t = _boundaries(pred), _boundaries(truth)
    if len(p) != len(t):
        raise MetricsError(f"boundary count mismatch: predicted {len(p)}, truth {len(t)}")
    return [abs(a - b) for a, b in zip(p, t)]


def barrier_accuracy(errors: Sequence[float], thresholds: Iterable[float] = THRESHOLDS_S) -> dict[float, float]:
    """Fraction of boundaries whose error does not exceed each threshold.

    An error equal to the threshold is a hit.
    """
    errors = np.asarray(errors, dtype=np.float64)
    if errors.size == 0:
        return {th: 1.0 for th in thresholds}
    return {th: float(np.mean(errors <= th + HIT_TOLERANCE_S)) for th in thresholds}


def report_from_errors(errors: Sequence[float]) -> MetricsReport:
    errors = [float(e) for e in errors]
    mean = float(np.mean(errors)) if errors else 0.0
    return MetricsReport(mean_error_s=mean, barrier_acc=barrier_accuracy(errors),
                         per_boundary_errors_s=errors)


def boundary_metrics(pred, truth) -> MetricsReport:
    """Positional boundary comparison; chunk fields are left unset."""
    return report_from_errors(boundary_errors(pred, truth))


def pooled_boundary_metrics(pairs: Iterable[tuple]) -> MetricsReport:
    """Pool boundary errors of several runs, then average."""
    errors: list[float] = []
    for pred, truth in pairs:
        errors.extend(boundary_errors(pred, truth))
    return report_from_errors(errors)


def confusion_matrix(pred: Sequence[int], true: Sequence[int], n: int) -> np.ndarray:
    cm = np.zeros((n, n), dtype=np.int64)
    np.add.at(cm, (np.asarray(true, dtype=np.int64), np.asarray(pred, dtype=np.int64)), 1)
    return cm


def chunk_metrics(pred_labels: Sequence[int], true_labels: Sequence[int], n: int) -> tuple[float, float]:
    """Accuracy and macro F1; a class with precision + recall = 0 scores F1 = 0."""
    if len(pred_labels) != len(true_labels):
        raise MetricsError(f"label length mismatch: {len(pred_labels)} vs {len(true_labels)}")
    if len(pred_labels) == 0:
        raise MetricsError("no labels to evaluate")
    cm = confusion_matrix(pred_labels, true_labels, n)
    tp = np.diag(cm).astype(np.float64)
    fp = cm.sum(axis=0) - tp
    fn = cm.sum(axis=1) - tp
    denom = 2 * tp + fp + fn
    f1 = np.divide(2 * tp, denom, out=np.zeros(n), where=denom > 0)
    return float(tp.sum() / cm.sum()), float(f1.mean())


def evaluate(pred: Segmentation, truth: SegmentAnnotation,
             true_labels: Sequence[int] | None = None, n: int | None = None,
             pred_labels: Sequence[int] | None = None) -> MetricsReport:
    report = boundary_metrics(pred, truth)
    if true_labels is not None:
        n = n if n is not None else len(truth.segments)
        labels = pred.chunk_labels if pred_labels is None else pred_labels
        report.chunk_accuracy, report.chunk_f1_macro = chunk_metrics(labels, true_labels, n)
    return report
