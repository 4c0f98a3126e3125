"""Binary classification metrics: confusion matrix, weighted F1, ROC/AUC, PR/AP.

Curves sweep descending distinct score thresholds with tied scores grouped at
one threshold, so every curve is deterministic. AUC is trapezoidal; AP uses
step interpolation (sum of precision times recall increments).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, MetricError


def _validated(y_true, y_pred_or_scores, what: str) -> tuple[np.ndarray, np.ndarray]:
    t = np.asarray(y_true, dtype=np.int64).ravel()
    p = np.asarray(y_pred_or_scores, dtype=np.float64).ravel()
    if t.shape[0] == 0:
        raise DataError(f"{what}: empty input")
    if t.shape != p.shape:
        raise DataError(f"{what}: length mismatch {t.shape[0]} vs {p.shape[0]}")
    if not np.isin(t, (0, 1)).all():
        raise DataError(f"{what}: labels must be binary")
    return t, p


def confusion_and_accuracy(y_true, y_pred) -> tuple[np.ndarray, float]:
    """2x2 confusion (rows = true, cols = predicted) and accuracy."""
    t, p = _validated(y_true, y_pred, "confusion")
    p = p.astype(np.int64)
    if not np.isin(p, (0, 1)).all():
        raise DataError("confusion: predictions must be binary")
    confusion = np.zeros((2, 2), dtype=np.int64)
    for ti, pi in ((0, 0), (0, 1), (1, 0), (1, 1)):
        confusion[ti, pi] = int(np.sum((t == ti) & (p == pi)))
    accuracy = float(np.trace(confusion) / confusion.sum())
    return confusion, accuracy


def weighted_f1(y_true, y_pred) -> float:
    """Per-class F1 averaged with weights proportional to class support."""
    t, p = _validated(y_true, y_pred, "weighted_f1")
    p = p.astype(np.int64)
    total = t.shape[0]
    score = 0.0
    for cls in (0, 1):
        support = int(np.sum(t == cls))
        if support == 0:
            continue
        tp = int(np.sum((t == cls) & (p == cls)))
        fp = int(np.sum((t != cls) & (p == cls)))
        fn = int(np.sum((t == cls) & (p != cls)))
        denom = 2 * tp + fp + fn
        f1 = 0.0 if denom == 0 else 2.0 * tp / denom
        score += support / total * f1
    return score


def _descending_groups(t: np.ndarray, scores: np.ndarray):
    """Cumulative (TP, FP) after each distinct score threshold, descending."""
    order = np.argsort(-scores, kind="stable")
    s_sorted = scores[order]
    t_sorted = t[order]
    # Last index of each tie group marks one threshold.
    boundaries = np.nonzero(np.diff(s_sorted))[0]
    group_ends = np.append(boundaries, s_sorted.shape[0] - 1)
    cum_tp = np.cumsum(t_sorted == 1)[group_ends]
    cum_fp = np.cumsum(t_sorted == 0)[group_ends]
    return cum_tp.astype(np.float64), cum_fp.astype(np.float64)


def roc_auc(y_true, scores) -> tuple[np.ndarray, float]:
    """ROC staircase points (fpr, tpr) from (0,0) to (1,1) and trapezoidal AUC."""
    t, s = _validated(y_true, scores, "roc_auc")
    pos = float(np.sum(t == 1))
    neg = float(np.sum(t == 0))
    if pos == 0 or neg == 0:
        raise MetricError("roc_auc undefined: both classes must be present")
    cum_tp, cum_fp = _descending_groups(t, s)
    tpr = np.concatenate([[0.0], cum_tp / pos])
    fpr = np.concatenate([[0.0], cum_fp / neg])
    auc = float(np.trapezoid(tpr, fpr))
    return np.stack([fpr, tpr], axis=1), auc


def pr_ap(y_true, scores) -> tuple[np.ndarray, float]:
    """Precision-recall points over descending thresholds and step-wise AP."""
    t, s = _validated(y_true, scores, "pr_ap")
    pos = float(np.sum(t == 1))
    if pos == 0:
        raise MetricError("average precision undefined: no positive examples")
    cum_tp, cum_fp = _descending_groups(t, s)
    recall = cum_tp / pos
    precision = cum_tp / (cum_tp + cum_fp)
    prev_recall = np.concatenate([[0.0], recall[:-1]])
    ap = float(np.sum((recall - prev_recall) * precision))
    return np.stack([recall, precision], axis=1), ap


@dataclass
class MetricsReport:
    """Full evaluation bundle for one node split."""

    confusion: np.ndarray
    accuracy: float
    weighted_f1: float
    roc_points: dict[str, np.ndarray]  # per class: (T+1) x 2 of (fpr, tpr)
    auc: dict[str, float]
    pr_points: np.ndarray  # (recall, precision) for the positive class
    average_precision: float

    def to_dict(self) -> dict:
        return {
            "confusion": self.confusion.tolist(),
            "accuracy": self.accuracy,
            "weighted_f1": self.weighted_f1,
            "auc": dict(self.auc),
            "average_precision": self.average_precision,
            "roc_points": {k: v.tolist() for k, v in self.roc_points.items()},
            "pr_points": self.pr_points.tolist(),
        }


def full_report(y_true, y_pred, scores_pos) -> MetricsReport:
    """Compute every metric from labels, hard predictions, and P(class 1)."""
    confusion, accuracy = confusion_and_accuracy(y_true, y_pred)
    wf1 = weighted_f1(y_true, y_pred)
    t = np.asarray(y_true, dtype=np.int64).ravel()
    s = np.asarray(scores_pos, dtype=np.float64).ravel()
    roc1, auc1 = roc_auc(t, s)
    roc0, auc0 = roc_auc(1 - t, 1.0 - s)
    pr_points, ap = pr_ap(t, s)
    return MetricsReport(
        confusion=confusion,
        accuracy=accuracy,
        weighted_f1=wf1,
        roc_points={"class0": roc0, "class1": roc1},
        auc={"class0": auc0, "class1": auc1},
        pr_points=pr_points,
        average_precision=ap,
    )
