from typing import Dict, Tuple
import logging

from dataclasses import asdict, dataclass

import numpy as np
from scipy.integrate import trapezoid


logger = logging.getLogger(__name__)


METRIC_NAMES = ('binary_accuracy', 'f1', 'auc', 'recall', 'precision')


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class BinaryMetrics:
    binary_accuracy: float
    precision: float
    recall: float
    f1: float
    auc: float

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


def confusion_counts(labels: np.ndarray, predictions: np.ndarray) -> ConfusionCounts:
    labels = np.asarray(labels).astype(bool).ravel()
    predictions = np.asarray(predictions).astype(bool).ravel()
    if labels.shape != predictions.shape:
        raise ValueError(f"{labels.size} labels for {predictions.size} predictions")
    return ConfusionCounts(
        tp=int(np.count_nonzero(labels & predictions)),
        fp=int(np.count_nonzero(~labels & predictions)),
        tn=int(np.count_nonzero(~labels & ~predictions)),
        fn=int(np.count_nonzero(labels & ~predictions)),
    )


def accuracy(counts: ConfusionCounts) -> float:
    if counts.total == 0:
        raise ValueError("accuracy of an empty sample is undefined")
    return (counts.tp + counts.tn) / counts.total


def precision(counts: ConfusionCounts) -> float:
    """TP / (TP + FP), 0 when nothing is predicted positive"""
    predicted = counts.tp + counts.fp
    return counts.tp / predicted if predicted else 0.0


def recall(counts: ConfusionCounts) -> float:
    """TP / (TP + FN), 0 when there are no positives"""
    actual = counts.tp + counts.fn
    return counts.tp / actual if actual else 0.0


def f1_score(counts: ConfusionCounts) -> float:
    p = precision(counts)
    r = recall(counts)
    if p + r == 0:
        return 0.0
    return 2 * p * r / (p + r)


def roc_curve(labels: np.ndarray, scores: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    False and true positive rates at every distinct score threshold, descending

    Tied scores form a single step, so the trapezoid over a tie averages it.

    Returns
    -------
    fpr, tpr starting at (0, 0) and ending at (1, 1)
    """
    labels = np.asarray(labels).astype(bool).ravel()
    scores = np.asarray(scores, dtype=float).ravel()
    if labels.shape != scores.shape:
        raise ValueError(f"{labels.size} labels for {scores.size} scores")
    n_pos = np.count_nonzero(labels)
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC curve needs both positive and negative labels")

    order = np.argsort(-scores, kind='stable')
    sorted_scores = scores[order]
    sorted_labels = labels[order]
    # last index of every run of equal scores
    ends = np.r_[np.flatnonzero(np.diff(sorted_scores)), sorted_scores.size - 1]
    tps = np.cumsum(sorted_labels)[ends]
    fps = (ends + 1) - tps

    tpr = np.r_[0.0, tps / n_pos]
    fpr = np.r_[0.0, fps / n_neg]
    return fpr, tpr


def roc_auc(labels: np.ndarray, scores: np.ndarray) -> float:
    fpr, tpr = roc_curve(labels, scores)
    return float(trapezoid(tpr, fpr))


def binary_metrics(labels: np.ndarray, scores: np.ndarray, threshold: float = 0.5) -> BinaryMetrics:
    """
    Pooled accuracy, precision, recall, F1 at `threshold` and ROC AUC

    AUC is nan when only one class is present.
    """
    labels = np.asarray(labels).ravel()
    scores = np.asarray(scores, dtype=float).ravel()
    counts = confusion_counts(labels, scores >= threshold)
    n_pos = np.count_nonzero(labels)
    if 0 < n_pos < labels.size:
        auc = roc_auc(labels, scores)
    else:
        auc = np.nan
    return BinaryMetrics(
        binary_accuracy=accuracy(counts),
        precision=precision(counts),
        recall=recall(counts),
        f1=f1_score(counts),
        auc=auc,
    )
