import itertools

import pytest

import numpy as np
from sklearn import metrics as skm

from iot_ddos_gcn.metrics import (
    METRIC_NAMES, accuracy, binary_metrics, confusion_counts, f1_score, precision, recall,
    roc_auc, roc_curve,
)


def _pairwise_auc(labels, scores):
    positives = scores[labels == 1]
    negatives = scores[labels == 0]
    wins = 0.0
    for p in positives:
        for n in negatives:
            if p > n:
                wins += 1.0
            elif p == n:
                wins += 0.5
    return wins / (len(positives) * len(negatives))


def _enumerated(labels, predictions):
    tp = sum(1 for y, p in zip(labels, predictions) if y and p)
    fp = sum(1 for y, p in zip(labels, predictions) if not y and p)
    fn = sum(1 for y, p in zip(labels, predictions) if y and not p)
    tn = len(labels) - tp - fp - fn
    prec = tp / (tp + fp) if tp + fp else 0.0
    rec = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
    return (tp + tn) / len(labels), prec, rec, f1


def test_confusion_example():
    counts = confusion_counts(np.array([1, 0, 1, 0]), np.array([1, 1, 0, 0]))
    assert (counts.tp, counts.fp, counts.tn, counts.fn) == (1, 1, 1, 1)
    assert precision(counts) == 0.5
    assert recall(counts) == 0.5
    assert f1_score(counts) == 0.5
    assert accuracy(counts) == 0.5


def test_metrics_match_enumeration():
    for length in range(1, 9):
        vectors = [np.array(v) for v in itertools.product([0, 1], repeat=length)]
        for labels in vectors:
            for predictions in vectors:
                counts = confusion_counts(labels, predictions)
                expected = _enumerated(labels.tolist(), predictions.tolist())
                assert (accuracy(counts), precision(counts), recall(counts), f1_score(counts)) == expected


def test_f1_zero_without_true_positives():
    counts = confusion_counts(np.array([1, 1, 0]), np.array([0, 0, 1]))
    assert f1_score(counts) == 0.0
    assert precision(confusion_counts(np.array([1, 0]), np.array([0, 0]))) == 0.0


def test_auc_matches_pairwise_oracle():
    rng = np.random.default_rng(99)
    for _ in range(1000):
        size = int(rng.integers(2, 40))
        labels = rng.integers(0, 2, size=size)
        labels[0], labels[1] = 0, 1
        scores = np.round(rng.random(size), int(rng.integers(1, 3)))
        assert abs(roc_auc(labels, scores) - _pairwise_auc(labels, scores)) < 1e-12


@pytest.mark.parametrize("labels,scores,expected", [
    ([1, 0], [0.9, 0.1], 1.0),
    ([1, 0], [0.1, 0.9], 0.0),
    ([1, 0, 1, 0], [0.5, 0.5, 0.5, 0.5], 0.5),
    ([1, 1, 0], [0.8, 0.4, 0.4], 0.75),
])
def test_auc_examples(labels, scores, expected):
    assert roc_auc(np.array(labels), np.array(scores)) == pytest.approx(expected)


def test_roc_curve_endpoints():
    fpr, tpr = roc_curve(np.array([0, 1, 1, 0, 1]), np.array([0.1, 0.7, 0.7, 0.3, 0.9]))
    assert (fpr[0], tpr[0]) == (0.0, 0.0)
    assert (fpr[-1], tpr[-1]) == (1.0, 1.0)
    assert np.all(np.diff(fpr) >= 0) and np.all(np.diff(tpr) >= 0)


def test_roc_single_class():
    with pytest.raises(ValueError, match="both positive and negative"):
        roc_curve(np.ones(3), np.array([0.1, 0.2, 0.3]))


def test_binary_metrics_against_sklearn():
    rng = np.random.default_rng(12)
    for _ in range(50):
        labels = rng.integers(0, 2, size=200)
        scores = np.clip(labels * 0.3 + rng.random(200) * 0.7, 0, 1)
        obtained = binary_metrics(labels, scores, threshold=0.5)
        predictions = scores >= 0.5

        assert obtained.binary_accuracy == pytest.approx(skm.accuracy_score(labels, predictions))
        assert obtained.precision == pytest.approx(skm.precision_score(labels, predictions, zero_division=0))
        assert obtained.recall == pytest.approx(skm.recall_score(labels, predictions, zero_division=0))
        assert obtained.f1 == pytest.approx(skm.f1_score(labels, predictions, zero_division=0))
        assert obtained.auc == pytest.approx(skm.roc_auc_score(labels, scores), abs=1e-12)


def test_binary_metrics_single_class_auc_is_nan():
    obtained = binary_metrics(np.zeros(4), np.array([0.1, 0.6, 0.2, 0.3]))
    assert np.isnan(obtained.auc)
    assert obtained.binary_accuracy == 0.75
    assert obtained.f1 == 0.0
    assert list(obtained.to_dict()) == ['binary_accuracy', 'precision', 'recall', 'f1', 'auc']
    assert set(obtained.to_dict()) == set(METRIC_NAMES)


def test_threshold_is_inclusive():
    obtained = binary_metrics(np.array([1, 0]), np.array([0.5, 0.49]))
    assert obtained.recall == 1.0
    assert obtained.precision == 1.0
