from typing import Optional, Tuple
import logging

from dataclasses import dataclass

import numpy as np


logger = logging.getLogger(__name__)


LOG_CLAMP = 1e-12


@dataclass
class LossConfig:
    """Class weights and the boolean mask of nodes that count towards the loss"""
    w_neg: float = 1.0
    w_pos: float = 1.0
    mask: Optional[np.ndarray] = None


def class_weights_from_labels(labels: np.ndarray, mask: Optional[np.ndarray] = None) -> Tuple[float, float]:
    """
    w_c = T / (2 T_c) over the masked labels

    Returns
    -------
    (w_neg, w_pos)
    """
    labels = np.asarray(labels)
    if mask is not None:
        labels = labels[np.asarray(mask, dtype=bool)]
    total = labels.size
    positives = int(np.count_nonzero(labels == 1))
    negatives = total - positives
    if positives == 0 or negatives == 0:
        raise ValueError(
            f"class weights need both classes, got {negatives} negative and {positives} positive labels"
        )
    return total / (2 * negatives), total / (2 * positives)


def weighted_bce_loss(
        scores: np.ndarray,
        labels: np.ndarray,
        cfg: LossConfig) -> Tuple[float, np.ndarray]:
    """
    Class-weighted binary cross-entropy averaged over masked entries

    loss = -(1/M) sum_masked [w_pos y log(s) + w_neg (1 - y) log(1 - s)]

    Log arguments are clamped at 1e-12; the gradient is zero where clamped
    and off the mask.

    Parameters
    ----------
    scores: predicted probabilities
    labels: 0/1 labels of the same shape
    cfg: LossConfig

    Returns
    -------
    loss value and dLoss/dscores
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if scores.shape != labels.shape:
        raise ValueError(f"scores {scores.shape} and labels {labels.shape} differ in shape")
    if cfg.mask is None:
        mask = np.ones(scores.shape, dtype=bool)
    else:
        mask = np.broadcast_to(np.asarray(cfg.mask, dtype=bool), scores.shape)
    n_masked = np.count_nonzero(mask)
    if n_masked == 0:
        raise ValueError("loss mask selects no entries")

    pos_arg = np.maximum(scores, LOG_CLAMP)
    neg_arg = np.maximum(1.0 - scores, LOG_CLAMP)
    terms = cfg.w_pos * labels * np.log(pos_arg) + cfg.w_neg * (1.0 - labels) * np.log(neg_arg)
    loss = -np.sum(terms[mask]) / n_masked

    grad = (
        -cfg.w_pos * labels / pos_arg * (scores > LOG_CLAMP)
        + cfg.w_neg * (1.0 - labels) / neg_arg * ((1.0 - scores) > LOG_CLAMP)
    )
    grad = np.where(mask, grad, 0.0) / n_masked
    return float(loss), grad
