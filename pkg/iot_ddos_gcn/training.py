from typing import Callable, Hashable, List, Optional, Sequence, Tuple, TypeVar
import logging
import time
from collections import defaultdict
from operator import attrgetter

from dataclasses import dataclass

import numpy as np
import pandas as pd
from tqdm import tqdm

from iot_ddos_gcn.gcn import GcnModel, backward, forward
from iot_ddos_gcn.loss import LossConfig, class_weights_from_labels, weighted_bce_loss
from iot_ddos_gcn.metrics import binary_metrics
from iot_ddos_gcn.optimizer import OptimizerState, optimizer_step
from iot_ddos_gcn.snapshots import GraphSnapshot, batch_snapshots


logger = logging.getLogger(__name__)

T = TypeVar('T')

HISTORY_COLUMNS = ['epoch', 'train_loss', 'val_f1', 'elapsed']


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 1024
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    hidden: int = 1024
    dropout_rate: float = 0.4
    threshold: float = 0.5
    progress: bool = False

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate < 0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")


def split_scenarios(
        scenarios: Sequence[T],
        ratios: Tuple[float, float, float],
        rng: np.random.Generator,
        key: Callable[[T], float] = attrgetter('k'),
        group: Optional[Callable[[T], Hashable]] = None) -> Tuple[List[T], List[T], List[T]]:
    """
    Partitions whole scenarios into train/val/test, stratified on `key` (k by default)

    Within each stratum val gets max(1, round(r_val * size)), test gets
    max(1, round(r_test * size)) and train keeps the rest. When `group` is
    given, scenarios with the same group value (e.g. one attack shape at every
    k) always land in the same split and the groups themselves are divided.

    Parameters
    ----------
    scenarios: items to split
    ratios: (train, val, test) fractions summing to 1
    rng: numpy Generator
    key: stratification key, ignored when `group` is given
    group: keeps items with equal values together

    Returns
    -------
    train, val, test lists, each in input order
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or min(ratios) <= 0 or abs(sum(ratios) - 1) > 1e-9:
        raise ValueError(f"split ratios must be three positive fractions summing to 1, got {ratios}")

    members = defaultdict(list)
    strata = defaultdict(list)
    for index, scenario in enumerate(scenarios):
        if group is None:
            members[index].append(index)
            strata[key(scenario)].append(index)
        else:
            unit = group(scenario)
            if unit not in members:
                strata[None].append(unit)
            members[unit].append(index)

    assignment = {}
    for stratum in sorted(strata, key=lambda s: (s is not None, s)):
        units = strata[stratum]
        if group is not None:
            units = sorted(units)
        size = len(units)
        n_val = max(1, round(ratios[1] * size))
        n_test = max(1, round(ratios[2] * size))
        if size - n_val - n_test < 1:
            what = 'scenario group(s)' if group is not None else f"scenario(s) with key {stratum}"
            raise ValueError(f"{size} {what} are too few to stratify into train/val/test")
        shuffled = [units[i] for i in rng.permutation(size)]
        for split, chunk in ((1, shuffled[:n_val]), (2, shuffled[n_val:n_val + n_test]),
                             (0, shuffled[n_val + n_test:])):
            for unit in chunk:
                for index in members[unit]:
                    assignment[index] = split

    splits = ([], [], [])
    for index, scenario in enumerate(scenarios):
        splits[assignment[index]].append(scenario)
    return splits


def predict(
        model: GcnModel,
        snapshots: Sequence[GraphSnapshot],
        batch_size: int = 1024) -> List[np.ndarray]:
    """Eval-mode scores per snapshot"""
    scores = []
    for start in range(0, len(snapshots), batch_size):
        adjacency, features, _, _ = batch_snapshots(snapshots[start:start + batch_size])
        batch_scores, _ = forward(model, adjacency, features, train_mode=False)
        scores.extend(batch_scores)
    return scores


def _pooled(snapshots: Sequence[GraphSnapshot], scores: Sequence[np.ndarray]):
    labels = np.concatenate([s.labels[s.iot_mask] for s in snapshots])
    pooled = np.concatenate([score[s.iot_mask] for s, score in zip(snapshots, scores)])
    return labels, pooled


def train(
        model: GcnModel,
        snapshots_train: Sequence[GraphSnapshot],
        snapshots_val: Sequence[GraphSnapshot],
        config: TrainConfig,
        rng: np.random.Generator) -> Tuple[GcnModel, pd.DataFrame, OptimizerState]:
    """
    Mini-batch training with class-weighted BCE, keeping the best validation F1

    Class weights are computed once over all masked training labels. With no
    validation snapshots the last epoch is returned.

    Parameters
    ----------
    model: initial model
    snapshots_train: training snapshots
    snapshots_val: validation snapshots
    config: TrainConfig
    rng: generator for batch order and dropout

    Returns
    -------
    best model, a history DataFrame (epoch, train_loss, val_f1, elapsed) and the
    optimizer state reached at the best epoch
    """
    if len(snapshots_train) == 0:
        raise ValueError("training set is empty")
    logger.info(
        f"Training on {len(snapshots_train)} snapshots, validating on {len(snapshots_val)}"
    )
    tic = time.perf_counter()

    w_neg, w_pos = class_weights_from_labels(
        np.concatenate([s.labels[s.iot_mask] for s in snapshots_train])
    )
    logger.debug(f"class weights: negative {w_neg:.4f}, positive {w_pos:.4f}")

    state = OptimizerState.for_model(
        model, lr=config.learning_rate, beta1=config.beta1, beta2=config.beta2, eps=config.eps
    )
    if not snapshots_val:
        logger.warning("No validation snapshots; returning the last epoch's model")

    best_model, best_state, best_f1 = model, state, -np.inf
    history = []
    for epoch in tqdm(range(1, config.epochs + 1), desc='epochs', disable=not config.progress):
        order = rng.permutation(len(snapshots_train))
        loss_sum, weight_sum = 0.0, 0
        for batch_index, start in enumerate(range(0, len(order), config.batch_size)):
            batch = [snapshots_train[i] for i in order[start:start + config.batch_size]]
            adjacency, features, labels, mask = batch_snapshots(batch)

            scores, cache = forward(model, adjacency, features, train_mode=True, rng=rng)
            loss, dscores = weighted_bce_loss(scores, labels, LossConfig(w_neg, w_pos, mask))
            if not np.isfinite(loss):
                raise FloatingPointError(
                    f"non-finite training loss {loss} at epoch {epoch}, batch {batch_index}"
                )
            grads = backward(cache, dscores)
            model, state = optimizer_step(model, grads, state)

            n_masked = int(np.count_nonzero(mask))
            loss_sum += loss * n_masked
            weight_sum += n_masked

        if snapshots_val:
            labels, scores = _pooled(snapshots_val, predict(model, snapshots_val, config.batch_size))
            val_f1 = binary_metrics(labels, scores, config.threshold).f1
            if val_f1 > best_f1:
                best_model, best_state, best_f1 = model, state, val_f1
        else:
            val_f1 = np.nan
            best_model, best_state = model, state

        history.append({
            'epoch': epoch,
            'train_loss': loss_sum / weight_sum,
            'val_f1': val_f1,
            'elapsed': time.perf_counter() - tic,
        })
        logger.debug(f"epoch {epoch}: train loss {loss_sum / weight_sum:.5f}, val F1 {val_f1:.4f}")

    toc = time.perf_counter()
    logger.info(f"Training Elapsed Time: {toc - tic}")
    return best_model, pd.DataFrame(history, columns=HISTORY_COLUMNS), best_state


def evaluate(
        model: GcnModel,
        snapshots_test: Sequence[GraphSnapshot],
        threshold: float = 0.5,
        batch_size: int = 1024) -> pd.DataFrame:
    """
    Per-k metrics over masked IoT entries pooled across all test snapshots

    Parameters
    ----------
    model: trained model
    snapshots_test: test snapshots carrying their scenario k
    threshold: decision threshold on the scores
    batch_size: inference batch size

    Returns
    -------
    DataFrame with one row per k: k, n_samples, n_positive and the metric columns
    """
    scores = predict(model, snapshots_test, batch_size)
    by_k = defaultdict(list)
    for snapshot, score in zip(snapshots_test, scores):
        by_k[snapshot.k].append((snapshot, score))

    rows = []
    for k in sorted(by_k):
        snapshots, k_scores = zip(*by_k[k])
        labels, pooled = _pooled(snapshots, k_scores)
        n_positive = int(np.count_nonzero(labels))
        if k > 0 and n_positive == 0:
            raise ValueError(f"no attacking labels in the test slice for k={k}")
        metrics = binary_metrics(labels, pooled, threshold)
        rows.append({'k': k, 'n_samples': labels.size, 'n_positive': n_positive, **metrics.to_dict()})
    return pd.DataFrame(rows)
