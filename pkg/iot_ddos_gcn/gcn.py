from typing import Dict, Optional, Tuple
import logging

from dataclasses import dataclass

import numpy as np
from scipy.special import expit


logger = logging.getLogger(__name__)


PARAMETER_NAMES = ('W0', 'b0', 'W1', 'b1')
# expit saturates to exactly 0 or 1 for |z| > ~37
SCORE_EPS = 1e-15


@dataclass
class GcnModel:
    """
    Two graph-convolution layers with a sigmoid head

    W0: F_in x H, b0: H, W1: H x 1, b1: (1,)
    """
    W0: np.ndarray
    b0: np.ndarray
    W1: np.ndarray
    b1: np.ndarray
    dropout_rate: float = 0.4

    def __post_init__(self):
        if not 0 <= self.dropout_rate < 1:
            raise ValueError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        hidden = self.W0.shape[1]
        if self.b0.shape != (hidden,) or self.W1.shape != (hidden, 1) or self.b1.shape != (1,):
            raise ValueError(
                f"inconsistent parameter shapes W0 {self.W0.shape}, b0 {self.b0.shape}, "
                f"W1 {self.W1.shape}, b1 {self.b1.shape}"
            )

    @property
    def num_features(self) -> int:
        return self.W0.shape[0]

    @property
    def hidden(self) -> int:
        return self.W0.shape[1]

    def parameters(self) -> Dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAMETER_NAMES}

    def with_parameters(self, params: Dict[str, np.ndarray]):
        return GcnModel(**{**self.parameters(), **params}, dropout_rate=self.dropout_rate)

    def copy(self):
        return self.with_parameters({name: p.copy() for name, p in self.parameters().items()})


@dataclass
class ForwardCache:
    model: GcnModel
    adjacency: np.ndarray
    features: np.ndarray
    propagated_features: np.ndarray
    z1: np.ndarray
    dropout_mask: Optional[np.ndarray]
    hidden: np.ndarray
    propagated_hidden: np.ndarray
    z2: np.ndarray
    scores: np.ndarray


def init_model(
        num_features: int,
        hidden: int,
        rng: np.random.Generator,
        dropout_rate: float = 0.4) -> GcnModel:
    """
    Weights uniform in +-sqrt(6 / (fan_in + fan_out)), zero biases

    Parameters
    ----------
    num_features: input feature count F_in
    hidden: hidden channels H
    rng: numpy Generator
    dropout_rate: dropout applied after the first layer in training

    Returns
    -------
    GcnModel
    """
    if num_features < 1 or hidden < 1:
        raise ValueError(f"num_features and hidden must be >= 1, got {num_features}, {hidden}")
    limit0 = np.sqrt(6.0 / (num_features + hidden))
    limit1 = np.sqrt(6.0 / (hidden + 1))
    return GcnModel(
        W0=rng.uniform(-limit0, limit0, size=(num_features, hidden)),
        b0=np.zeros(hidden),
        W1=rng.uniform(-limit1, limit1, size=(hidden, 1)),
        b1=np.zeros(1),
        dropout_rate=dropout_rate,
    )


def forward(
        model: GcnModel,
        adjacency: np.ndarray,
        features: np.ndarray,
        train_mode: bool = False,
        rng: Optional[np.random.Generator] = None,
        dropout_mask: Optional[np.ndarray] = None) -> Tuple[np.ndarray, ForwardCache]:
    """
    scores = sigmoid(A . dropout(ReLU(A . X . W0 + b0)) . W1 + b1)

    Works on one graph (N x N, N x F) or a batch of graphs (B x N x N, B x N x F).
    Dropout is inverted: kept units are scaled by 1 / (1 - p) in training and
    nothing is applied in eval mode.

    Parameters
    ----------
    model: GcnModel
    adjacency: normalized adjacency
    features: node features
    train_mode: apply dropout
    rng: generator for the dropout mask in train mode
    dropout_mask: fixed boolean keep-mask of the hidden activations' shape, overrides rng

    Returns
    -------
    scores per node in (0, 1) and the cache for backward
    """
    adjacency = np.asarray(adjacency, dtype=float)
    features = np.asarray(features, dtype=float)
    if adjacency.shape[-1] != adjacency.shape[-2] or adjacency.shape[-1] != features.shape[-2]:
        raise ValueError(
            f"adjacency {adjacency.shape} does not match features {features.shape}"
        )
    if adjacency.shape[:-2] != features.shape[:-2]:
        raise ValueError(
            f"batch shapes differ: adjacency {adjacency.shape}, features {features.shape}"
        )
    if features.shape[-1] != model.num_features:
        raise ValueError(
            f"model expects {model.num_features} features, got {features.shape[-1]}"
        )

    propagated_features = adjacency @ features
    z1 = propagated_features @ model.W0 + model.b0
    activated = np.maximum(z1, 0.0)

    mask = None
    if train_mode and model.dropout_rate > 0:
        if dropout_mask is not None:
            mask = np.asarray(dropout_mask, dtype=bool)
            if mask.shape != activated.shape:
                raise ValueError(f"dropout mask {mask.shape} does not match {activated.shape}")
        elif rng is None:
            raise ValueError("train mode forward needs an rng or a dropout mask")
        else:
            mask = rng.random(activated.shape) >= model.dropout_rate
        hidden = activated * mask / (1.0 - model.dropout_rate)
    else:
        hidden = activated

    propagated_hidden = adjacency @ hidden
    z2 = (propagated_hidden @ model.W1)[..., 0] + model.b1[0]
    scores = np.clip(expit(z2), SCORE_EPS, 1.0 - SCORE_EPS)

    cache = ForwardCache(
        model=model,
        adjacency=adjacency,
        features=features,
        propagated_features=propagated_features,
        z1=z1,
        dropout_mask=mask,
        hidden=hidden,
        propagated_hidden=propagated_hidden,
        z2=z2,
        scores=scores,
    )
    return scores, cache


def backward(cache: ForwardCache, dscores: np.ndarray) -> Dict[str, np.ndarray]:
    """
    Gradients of a scalar loss with respect to W0, b0, W1, b1

    Parameters
    ----------
    cache: ForwardCache of the forward pass
    dscores: dLoss/dscores, same shape as the scores

    Returns
    -------
    dict of gradients keyed like GcnModel.parameters()
    """
    dscores = np.asarray(dscores, dtype=float)
    if dscores.shape != cache.scores.shape:
        raise ValueError(
            f"upstream gradient {dscores.shape} does not match scores {cache.scores.shape}"
        )
    model = cache.model
    scores = cache.scores

    dz2 = dscores * scores * (1.0 - scores)
    hidden_size = model.W1.shape[0]
    dW1 = cache.propagated_hidden.reshape(-1, hidden_size).T @ dz2.reshape(-1, 1)
    db1 = np.array([dz2.sum()])

    dpropagated_hidden = dz2[..., None] * model.W1[:, 0]
    dhidden = np.swapaxes(cache.adjacency, -1, -2) @ dpropagated_hidden
    if cache.dropout_mask is not None:
        dhidden = dhidden * cache.dropout_mask / (1.0 - model.dropout_rate)
    dz1 = dhidden * (cache.z1 > 0)

    dz1 = dz1.reshape(-1, hidden_size)
    dW0 = cache.propagated_features.reshape(-1, model.num_features).T @ dz1
    db0 = dz1.sum(axis=0)

    return {'W0': dW0, 'b0': db0, 'W1': dW1, 'b1': db1}
