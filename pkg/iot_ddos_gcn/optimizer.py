from typing import Dict, Tuple
import logging

from dataclasses import dataclass, field, replace

import numpy as np

from iot_ddos_gcn.gcn import GcnModel, PARAMETER_NAMES


logger = logging.getLogger(__name__)


@dataclass
class OptimizerState:
    """
    Adaptive moment estimation state

    lr: learning rate
    beta1, beta2: decay rates of the first and second moment estimates
    eps: added to the denominator
    step: number of updates applied
    m, v: first and second moments per parameter name
    """
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def for_model(cls, model: GcnModel, lr: float = 1e-3, beta1: float = 0.9,
                  beta2: float = 0.999, eps: float = 1e-8):
        params = model.parameters()
        return cls(
            lr=lr, beta1=beta1, beta2=beta2, eps=eps, step=0,
            m={name: np.zeros_like(p) for name, p in params.items()},
            v={name: np.zeros_like(p) for name, p in params.items()},
        )


def optimizer_step(
        model: GcnModel,
        grads: Dict[str, np.ndarray],
        state: OptimizerState) -> Tuple[GcnModel, OptimizerState]:
    """
    One bias-corrected adaptive-moment update

    Parameters
    ----------
    model: current parameters
    grads: gradient per parameter name
    state: optimizer state

    Returns
    -------
    new model and new state; the inputs are left untouched
    """
    params = model.parameters()
    for name in PARAMETER_NAMES:
        if name not in grads:
            raise ValueError(f"missing gradient for {name}")
        if grads[name].shape != params[name].shape:
            raise ValueError(
                f"gradient for {name} has shape {grads[name].shape}, expected {params[name].shape}"
            )
        if not np.isfinite(grads[name]).all():
            raise FloatingPointError(f"non-finite gradient for {name} at step {state.step + 1}")

    step = state.step + 1
    new_params, new_m, new_v = {}, {}, {}
    for name in PARAMETER_NAMES:
        g = grads[name]
        m = state.beta1 * state.m.get(name, np.zeros_like(g)) + (1 - state.beta1) * g
        v = state.beta2 * state.v.get(name, np.zeros_like(g)) + (1 - state.beta2) * g * g
        m_hat = m / (1 - state.beta1 ** step)
        v_hat = v / (1 - state.beta2 ** step)
        new_params[name] = params[name] - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
        new_m[name] = m
        new_v[name] = v

    return model.with_parameters(new_params), replace(state, step=step, m=new_m, v=new_v)
