import pytest

import numpy as np

from iot_ddos_gcn.gcn import PARAMETER_NAMES, init_model
from iot_ddos_gcn.optimizer import OptimizerState, optimizer_step


@pytest.fixture
def model():
    return init_model(3, 4, np.random.default_rng(0))


def _grads(model, fill):
    return {name: np.full_like(p, fill) for name, p in model.parameters().items()}


def test_first_step_moves_by_learning_rate(model):
    state = OptimizerState.for_model(model, lr=0.01)
    grads = _grads(model, 0.0)
    grads['W0'][0, 0] = 3.0
    grads['b1'][0] = -0.002

    updated, new_state = optimizer_step(model, grads, state)

    assert updated.W0[0, 0] - model.W0[0, 0] == pytest.approx(-0.01, rel=1e-5)
    assert updated.b1[0] - model.b1[0] == pytest.approx(0.01, rel=1e-4)
    assert new_state.step == 1
    assert state.step == 0


def test_zero_gradient_keeps_parameters(model):
    state = OptimizerState.for_model(model)
    state.m = {name: np.ones_like(p) for name, p in model.parameters().items()}
    state.v = {name: np.ones_like(p) for name, p in model.parameters().items()}
    state.step = 10

    updated, new_state = optimizer_step(model, _grads(model, 0.0), state)

    np.testing.assert_allclose(new_state.m['W0'], 0.9)
    np.testing.assert_allclose(new_state.v['W0'], 0.999)
    # decayed first moment still moves the parameters
    assert not np.array_equal(updated.W0, model.W0)

    fresh = OptimizerState.for_model(model)
    unchanged, _ = optimizer_step(model, _grads(model, 0.0), fresh)
    for name in PARAMETER_NAMES:
        np.testing.assert_array_equal(unchanged.parameters()[name], model.parameters()[name])


def test_zero_learning_rate(model):
    state = OptimizerState.for_model(model, lr=0.0)
    updated, _ = optimizer_step(model, _grads(model, 1.0), state)
    for name in PARAMETER_NAMES:
        np.testing.assert_array_equal(updated.parameters()[name], model.parameters()[name])


def test_trajectory_is_deterministic(model):
    def run():
        current, state = model, OptimizerState.for_model(model)
        rng = np.random.default_rng(5)
        for _ in range(20):
            grads = {name: rng.normal(size=p.shape) for name, p in current.parameters().items()}
            current, state = optimizer_step(current, grads, state)
        return current

    first, second = run(), run()
    for name in PARAMETER_NAMES:
        np.testing.assert_array_equal(first.parameters()[name], second.parameters()[name])


def test_non_finite_gradient(model):
    grads = _grads(model, 0.0)
    grads['W1'][1, 0] = np.nan
    with pytest.raises(FloatingPointError, match="W1"):
        optimizer_step(model, grads, OptimizerState.for_model(model))


def test_missing_or_misshaped_gradient(model):
    grads = _grads(model, 0.0)
    del grads['b0']
    with pytest.raises(ValueError, match="missing gradient for b0"):
        optimizer_step(model, grads, OptimizerState.for_model(model))

    grads = _grads(model, 0.0)
    grads['W0'] = np.zeros((4, 3))
    with pytest.raises(ValueError, match="shape"):
        optimizer_step(model, grads, OptimizerState.for_model(model))
