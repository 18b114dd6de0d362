import pytest

import numpy as np

from iot_ddos_gcn.checkpoint import MAGIC, load_checkpoint, save_checkpoint
from iot_ddos_gcn.gcn import PARAMETER_NAMES, init_model
from iot_ddos_gcn.optimizer import OptimizerState, optimizer_step
from iot_ddos_gcn.snapshots import FeatureScaler


@pytest.fixture
def trained():
    model = init_model(5, 6, np.random.default_rng(0), dropout_rate=0.25)
    state = OptimizerState.for_model(model, lr=0.005)
    grads = {name: np.ones_like(p) for name, p in model.parameters().items()}
    model, state = optimizer_step(model, grads, state)
    scaler = FeatureScaler(mean=np.arange(5.0), std=np.ones(5) * 2)
    return model, state, scaler


def test_checkpoint_restores_everything(tmp_path, trained):
    model, state, scaler = trained
    path = tmp_path / 'checkpoint.bin'
    save_checkpoint(path, model, state, scaler)

    loaded_model, loaded_state, loaded_scaler = load_checkpoint(path)

    for name in PARAMETER_NAMES:
        np.testing.assert_array_equal(loaded_model.parameters()[name], model.parameters()[name])
        np.testing.assert_array_equal(loaded_state.m[name], state.m[name])
        np.testing.assert_array_equal(loaded_state.v[name], state.v[name])
    assert loaded_model.dropout_rate == 0.25
    assert (loaded_state.lr, loaded_state.step) == (0.005, 1)
    assert (loaded_state.beta1, loaded_state.beta2, loaded_state.eps) == (0.9, 0.999, 1e-8)
    np.testing.assert_array_equal(loaded_scaler.mean, scaler.mean)
    assert loaded_scaler.feature_names == scaler.feature_names


def test_checkpoint_model_only(tmp_path, trained):
    model, _, _ = trained
    path = tmp_path / 'model.bin'
    save_checkpoint(path, model)
    _, state, scaler = load_checkpoint(path)
    assert state is None
    assert scaler is None


def test_checkpoint_bytes_are_deterministic(tmp_path, trained):
    model, state, scaler = trained
    save_checkpoint(tmp_path / 'a.bin', model, state, scaler)
    save_checkpoint(tmp_path / 'b.bin', model.copy(), state, scaler)
    first = (tmp_path / 'a.bin').read_bytes()
    assert first.startswith(MAGIC + b' 1\n')
    assert first == (tmp_path / 'b.bin').read_bytes()


def test_checkpoint_bad_magic(tmp_path):
    path = tmp_path / 'bad.bin'
    path.write_bytes(b'NOT-A-CHECKPOINT 1\n' + b'\x00' * 16)
    with pytest.raises(ValueError, match="bad magic"):
        load_checkpoint(path)


def test_checkpoint_bad_version(tmp_path, trained):
    model, _, _ = trained
    path = tmp_path / 'future.bin'
    save_checkpoint(path, model)
    payload = path.read_bytes().split(b'\n', 1)[1]
    path.write_bytes(MAGIC + b' 99\n' + payload)
    with pytest.raises(ValueError, match="version 99"):
        load_checkpoint(path)
