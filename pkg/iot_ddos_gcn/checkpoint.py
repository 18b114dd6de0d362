"""
Checkpoint layout: the ASCII line `IOTDDOSGCN-CKPT 1\n` followed by an
uncompressed numpy .npz archive. Archive members:

    W0, b0, W1, b1, dropout_rate       model
    opt_lr, opt_betas, opt_eps,
    opt_step, opt_m_<p>, opt_v_<p>      optimizer state (optional)
    scaler_mean, scaler_std,
    scaler_features                     feature standardization (optional)

Member timestamps are fixed so identical contents give identical bytes.
"""
from typing import Optional, Tuple, Union
import io
import logging
import zipfile
from pathlib import Path

import numpy as np

from iot_ddos_gcn.gcn import GcnModel, PARAMETER_NAMES
from iot_ddos_gcn.optimizer import OptimizerState
from iot_ddos_gcn.snapshots import FeatureScaler


logger = logging.getLogger(__name__)


MAGIC = b'IOTDDOSGCN-CKPT'
FORMAT_VERSION = 1
ZIP_DATE_TIME = (1980, 1, 1, 0, 0, 0)


def _write_npz(arrays: dict) -> bytes:
    buffer = io.BytesIO()
    with zipfile.ZipFile(buffer, 'w', compression=zipfile.ZIP_STORED) as archive:
        for name in sorted(arrays):
            info = zipfile.ZipInfo(f"{name}.npy", date_time=ZIP_DATE_TIME)
            with archive.open(info, 'w', force_zip64=True) as member:
                np.lib.format.write_array(member, np.asanyarray(arrays[name]), allow_pickle=False)
    return buffer.getvalue()


def save_checkpoint(
        path: Union[str, Path],
        model: GcnModel,
        state: Optional[OptimizerState] = None,
        scaler: Optional[FeatureScaler] = None):
    """
    Writes model parameters, optimizer state and standardization statistics

    Parameters
    ----------
    path: output file
    model: trained model
    state: optimizer state to resume from
    scaler: training-split feature statistics
    """
    arrays = {name: p for name, p in model.parameters().items()}
    arrays['dropout_rate'] = np.array(model.dropout_rate)
    if state is not None:
        arrays['opt_lr'] = np.array(state.lr)
        arrays['opt_betas'] = np.array([state.beta1, state.beta2])
        arrays['opt_eps'] = np.array(state.eps)
        arrays['opt_step'] = np.array(state.step, dtype=np.int64)
        for name in PARAMETER_NAMES:
            arrays[f'opt_m_{name}'] = state.m[name]
            arrays[f'opt_v_{name}'] = state.v[name]
    if scaler is not None:
        arrays['scaler_mean'] = scaler.mean
        arrays['scaler_std'] = scaler.std
        arrays['scaler_features'] = np.array(scaler.feature_names, dtype=str)

    header = MAGIC + f" {FORMAT_VERSION}\n".encode('ascii')
    with open(path, 'wb') as f:
        f.write(header)
        f.write(_write_npz(arrays))
    logger.debug(f"saved checkpoint to {path}")


def load_checkpoint(
        path: Union[str, Path]) -> Tuple[GcnModel, Optional[OptimizerState], Optional[FeatureScaler]]:
    """
    Reads a checkpoint written by save_checkpoint

    Returns
    -------
    model, optimizer state or None, scaler or None
    """
    with open(path, 'rb') as f:
        header = f.readline()
        payload = f.read()

    parts = header.rstrip(b'\n').split(b' ')
    if len(parts) != 2 or parts[0] != MAGIC:
        raise ValueError(f"{path} is not a checkpoint (bad magic header {header[:32]!r})")
    if parts[1] != str(FORMAT_VERSION).encode('ascii'):
        raise ValueError(
            f"unsupported checkpoint version {parts[1].decode('ascii', 'replace')}, "
            f"expected {FORMAT_VERSION}"
        )

    with np.load(io.BytesIO(payload), allow_pickle=False) as data:
        arrays = {name: data[name] for name in data.files}

    model = GcnModel(
        **{name: arrays[name] for name in PARAMETER_NAMES},
        dropout_rate=float(arrays['dropout_rate']),
    )

    state = None
    if 'opt_step' in arrays:
        beta1, beta2 = arrays['opt_betas']
        state = OptimizerState(
            lr=float(arrays['opt_lr']),
            beta1=float(beta1),
            beta2=float(beta2),
            eps=float(arrays['opt_eps']),
            step=int(arrays['opt_step']),
            m={name: arrays[f'opt_m_{name}'] for name in PARAMETER_NAMES},
            v={name: arrays[f'opt_v_{name}'] for name in PARAMETER_NAMES},
        )

    scaler = None
    if 'scaler_mean' in arrays:
        scaler = FeatureScaler(
            mean=arrays['scaler_mean'],
            std=arrays['scaler_std'],
            feature_names=[str(name) for name in arrays['scaler_features']],
        )
    return model, state, scaler
