from typing import Optional, Union
import logging
from pathlib import Path

import numpy as np
import pandas as pd

from iot_ddos_gcn.traffic import DATASET_COLUMNS, ROLLING_WINDOWS, check_time_grid


logger = logging.getLogger(__name__)


TIME_FORMAT = '%Y-%m-%d %H:%M:%S'
INT_COLUMNS = ['NODE', 'ACTIVE', 'LABEL']
FLOAT_COLUMNS = ['LAT', 'LNG', 'PACKET', *ROLLING_WINDOWS]


def coerce_dtypes(table: pd.DataFrame) -> pd.DataFrame:
    """Casts dataset columns to their canonical dtypes"""
    table = table.copy()
    for column in INT_COLUMNS:
        table[column] = table[column].astype(np.int64)
    for column in FLOAT_COLUMNS:
        table[column] = table[column].astype(np.float64)
    table['TIME'] = pd.to_datetime(table['TIME'], format=TIME_FORMAT)
    return table


def validate_traffic_table(table: pd.DataFrame):
    """
    Checks the TrafficTable invariants, raising ValueError on the first violation

    Parameters
    ----------
    table: traffic table with DATASET_COLUMNS
    """
    missing = [column for column in DATASET_COLUMNS if column not in table.columns]
    if missing:
        raise ValueError(f"traffic table is missing column(s): {', '.join(missing)}")
    if len(table) == 0:
        return

    times = pd.DatetimeIndex(table['TIME'].drop_duplicates().sort_values())
    check_time_grid(times)

    if table.duplicated(['NODE', 'TIME']).any():
        raise ValueError("traffic table has more than one row per (NODE, TIME)")
    if not set(np.unique(table['ACTIVE'])) <= {0, 1}:
        raise ValueError("ACTIVE must be 0 or 1")
    if not set(np.unique(table['LABEL'])) <= {0, 1}:
        raise ValueError("LABEL must be 0 or 1")
    inactive = table['ACTIVE'] == 0
    if (table.loc[inactive, 'PACKET'] != 0).any():
        raise ValueError("PACKET must be 0 on inactive rows")
    if ((table['LABEL'] == 1) & inactive).any():
        raise ValueError("LABEL = 1 on an inactive row")


def write_dataset(
        table: pd.DataFrame,
        path: Union[str, Path],
        decimals: Optional[int] = None):
    """
    Writes a traffic table as comma-separated text

    Parameters
    ----------
    table: traffic table
    path: output file
    decimals: round float columns for display; None keeps full precision
    """
    missing = [column for column in DATASET_COLUMNS if column not in table.columns]
    if missing:
        raise ValueError(f"traffic table is missing column(s): {', '.join(missing)}")

    out = table[DATASET_COLUMNS]
    if decimals is not None:
        out = out.round({column: decimals for column in FLOAT_COLUMNS})
    out.to_csv(path, index=False, date_format=TIME_FORMAT)
    logger.debug(f"wrote {len(out)} rows to {path}")


def read_dataset(path: Union[str, Path]) -> pd.DataFrame:
    """
    Reads a traffic table written by write_dataset

    Parameters
    ----------
    path: dataset file

    Returns
    -------
    traffic table with canonical dtypes
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"dataset file {path} does not exist")
    try:
        table = pd.read_csv(path, float_precision='round_trip')
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise ValueError(f"malformed dataset file {path}: {e}") from e

    missing = [column for column in DATASET_COLUMNS if column not in table.columns]
    if missing:
        raise ValueError(f"dataset file {path} is missing column(s): {', '.join(missing)}")
    table = table[DATASET_COLUMNS]

    try:
        table = coerce_dtypes(table)
    except (ValueError, TypeError) as e:
        raise ValueError(f"malformed values in dataset file {path}: {e}") from e

    validate_traffic_table(table)
    return table
