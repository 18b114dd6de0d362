from typing import Sequence, Union
import logging
from pathlib import Path

import numpy as np
import pandas as pd
from scipy import stats

from iot_ddos_gcn.metrics import METRIC_NAMES


logger = logging.getLogger(__name__)


CELL_KEYS = ['topology', 'edge_mode', 'l', 'n', 'k']
REPORT_COLUMNS = [*CELL_KEYS, 'metric', 'mean', 'ci95', 'n_groups']


def t_halfwidth(values: np.ndarray, confidence: float = 0.95) -> float:
    """Student-t confidence half-width of the mean, G - 1 degrees of freedom"""
    n_groups = len(values)
    if n_groups < 2:
        raise ValueError(f"confidence interval needs at least 2 groups, got {n_groups}")
    if np.ptp(values) == 0:
        return 0.0
    quantile = stats.t.ppf(0.5 + confidence / 2, n_groups - 1)
    return float(quantile * np.std(values, ddof=1) / np.sqrt(n_groups))


def aggregate_groups(
        per_group_metrics: Union[pd.DataFrame, Sequence[pd.DataFrame]],
        metrics: Sequence[str] = METRIC_NAMES) -> pd.DataFrame:
    """
    Mean and 95% half-width of every metric across node groups

    Parameters
    ----------
    per_group_metrics: rows with columns group, topology, edge_mode, l, n, k and
        the metric columns; a list of such frames is concatenated
    metrics: metric columns to aggregate

    Returns
    -------
    long-format report with REPORT_COLUMNS, sorted by cell and metric order
    """
    if not isinstance(per_group_metrics, pd.DataFrame):
        per_group_metrics = pd.concat(list(per_group_metrics), ignore_index=True)
    missing = [c for c in ['group', *CELL_KEYS, *metrics] if c not in per_group_metrics.columns]
    if missing:
        raise ValueError(f"per-group metrics are missing column(s): {', '.join(missing)}")

    rows = []
    for cell, frame in per_group_metrics.groupby(CELL_KEYS, sort=True):
        n_groups = frame['group'].nunique()
        if n_groups != len(frame):
            raise ValueError(f"cell {cell} has more than one row per group")
        if n_groups < 2:
            raise ValueError(
                f"cell {dict(zip(CELL_KEYS, cell))} has {n_groups} group(s); at least 2 are needed"
            )
        frame = frame.sort_values('group')
        for metric in metrics:
            values = frame[metric].to_numpy(dtype=float)
            finite = values[np.isfinite(values)]
            if len(finite) < 2:
                logger.warning(
                    f"{metric} of cell {dict(zip(CELL_KEYS, cell))} is defined for {len(finite)} group(s); "
                    f"left out of the report"
                )
                continue
            if len(finite) < len(values):
                logger.warning(
                    f"{metric} of cell {dict(zip(CELL_KEYS, cell))}: {len(values) - len(finite)} "
                    f"undefined group value(s) dropped"
                )
            rows.append({
                **dict(zip(CELL_KEYS, cell)),
                'metric': metric,
                'mean': float(finite[0] if np.ptp(finite) == 0 else np.mean(finite)),
                'ci95': t_halfwidth(finite),
                'n_groups': len(finite),
            })
    logger.info(f"Aggregated {len(rows)} report rows over {per_group_metrics['group'].nunique()} groups")
    return pd.DataFrame(rows, columns=REPORT_COLUMNS)


def write_report(report: pd.DataFrame, path: Union[str, Path]):
    report[REPORT_COLUMNS].to_csv(path, index=False, float_format='%.10g')


def read_report(path: Union[str, Path]) -> pd.DataFrame:
    report = pd.read_csv(path)
    missing = [c for c in REPORT_COLUMNS if c not in report.columns]
    if missing:
        raise ValueError(f"report {path} is missing column(s): {', '.join(missing)}")
    return report
