import pytest

import numpy as np
import pandas as pd
from scipy import stats

from iot_ddos_gcn.aggregation import (
    REPORT_COLUMNS, aggregate_groups, read_report, t_halfwidth, write_report,
)
from iot_ddos_gcn.metrics import METRIC_NAMES


def _group_rows(values, topology='hybrid_correlation', l=0.0, k=1.0):
    return pd.DataFrame([
        {'group': g, 'topology': topology, 'edge_mode': 'undirected', 'l': l, 'n': 4, 'k': k,
         **{metric: value for metric in METRIC_NAMES}}
        for g, value in enumerate(values)
    ])


def test_identical_groups_have_zero_width():
    report = aggregate_groups(_group_rows([0.8] * 10))
    assert (report['mean'] == 0.8).all()
    assert (report['ci95'] == 0.0).all()
    assert report['metric'].tolist() == list(METRIC_NAMES)


def test_ten_groups_use_t_quantile():
    values = np.linspace(0.5, 0.95, 10)
    report = aggregate_groups(_group_rows(values))
    row = report[report['metric'] == 'f1'].iloc[0]

    assert stats.t.ppf(0.975, 9) == pytest.approx(2.262, abs=5e-4)
    expected = 2.2621571627 * np.std(values, ddof=1) / np.sqrt(10)
    assert row['mean'] == pytest.approx(np.mean(values))
    assert row['ci95'] == pytest.approx(expected, rel=1e-9)


def test_single_group_is_an_error():
    with pytest.raises(ValueError, match="at least 2"):
        aggregate_groups(_group_rows([0.9]))
    with pytest.raises(ValueError):
        t_halfwidth(np.array([0.9]))


def test_cells_are_kept_apart():
    frames = [
        _group_rows([0.9, 0.7], topology='network', k=0.2),
        _group_rows([0.6, 0.6], topology='hybrid_distance', l=0.5, k=0.2),
        _group_rows([0.1, 0.3], topology='network', k=0.0),
    ]
    report = aggregate_groups(frames)
    assert len(report) == 3 * len(METRIC_NAMES)
    f1 = report[report['metric'] == 'f1'].set_index(['topology', 'k'])
    assert f1.loc[('network', 0.2), 'mean'] == pytest.approx(0.8)
    assert f1.loc[('network', 0.0), 'mean'] == pytest.approx(0.2)
    assert f1.loc[('hybrid_distance', 0.2), 'ci95'] == 0.0


def test_missing_columns():
    with pytest.raises(ValueError, match="group"):
        aggregate_groups(_group_rows([0.1, 0.2]).drop(columns=['group']))


def test_duplicate_group_rows():
    rows = _group_rows([0.1, 0.2])
    with pytest.raises(ValueError, match="more than one row"):
        aggregate_groups(pd.concat([rows, rows.iloc[:1]]))


def test_report_roundtrip(tmp_path):
    report = aggregate_groups(_group_rows([0.81, 0.85, 0.9]))
    path = tmp_path / 'metrics.csv'
    write_report(report, path)
    obtained = read_report(path)
    assert list(obtained.columns) == REPORT_COLUMNS
    np.testing.assert_allclose(obtained['mean'], report['mean'], rtol=1e-9)

    pd.DataFrame({'mean': [1.0]}).to_csv(path, index=False)
    with pytest.raises(ValueError, match="missing column"):
        read_report(path)


def test_undefined_values_are_dropped(caplog):
    rows = _group_rows([0.6, 0.7, 0.8])
    rows.loc[1, 'auc'] = np.nan
    report = aggregate_groups(rows).set_index('metric')

    assert report.loc['auc', 'mean'] == pytest.approx(0.7)
    assert report.loc['auc', 'n_groups'] == 2
    assert report.loc['auc', 'ci95'] == pytest.approx(t_halfwidth(np.array([0.6, 0.8])))
    assert report.loc['f1', 'n_groups'] == 3
    assert np.isfinite(report[['mean', 'ci95']].to_numpy()).all()
    assert 'undefined group value(s) dropped' in caplog.text


def test_metric_defined_for_one_group_is_left_out(caplog):
    rows = _group_rows([0.6, 0.7])
    rows.loc[0, 'auc'] = np.nan
    report = aggregate_groups(rows)

    assert 'auc' not in report['metric'].tolist()
    assert len(report) == len(METRIC_NAMES) - 1
    assert 'left out of the report' in caplog.text
