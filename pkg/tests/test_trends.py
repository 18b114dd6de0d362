"""
Desk-scale trend checks on one synthetic group

These train real models at 128 hidden channels and take tens of minutes;
run them with `pytest --runslow`.
"""
import os

import pytest

import numpy as np

from iot_ddos_gcn.experiment import (
    Cell, load_config, load_group_data, make_group, make_scenarios, run_cell, write_group,
)


CONFIG_PATH = os.path.join(os.path.dirname(__file__), '..', 'configs', 'desk.yaml')
NOISE = 0.03


@pytest.fixture(scope='module')
def desk(tmp_path_factory):
    config = load_config(CONFIG_PATH)
    data_dir = tmp_path_factory.mktemp('desk') / 'data'
    group = make_group(config, 0)
    write_group(group, make_scenarios(config, group), data_dir)
    load_group_data.cache_clear()

    f1_by_cell = {}

    def f1(topology, l, n):
        key = (topology, l, n)
        if key not in f1_by_cell:
            cell = Cell(0, topology, 'undirected', l, n)
            metrics = run_cell(config, cell, data_dir).metrics.sort_values('k')
            f1_by_cell[key] = metrics.set_index('k')['f1']
        return f1_by_cell[key]

    yield config, f1
    load_group_data.cache_clear()


@pytest.mark.slow
def test_f1_grows_with_attack_intensity(desk):
    config, f1 = desk
    scores = f1('hybrid_correlation', 0.0, 4)
    assert scores.index.tolist() == config.k_grid
    assert np.all(np.diff(scores.to_numpy()) >= -NOISE)
    assert scores.loc[1.0] >= 0.85


@pytest.mark.slow
def test_connection_loss_is_tolerated(desk):
    _, f1 = desk
    lossless = f1('hybrid_correlation', 0.0, 4)
    lossy = f1('hybrid_correlation', 0.5, 4)
    np.testing.assert_array_less(np.abs(lossless.to_numpy() - lossy.to_numpy()), 0.10)


@pytest.mark.slow
def test_peer_edges_help_against_mimicking_attacks(desk):
    _, f1 = desk
    hybrid = f1('hybrid_correlation', 0.5, 4)
    network_only = f1('network', 0.5, 0)
    assert network_only.loc[0.0] <= hybrid.loc[0.0] - 0.10


@pytest.mark.slow
def test_four_edges_per_node(desk):
    _, f1 = desk
    one = f1('hybrid_correlation', 0.0, 1).mean()
    four = f1('hybrid_correlation', 0.0, 4).mean()
    dense = f1('hybrid_correlation', 0.0, 49).mean()
    assert four >= one + 0.02
    assert dense <= four + NOISE
