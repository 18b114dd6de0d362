import copy

import pytest
import yaml


TINY_CONFIG = {
    'seed': 3,
    'k_grid': [0.0, 1.0],
    'l_grid': [0.0, 0.5],
    'n': 2,
    'attacks': {
        'start_times': ['02:00', '06:00', '12:00'],
        'durations': [4],
        'ratios': [1.0],
    },
    'topologies': [
        {'kind': 'distance_p2p', 'edge_mode': 'undirected'},
        {'kind': 'network', 'edge_mode': 'undirected'},
    ],
    'groups': {
        'count': 2,
        'nodes_per_group': 6,
        'horizon_hours': 24,
    },
    'training': {
        'epochs': 2,
        'batch_size': 64,
        'hidden': 8,
    },
}


def pytest_addoption(parser):
    parser.addoption(
        "--runslow", action="store_true", default=False, help="run slow desk-scale tests"
    )


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: desk-scale training runs")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def tiny_config_dict():
    return copy.deepcopy(TINY_CONFIG)


@pytest.fixture
def tiny_config_path(tmp_path, tiny_config_dict):
    path = tmp_path / 'tiny.yaml'
    with open(path, 'w') as f:
        yaml.safe_dump(tiny_config_dict, f)
    return path
