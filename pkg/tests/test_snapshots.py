import pytest

import numpy as np
import pandas as pd

from iot_ddos_gcn.router_tree import RouterTree
from iot_ddos_gcn.snapshots import (
    FeatureScaler, attack_free_rows, batch_snapshots, build_base_edges, build_snapshots, node_locations,
)
from iot_ddos_gcn.topology import TopologySpec
from iot_ddos_gcn.traffic import (
    FEATURE_COLUMNS, AttackScenario, CauchyParams, NodeProfile, generate_traffic, make_horizon,
)


N_NODES = 50
N_TIMES = 24


@pytest.fixture(scope='module')
def profiles():
    rng = np.random.default_rng(8)
    params = CauchyParams(x0=5.0, gamma=2.0, m=100.0)
    return [
        NodeProfile(node_id=i, lat=float(rng.uniform(40.7, 40.8)), lng=float(rng.uniform(-74.0, -73.9)),
                    benign_params=params, activity_period=120, activity_duty_cycle=0.5,
                    activity_phase=float(rng.uniform(0, 120)))
        for i in range(N_NODES)
    ]


@pytest.fixture(scope='module')
def table(profiles):
    scenario = AttackScenario(
        k=0.8, start_time=pd.Timestamp('2023-06-01 01:00'), duration=2,
        participation_ratio=0.5, attacker_set=set(range(0, N_NODES, 2)),
    )
    return generate_traffic(profiles, scenario, make_horizon('2023-06-01', N_TIMES), np.random.default_rng(3))


@pytest.fixture(scope='module')
def benign(profiles):
    return generate_traffic(profiles, None, make_horizon('2023-06-01', N_TIMES), np.random.default_rng(4))


def test_lossless_snapshots_share_edges(table):
    spec = TopologySpec(kind='distance_p2p', n=4)
    snapshots = build_snapshots(table, spec, np.random.default_rng(0))

    assert len(snapshots) == N_TIMES
    assert all(s.edges == snapshots[0].edges for s in snapshots)
    assert all(s.adjacency is snapshots[0].adjacency for s in snapshots)
    assert [s.time for s in snapshots] == list(make_horizon('2023-06-01', N_TIMES))


def test_lossy_snapshots_drop_per_timestamp(table):
    spec = TopologySpec(kind='distance_p2p', n=4, loss_fraction=0.5)
    base = build_base_edges(spec, node_locations(table))
    snapshots = build_snapshots(table, spec, np.random.default_rng(0), base_edges=base)

    for snapshot in snapshots:
        assert len(snapshot.edges) == len(base) - len(base) // 2
        assert snapshot.edges.as_set() <= base.as_set()
    assert len({frozenset(s.edges.as_set()) for s in snapshots}) > 1


def test_network_snapshot_rows(table):
    spec = TopologySpec(kind='network', router_tree=RouterTree.single_router(range(N_NODES)))
    snapshots = build_snapshots(table, spec, np.random.default_rng(0))

    snapshot = snapshots[0]
    assert snapshot.features.shape == (N_NODES + 1, len(FEATURE_COLUMNS))
    assert snapshot.num_nodes == N_NODES + 1
    assert not snapshot.iot_mask[-1]
    assert snapshot.iot_mask[:-1].all()
    assert snapshot.labels[-1] == 0
    np.testing.assert_allclose(snapshot.features[-1], snapshot.features[:-1].sum(axis=0))


def test_router_rows_sum_standardized_features(table):
    spec = TopologySpec(kind='hybrid_distance', n=4, router_tree=RouterTree.balanced([-1, 0, 0], range(N_NODES)))
    scaler = FeatureScaler.fit([table])
    snapshots = build_snapshots(table, spec, np.random.default_rng(0), scaler=scaler)

    snapshot = snapshots[5]
    iot = snapshot.features[:N_NODES]
    np.testing.assert_allclose(snapshot.features[N_NODES], iot.sum(axis=0))
    np.testing.assert_allclose(snapshot.features[N_NODES + 1], iot[:25].sum(axis=0))
    np.testing.assert_allclose(snapshot.features[N_NODES + 2], iot[25:].sum(axis=0))


def test_labels_follow_table(table):
    spec = TopologySpec(kind='distance_p2p', n=2)
    snapshots = build_snapshots(table, spec, np.random.default_rng(0), k=0.8, scenario_id='s')

    labels = np.stack([s.labels for s in snapshots])
    expected = table.pivot(index='TIME', columns='NODE', values='LABEL').to_numpy()
    np.testing.assert_array_equal(labels, expected)
    assert {s.k for s in snapshots} == {0.8}


def test_correlation_snapshots_use_benign_table(table, benign):
    spec = TopologySpec(kind='correlation_p2p', n=4)
    from_benign = build_snapshots(table, spec, np.random.default_rng(0), benign_table=benign)
    expected = build_base_edges(spec, node_locations(benign), benign)
    assert from_benign[0].edges == expected

    # without a benign table the attack-free timestamps of the table are used
    implicit = build_snapshots(table, spec, np.random.default_rng(0))
    assert implicit[0].edges == build_base_edges(spec, node_locations(table), attack_free_rows(table))


def test_snapshots_are_deterministic(table):
    spec = TopologySpec(kind='distance_p2p', n=4, loss_fraction=0.3)
    first = build_snapshots(table, spec, np.random.default_rng(42))
    second = build_snapshots(table, spec, np.random.default_rng(42))
    for a, b in zip(first, second):
        assert a.edges == b.edges
        np.testing.assert_array_equal(a.features, b.features)


def test_adjacency_is_linear_in_features(table):
    spec = TopologySpec(kind='distance_p2p', n=4, loss_fraction=0.3)
    snapshot = build_snapshots(table, spec, np.random.default_rng(1))[3]
    rng = np.random.default_rng(2)
    x = rng.normal(size=(N_NODES, 5))
    y = rng.normal(size=(N_NODES, 5))
    a = snapshot.adjacency
    np.testing.assert_allclose(a @ (2 * x + 3 * y), 2 * (a @ x) + 3 * (a @ y), atol=1e-12)


def test_feature_scaler(table):
    scaler = FeatureScaler.fit([table])
    standardized = scaler.transform(table[FEATURE_COLUMNS].to_numpy())
    np.testing.assert_allclose(standardized.mean(axis=0), 0, atol=1e-10)
    np.testing.assert_allclose(standardized.std(axis=0), 1)

    constant = table.assign(PACKET=1.0)
    assert FeatureScaler.fit([constant]).std[0] == 1.0

    with pytest.raises(ValueError):
        FeatureScaler.fit([])


def test_scaler_feature_mismatch(table):
    scaler = FeatureScaler.fit([table], ['PACKET'])
    with pytest.raises(ValueError, match="scaler was fitted"):
        build_snapshots(table, TopologySpec(kind='distance_p2p'), np.random.default_rng(0), scaler=scaler)


def test_batch_snapshots(table):
    spec = TopologySpec(kind='distance_p2p', n=4)
    snapshots = build_snapshots(table, spec, np.random.default_rng(0))
    adjacency, features, labels, mask = batch_snapshots(snapshots[:3])
    assert adjacency.shape == (3, N_NODES, N_NODES)
    assert features.shape == (3, N_NODES, len(FEATURE_COLUMNS))
    assert labels.shape == mask.shape == (3, N_NODES)
    with pytest.raises(ValueError):
        batch_snapshots([])
