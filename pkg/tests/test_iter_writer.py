import numpy as np
import pandas as pd
from numpy.testing import assert_allclose

from iot_ddos_gcn.iter_writer import SnapshotDumpWriter, read_snapshot_dump
from iot_ddos_gcn.snapshots import GraphSnapshot
from iot_ddos_gcn.topology import EdgeSet


def _snapshot(t, undirected=True):
    rng = np.random.default_rng(t)
    return GraphSnapshot(
        time=pd.Timestamp('2023-06-01') + pd.Timedelta(minutes=10 * t),
        num_iot=3,
        num_routers=1,
        features=rng.normal(size=(4, 5)),
        edges=EdgeSet([(0, 3), (1, 3), (2, 3), (0, 1)], undirected=undirected),
        labels=np.array([t % 2, 0, 1, 0]),
        iot_mask=np.array([True, True, True, False]),
        k=0.4,
        scenario_id='start0200_dur4h_ratio1_k0.4',
    )


def test_snapshot_dump_writer(tmp_path):
    snapshots = [_snapshot(t) for t in range(3)]
    writer = SnapshotDumpWriter(tmp_path / 'dump.txt', snapshots[:1])
    writer.add_chunk(snapshots[1:])
    assert writer.n_written == 3

    blocks = read_snapshot_dump(tmp_path / 'dump.txt')
    assert len(blocks) == 3
    for snapshot, block in zip(snapshots, blocks):
        assert block['time'] == snapshot.time.strftime('%Y-%m-%d %H:%M:%S')
        assert block['scenario'] == snapshot.scenario_id
        assert block['iot'] == '3'
        assert block['routers'] == '1'
        assert block['undirected']
        np.testing.assert_array_equal(block['edges'], snapshot.edges.pairs)
        assert_allclose(block['features'], snapshot.features, rtol=1e-9)
        np.testing.assert_array_equal(block['labels'], snapshot.labels)
        np.testing.assert_array_equal(block['iot_mask'], snapshot.iot_mask)


def test_snapshot_dump_truncates(tmp_path):
    path = tmp_path / 'dump.txt'
    SnapshotDumpWriter(path, [_snapshot(0), _snapshot(1)])
    SnapshotDumpWriter(path, [_snapshot(5, undirected=False)])

    blocks = read_snapshot_dump(path)
    assert len(blocks) == 1
    assert not blocks[0]['undirected']
    assert blocks[0]['labels'][0] == 1
