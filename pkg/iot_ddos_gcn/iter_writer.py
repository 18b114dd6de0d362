from typing import Sequence, Union
import logging
from pathlib import Path

import numpy as np

from iot_ddos_gcn.snapshots import GraphSnapshot


logger = logging.getLogger(__name__)


class SnapshotDumpWriter():
    """
    Class to handle iteratively writing graph snapshots as plain text

    Each snapshot becomes one block:

        # snapshot <time> iot=<num_iot> routers=<num_routers> k=<k> scenario=<id>
        edges <E> undirected|directed
        <source> <target>            (E lines)
        features <N> <F>
        <f_1> ... <f_F>              (N lines)
        labels <l_1> ... <l_N>
        iot_mask <m_1> ... <m_N>
    """
    def __init__(self, filename: Union[str, Path], initial_chunk: Sequence[GraphSnapshot]):
        self.filename = Path(filename)
        self.n_written = 0
        self.initialize_file(initial_chunk)

    def initialize_file(self, initial_chunk: Sequence[GraphSnapshot]):
        """Truncates the file and writes the first snapshots"""
        with open(self.filename, 'w') as f:
            for snapshot in initial_chunk:
                self._write_snapshot(f, snapshot)

    def add_chunk(self, chunk: Sequence[GraphSnapshot]):
        with open(self.filename, 'a') as f:
            for snapshot in chunk:
                self._write_snapshot(f, snapshot)

    def _write_snapshot(self, f, snapshot: GraphSnapshot):
        orientation = 'undirected' if snapshot.edges.undirected else 'directed'
        f.write(
            f"# snapshot {snapshot.time.strftime('%Y-%m-%d %H:%M:%S')} "
            f"iot={snapshot.num_iot} routers={snapshot.num_routers} "
            f"k={snapshot.k:g} scenario={snapshot.scenario_id}\n"
        )
        f.write(f"edges {len(snapshot.edges)} {orientation}\n")
        for source, target in snapshot.edges:
            f.write(f"{source} {target}\n")
        n_rows, n_features = snapshot.features.shape
        f.write(f"features {n_rows} {n_features}\n")
        np.savetxt(f, snapshot.features, fmt='%.10g')
        f.write("labels " + " ".join(str(int(v)) for v in snapshot.labels) + "\n")
        f.write("iot_mask " + " ".join(str(int(v)) for v in snapshot.iot_mask) + "\n")
        self.n_written += 1


def read_snapshot_dump(filename: Union[str, Path]) -> list:
    """
    Parses a dump back into dicts with time, edges (E x 2), undirected,
    features, labels and iot_mask
    """
    blocks = []
    with open(filename) as f:
        lines = [line.rstrip('\n') for line in f]

    i = 0
    while i < len(lines):
        header = lines[i].split()
        if header[:2] != ['#', 'snapshot']:
            raise ValueError(f"line {i + 1} of {filename}: expected a snapshot header")
        block = {'time': f"{header[2]} {header[3]}"}
        for field in header[4:]:
            key, value = field.split('=', 1)
            block[key] = value
        n_edges, orientation = int(lines[i + 1].split()[1]), lines[i + 1].split()[2]
        edge_lines = lines[i + 2:i + 2 + n_edges]
        block['edges'] = np.array([[int(v) for v in line.split()] for line in edge_lines],
                                  dtype=np.int64).reshape(-1, 2)
        block['undirected'] = orientation == 'undirected'
        i += 2 + n_edges
        n_rows, n_features = (int(v) for v in lines[i].split()[1:])
        block['features'] = np.array(
            [[float(v) for v in line.split()] for line in lines[i + 1:i + 1 + n_rows]]
        ).reshape(n_rows, n_features)
        i += 1 + n_rows
        block['labels'] = np.array([int(v) for v in lines[i].split()[1:]])
        block['iot_mask'] = np.array([int(v) for v in lines[i + 1].split()[1:]]).astype(bool)
        i += 2
        blocks.append(block)
    return blocks
