from typing import List, Optional, Sequence, Tuple
import logging
import time

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from iot_ddos_gcn.router_tree import aggregate_router_features
from iot_ddos_gcn.topology import (
    EdgeSet, TopologySpec, build_correlation_p2p, build_distance_p2p,
    build_hybrid, build_network_topology, drop_edges, normalize_adjacency,
)
from iot_ddos_gcn.traffic import FEATURE_COLUMNS, NodeLocation


logger = logging.getLogger(__name__)


@dataclass
class GraphSnapshot:
    """
    Graph at one timestamp

    Rows 0..num_iot-1 of features/labels are IoT nodes in ascending node id,
    rows num_iot.. are routers. Router labels are 0 and masked out.
    """
    time: pd.Timestamp
    num_iot: int
    num_routers: int
    features: np.ndarray
    edges: EdgeSet
    labels: np.ndarray
    iot_mask: np.ndarray
    k: float = 0.0
    scenario_id: str = ''
    normalized: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def num_nodes(self) -> int:
        return self.num_iot + self.num_routers

    @property
    def adjacency(self) -> np.ndarray:
        """Normalized adjacency, computed on first use"""
        if self.normalized is None:
            self.normalized = normalize_adjacency(self.edges, self.num_nodes)
        return self.normalized


@dataclass
class FeatureScaler:
    """Per-feature z-score with statistics from training-split IoT rows"""
    mean: np.ndarray
    std: np.ndarray
    feature_names: List[str] = field(default_factory=lambda: list(FEATURE_COLUMNS))

    @classmethod
    def fit(cls, tables: Sequence[pd.DataFrame], feature_names: Sequence[str] = FEATURE_COLUMNS):
        if len(tables) == 0:
            raise ValueError("cannot fit feature statistics without training tables")
        values = np.vstack([table[list(feature_names)].to_numpy(dtype=float) for table in tables])
        mean = values.mean(axis=0)
        std = values.std(axis=0)
        std[std == 0] = 1.0
        return cls(mean=mean, std=std, feature_names=list(feature_names))

    def transform(self, values: np.ndarray) -> np.ndarray:
        return (values - self.mean) / self.std


def node_locations(table: pd.DataFrame) -> List[NodeLocation]:
    first = table.groupby('NODE', sort=True)[['LAT', 'LNG']].first()
    return [NodeLocation(int(node), row.LAT, row.LNG) for node, row in first.iterrows()]


def attack_free_rows(table: pd.DataFrame) -> pd.DataFrame:
    """Rows at timestamps where no node is labeled attacking"""
    attacked_times = table.loc[table['LABEL'] == 1, 'TIME'].unique()
    return table[~table['TIME'].isin(attacked_times)]


def build_base_edges(
        spec: TopologySpec,
        locations: Sequence,
        benign_table: Optional[pd.DataFrame] = None) -> EdgeSet:
    """
    Static edges of a node group before connection loss

    Parameters
    ----------
    spec: TopologySpec of the cell
    locations: node positions (node_id, lat, lng)
    benign_table: attack-free traffic, required for correlation kinds

    Returns
    -------
    EdgeSet over IoT indices (ascending node id) followed by router indices
    """
    node_ids = sorted(loc.node_id for loc in locations)

    p2p_edges = None
    if spec.has_p2p:
        if spec.uses_correlation:
            if benign_table is None:
                raise ValueError(f"{spec.kind} topology needs a benign traffic table")
            benign_nodes = sorted(int(n) for n in benign_table['NODE'].unique())
            if benign_nodes != node_ids:
                raise ValueError("benign table nodes do not match the group's nodes")
            p2p_edges = build_correlation_p2p(benign_table, spec.n, spec.edge_mode)
        else:
            p2p_edges = build_distance_p2p(locations, spec.n, spec.edge_mode)

    if not spec.has_routers:
        return p2p_edges

    network_edges = build_network_topology(spec.router_tree, node_ids)
    if p2p_edges is None:
        return network_edges
    return build_hybrid(p2p_edges, network_edges)


def build_snapshots(
        table: pd.DataFrame,
        spec: TopologySpec,
        rng: np.random.Generator,
        base_edges: Optional[EdgeSet] = None,
        scaler: Optional[FeatureScaler] = None,
        benign_table: Optional[pd.DataFrame] = None,
        features: Sequence[str] = FEATURE_COLUMNS,
        k: float = 0.0,
        scenario_id: str = '') -> List[GraphSnapshot]:
    """
    One GraphSnapshot per timestamp of a traffic table

    Base edges are fixed for the group; connection loss is drawn per snapshot
    from a generator derived from (rng, timestamp index). IoT features are
    standardized before router rows are summed from them.

    Parameters
    ----------
    table: traffic table of one scenario
    spec: TopologySpec of the cell
    rng: numpy Generator for connection loss
    base_edges: precomputed static edges, built from the table if None
    scaler: fitted FeatureScaler, raw features if None
    benign_table: attack-free traffic for correlation topologies;
        defaults to this table's attack-free timestamps
    features: feature column names
    k: attack intensity recorded on the snapshots
    scenario_id: scenario identifier recorded on the snapshots

    Returns
    -------
    list of GraphSnapshot in time order
    """
    tic = time.perf_counter()
    features = list(features)
    if scaler is not None and list(scaler.feature_names) != features:
        raise ValueError(
            f"scaler was fitted on {scaler.feature_names}, snapshots use {features}"
        )

    if base_edges is None:
        if benign_table is None and spec.uses_correlation:
            benign_table = attack_free_rows(table)
        base_edges = build_base_edges(spec, node_locations(table), benign_table)

    table = table.sort_values(['TIME', 'NODE'], kind='stable')
    node_ids = np.sort(table['NODE'].unique())
    times = pd.DatetimeIndex(table['TIME'].unique())
    num_iot, num_times = len(node_ids), len(times)
    if len(table) != num_iot * num_times:
        raise ValueError("traffic table must have one row per (NODE, TIME)")

    values = table[features].to_numpy(dtype=float).reshape(num_times, num_iot, len(features))
    labels = table['LABEL'].to_numpy(dtype=np.int64).reshape(num_times, num_iot)
    if scaler is not None:
        values = scaler.transform(values)

    num_routers = spec.num_routers
    if num_routers:
        values = aggregate_router_features(values, spec.router_tree, node_ids.tolist())
        labels = np.concatenate([labels, np.zeros((num_times, num_routers), dtype=np.int64)], axis=1)
    num_nodes = num_iot + num_routers
    if base_edges.max_index() >= num_nodes:
        raise ValueError(f"base edges reference node {base_edges.max_index()} of {num_nodes}")

    iot_mask = np.arange(num_nodes) < num_iot
    loss_seed = int(rng.integers(0, 2**32))
    # lossless snapshots share one operator
    shared = normalize_adjacency(base_edges, num_nodes) if spec.loss_fraction == 0 else None

    snapshots = []
    for t, timestamp in enumerate(times):
        if spec.loss_fraction > 0:
            loss_rng = np.random.default_rng(np.random.SeedSequence([loss_seed, t]))
            edges = drop_edges(base_edges, spec.loss_fraction, loss_rng)
        else:
            edges = base_edges
        snapshots.append(GraphSnapshot(
            normalized=shared,
            time=timestamp,
            num_iot=num_iot,
            num_routers=num_routers,
            features=values[t],
            edges=edges,
            labels=labels[t],
            iot_mask=iot_mask,
            k=k,
            scenario_id=scenario_id,
        ))

    toc = time.perf_counter()
    logger.debug(f"built {len(snapshots)} snapshots ({spec.kind}) in {toc - tic:.3f}s")
    return snapshots


def batch_snapshots(
        snapshots: Sequence[GraphSnapshot]) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Stacks snapshots into a batch of disjoint graphs

    Returns
    -------
    adjacency (B, N, N), features (B, N, F), labels (B, N), mask (B, N)
    """
    if len(snapshots) == 0:
        raise ValueError("cannot batch an empty list of snapshots")
    num_nodes = {snapshot.num_nodes for snapshot in snapshots}
    if len(num_nodes) != 1:
        raise ValueError(f"snapshots in a batch must share a node count, got {sorted(num_nodes)}")
    adjacency = np.stack([snapshot.adjacency for snapshot in snapshots])
    features = np.stack([snapshot.features for snapshot in snapshots])
    labels = np.stack([snapshot.labels for snapshot in snapshots])
    mask = np.stack([snapshot.iot_mask for snapshot in snapshots])
    return adjacency, features, labels, mask
