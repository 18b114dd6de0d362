from typing import Iterator, Optional, Sequence, Tuple
import logging
import math

from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.spatial.distance import cdist

from iot_ddos_gcn.router_tree import RouterTree


logger = logging.getLogger(__name__)


DISTANCE_P2P = 'distance_p2p'
CORRELATION_P2P = 'correlation_p2p'
NETWORK = 'network'
HYBRID_DISTANCE = 'hybrid_distance'
HYBRID_CORRELATION = 'hybrid_correlation'
TOPOLOGY_KINDS = (DISTANCE_P2P, CORRELATION_P2P, NETWORK, HYBRID_DISTANCE, HYBRID_CORRELATION)

UNDIRECTED = 'undirected'
NODE_TO_NEIGHBORS = 'directed_node_to_neighbors'
NEIGHBORS_TO_NODE = 'directed_neighbors_to_node'
EDGE_MODES = (UNDIRECTED, NODE_TO_NEIGHBORS, NEIGHBORS_TO_NODE)

P2P_KINDS = (DISTANCE_P2P, CORRELATION_P2P)
ROUTER_KINDS = (NETWORK, HYBRID_DISTANCE, HYBRID_CORRELATION)


class EdgeSet:
    """
    Edges as an (E, 2) array of (source, target) node indices

    Undirected edges are stored once as (min, max). Pairs are kept sorted and
    de-duplicated; self-loops are rejected.
    """

    def __init__(self, pairs, undirected: bool):
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        if (pairs < 0).any():
            raise ValueError("edge endpoints must be non-negative node indices")
        loops = pairs[pairs[:, 0] == pairs[:, 1]]
        if len(loops) > 0:
            raise ValueError(f"self-loop edges are not allowed: {loops[:3].tolist()}")
        if undirected:
            pairs = np.sort(pairs, axis=1)
        self.pairs = np.unique(pairs, axis=0)
        self.undirected = bool(undirected)

    @classmethod
    def empty(cls, undirected: bool = True):
        return cls(np.empty((0, 2), dtype=np.int64), undirected)

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self) -> Iterator[Tuple[int, int]]:
        return (tuple(pair) for pair in self.pairs.tolist())

    def __eq__(self, other) -> bool:
        if not isinstance(other, EdgeSet):
            return NotImplemented
        return self.undirected == other.undirected and np.array_equal(self.pairs, other.pairs)

    def __repr__(self) -> str:
        kind = 'undirected' if self.undirected else 'directed'
        return f"EdgeSet({len(self)} {kind} edges)"

    def as_set(self) -> set:
        return set(self)

    def max_index(self) -> int:
        return int(self.pairs.max()) if len(self) > 0 else -1

    def out_degree(self, num_nodes: int) -> np.ndarray:
        return np.bincount(self.pairs[:, 0], minlength=num_nodes)

    def in_degree(self, num_nodes: int) -> np.ndarray:
        return np.bincount(self.pairs[:, 1], minlength=num_nodes)

    def degree(self, num_nodes: int) -> np.ndarray:
        return self.out_degree(num_nodes) + self.in_degree(num_nodes)


@dataclass
class TopologySpec:
    """
    How the edges of every snapshot are built

    kind: one of TOPOLOGY_KINDS
    n: neighbors per node for the peer-to-peer component
    edge_mode: one of EDGE_MODES, directed modes only for peer-to-peer kinds
    router_tree: required for network and hybrid kinds
    loss_fraction: share of edges dropped at every timestamp
    """
    kind: str
    n: int = 4
    edge_mode: str = UNDIRECTED
    router_tree: Optional[RouterTree] = None
    loss_fraction: float = 0.0

    def __post_init__(self):
        if self.kind not in TOPOLOGY_KINDS:
            raise ValueError(
                f"unknown topology kind {self.kind!r}, valid kinds: {', '.join(TOPOLOGY_KINDS)}"
            )
        if self.edge_mode not in EDGE_MODES:
            raise ValueError(
                f"unknown edge_mode {self.edge_mode!r}, valid modes: {', '.join(EDGE_MODES)}"
            )
        if self.edge_mode != UNDIRECTED and self.kind not in P2P_KINDS:
            raise ValueError(f"{self.kind} topologies only support undirected edges")
        if self.kind in ROUTER_KINDS and self.router_tree is None:
            raise ValueError(f"{self.kind} topology requires a router_tree")
        if self.has_p2p and self.n < 1:
            raise ValueError(f"n must be at least 1, got {self.n}")
        if not 0 <= self.loss_fraction <= 1:
            raise ValueError(f"loss_fraction must be in [0, 1], got {self.loss_fraction}")

    @property
    def has_p2p(self) -> bool:
        return self.kind != NETWORK

    @property
    def has_routers(self) -> bool:
        return self.kind in ROUTER_KINDS

    @property
    def uses_correlation(self) -> bool:
        return self.kind in (CORRELATION_P2P, HYBRID_CORRELATION)

    @property
    def num_routers(self) -> int:
        return self.router_tree.num_routers if self.has_routers else 0


def _select_neighbors(cost: np.ndarray, node_ids: np.ndarray, n: int) -> np.ndarray:
    """
    For every row i, the n column indices j != i with the lowest cost,
    ties broken by smaller node id

    Returns
    -------
    N x n array of neighbor indices
    """
    num_nodes = cost.shape[0]
    neighbors = np.empty((num_nodes, n), dtype=np.int64)
    for i in range(num_nodes):
        order = np.lexsort((node_ids, cost[i]))
        order = order[order != i]
        neighbors[i] = order[:n]
    return neighbors


def _orient(neighbors: np.ndarray, edge_mode: str) -> EdgeSet:
    sources = np.repeat(np.arange(neighbors.shape[0]), neighbors.shape[1])
    targets = neighbors.ravel()
    if edge_mode == UNDIRECTED:
        return EdgeSet(np.column_stack([sources, targets]), undirected=True)
    if edge_mode == NODE_TO_NEIGHBORS:
        return EdgeSet(np.column_stack([sources, targets]), undirected=False)
    if edge_mode == NEIGHBORS_TO_NODE:
        return EdgeSet(np.column_stack([targets, sources]), undirected=False)
    raise ValueError(f"unknown edge_mode {edge_mode!r}, valid modes: {', '.join(EDGE_MODES)}")


def build_distance_p2p(locations: Sequence, n: int, edge_mode: str = UNDIRECTED) -> EdgeSet:
    """
    Links every node to its n geographically closest nodes

    Parameters
    ----------
    locations: objects with node_id, lat and lng (e.g. NodeProfile);
        node index = rank of node_id in ascending order
    n: neighbors per node
    edge_mode: orientation of the links

    Returns
    -------
    EdgeSet over node indices
    """
    locations = sorted(locations, key=lambda loc: loc.node_id)
    if not 1 <= n < len(locations):
        raise ValueError(f"n must be in [1, {len(locations) - 1}] for {len(locations)} nodes, got {n}")
    node_ids = np.array([loc.node_id for loc in locations])
    coords = np.array([[loc.lat, loc.lng] for loc in locations], dtype=float)
    dist = cdist(coords, coords, metric='euclidean')
    return _orient(_select_neighbors(dist, node_ids, n), edge_mode)


def packet_series(table: pd.DataFrame) -> pd.DataFrame:
    """TIME x NODE matrix of packet volumes, columns in ascending node id"""
    series = table.pivot(index='TIME', columns='NODE', values='PACKET').sort_index()
    series = series.reindex(columns=sorted(series.columns))
    if series.isna().any().any():
        raise ValueError("benign table does not cover every (NODE, TIME) pair")
    return series


def build_correlation_p2p(benign: pd.DataFrame, n: int, edge_mode: str = UNDIRECTED) -> EdgeSet:
    """
    Links every node to the n nodes whose benign packet series have the highest
    Pearson correlation with its own

    Zero-variance series give undefined correlations, which rank below every
    defined one.

    Parameters
    ----------
    benign: attack-free traffic table
    n: neighbors per node
    edge_mode: orientation of the links

    Returns
    -------
    EdgeSet over node indices (rank of node id)
    """
    if (benign['LABEL'] != 0).any():
        raise ValueError("correlation topology must be built from attack-free traffic")
    series = packet_series(benign)
    num_times, num_nodes = series.shape
    if num_times < 2:
        raise ValueError(f"correlation needs at least 2 timestamps per node, got {num_times}")
    if not 1 <= n < num_nodes:
        raise ValueError(f"n must be in [1, {num_nodes - 1}] for {num_nodes} nodes, got {n}")

    with np.errstate(invalid='ignore', divide='ignore'):
        corr = np.corrcoef(series.to_numpy(dtype=float).T)
    cost = -np.atleast_2d(corr)
    cost[np.isnan(cost)] = np.inf

    node_ids = series.columns.to_numpy()
    return _orient(_select_neighbors(cost, node_ids, n), edge_mode)


def build_network_topology(router_tree: Optional[RouterTree], node_ids: Sequence[int]) -> EdgeSet:
    """Undirected IoT-to-router and router-to-parent edges"""
    if router_tree is None:
        raise ValueError("network topology requires a router tree")
    return EdgeSet(router_tree.edge_pairs(sorted(node_ids)), undirected=True)


def build_hybrid(p2p_edges: EdgeSet, network_edges: EdgeSet) -> EdgeSet:
    """De-duplicated union of undirected peer-to-peer and network edges"""
    if not (p2p_edges.undirected and network_edges.undirected):
        raise ValueError("hybrid topologies only combine undirected edge sets")
    return EdgeSet(np.vstack([p2p_edges.pairs, network_edges.pairs]), undirected=True)


def dropped_edge_count(num_edges: int, loss_fraction: float) -> int:
    """floor(l * |E|), tolerant to decimal representation error in l"""
    return math.floor(round(loss_fraction * num_edges, 9))


def drop_edges(edges: EdgeSet, loss_fraction: float, rng: np.random.Generator) -> EdgeSet:
    """
    Removes floor(l * |E|) edges chosen uniformly without replacement

    An undirected edge is a single unit.
    """
    if not 0 <= loss_fraction <= 1:
        raise ValueError(f"loss fraction must be in [0, 1], got {loss_fraction}")
    n_drop = dropped_edge_count(len(edges), loss_fraction)
    if n_drop == 0:
        return edges
    keep = np.ones(len(edges), dtype=bool)
    keep[rng.choice(len(edges), size=n_drop, replace=False)] = False
    return EdgeSet(edges.pairs[keep], undirected=edges.undirected)


def adjacency_matrix(edges: EdgeSet, num_nodes: int) -> np.ndarray:
    """Dense 0/1 matrix with A[source, target] = 1, symmetric for undirected edges"""
    if edges.max_index() >= num_nodes:
        raise ValueError(f"edge index {edges.max_index()} out of range for {num_nodes} nodes")
    adjacency = np.zeros((num_nodes, num_nodes))
    adjacency[edges.pairs[:, 0], edges.pairs[:, 1]] = 1.0
    if edges.undirected:
        adjacency[edges.pairs[:, 1], edges.pairs[:, 0]] = 1.0
    return adjacency


def normalize_adjacency(edges: EdgeSet, num_nodes: int) -> np.ndarray:
    """
    Propagation operator with self-loops

    Undirected: D^-1/2 (A + I) D^-1/2
    Directed: row i averages node i and its in-neighbors, rows sum to 1

    Parameters
    ----------
    edges: graph edges
    num_nodes: total node count (IoT + routers)

    Returns
    -------
    dense num_nodes x num_nodes matrix
    """
    adjacency = adjacency_matrix(edges, num_nodes)
    if edges.undirected:
        adjacency += np.eye(num_nodes)
        inv_sqrt_degree = 1.0 / np.sqrt(adjacency.sum(axis=1))
        return adjacency * inv_sqrt_degree[:, None] * inv_sqrt_degree[None, :]

    incoming = adjacency.T + np.eye(num_nodes)
    return incoming / incoming.sum(axis=1, keepdims=True)
