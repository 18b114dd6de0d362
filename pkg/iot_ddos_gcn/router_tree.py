from typing import Dict, List, Mapping, Sequence
import logging

import networkx as nx
import numpy as np
from scipy.sparse import csr_matrix


logger = logging.getLogger(__name__)


class RouterTree:
    """
    Rooted hierarchy of routers with IoT nodes attached to leaf routers

    Routers are numbered 0..R-1; parents[r] is the parent of router r, or -1 for the root.
    In a graph over IoT and router nodes, router r sits at index num_iot + r.
    """

    def __init__(self, parents: Sequence[int], assignments: Mapping[int, int]):
        self.parents = [int(p) for p in parents]
        self.assignments = {int(node): int(router) for node, router in assignments.items()}
        self.graph = self._build_graph()
        self._validate_assignments()

    def _build_graph(self) -> nx.DiGraph:
        n_routers = len(self.parents)
        if n_routers == 0:
            raise ValueError("router tree is empty")

        graph = nx.DiGraph()
        graph.add_nodes_from(range(n_routers))
        for router, parent in enumerate(self.parents):
            if parent == -1:
                continue
            if not 0 <= parent < n_routers:
                raise ValueError(f"router {router} has unknown parent {parent}")
            graph.add_edge(parent, router)

        if not nx.is_directed_acyclic_graph(graph):
            raise ValueError(f"router tree contains a cycle: {nx.find_cycle(graph)}")
        if not nx.is_arborescence(graph):
            roots = [r for r, p in enumerate(self.parents) if p == -1]
            raise ValueError(f"routers must form a single rooted tree, found roots {roots}")
        return graph

    def _validate_assignments(self):
        leaves = set(self.leaf_routers)
        for node, router in self.assignments.items():
            if router not in leaves:
                raise ValueError(
                    f"IoT node {node} is assigned to router {router}, which is not a leaf router"
                )

    @classmethod
    def balanced(cls, parents: Sequence[int], node_ids: Sequence[int]):
        """Splits the sorted node ids into contiguous, near-equal chunks over the leaf routers"""
        tree = cls(parents, {})
        chunks = np.array_split(np.sort(np.asarray(node_ids, dtype=int)), len(tree.leaf_routers))
        assignments = {}
        for router, chunk in zip(tree.leaf_routers, chunks):
            for node in chunk:
                assignments[int(node)] = router
        return cls(parents, assignments)

    @classmethod
    def single_router(cls, node_ids: Sequence[int]):
        return cls([-1], {int(node): 0 for node in node_ids})

    @property
    def num_routers(self) -> int:
        return len(self.parents)

    @property
    def leaf_routers(self) -> List[int]:
        return sorted(r for r in self.graph.nodes if self.graph.out_degree(r) == 0)

    def check_nodes(self, node_ids: Sequence[int]):
        """Raises ValueError unless every node is assigned and every assigned node is known"""
        node_set = set(int(n) for n in node_ids)
        orphans = sorted(node_set - set(self.assignments))
        if orphans:
            raise ValueError(f"IoT nodes without a router: {orphans}")
        unknown = sorted(set(self.assignments) - node_set)
        if unknown:
            raise ValueError(f"router assignments reference unknown IoT nodes: {unknown}")

    def subtree_matrix(self, node_ids: Sequence[int]) -> csr_matrix:
        """
        R x num_iot 0/1 matrix: entry (r, i) is 1 when IoT node node_ids[i] is under router r

        Parameters
        ----------
        node_ids: IoT node ids in feature-row order

        Returns
        -------
        sparse subtree membership matrix
        """
        self.check_nodes(node_ids)
        position = {int(node): i for i, node in enumerate(node_ids)}
        rows, cols = [], []
        for node, leaf in self.assignments.items():
            for router in [leaf, *nx.ancestors(self.graph, leaf)]:
                rows.append(router)
                cols.append(position[node])
        data = np.ones(len(rows))
        return csr_matrix((data, (rows, cols)), shape=(self.num_routers, len(node_ids)))

    def edge_pairs(self, node_ids: Sequence[int]) -> np.ndarray:
        """
        IoT-router and router-router pairs as (E, 2) indices into the
        combined IoT + router node order
        """
        self.check_nodes(node_ids)
        num_iot = len(node_ids)
        pairs = [
            (i, num_iot + self.assignments[int(node)])
            for i, node in enumerate(node_ids)
        ]
        pairs += [
            (num_iot + router, num_iot + parent)
            for router, parent in enumerate(self.parents) if parent != -1
        ]
        return np.asarray(pairs, dtype=np.int64).reshape(-1, 2)

    def to_dict(self) -> Dict:
        return {'parents': list(self.parents), 'assignments': dict(self.assignments)}


def aggregate_router_features(
        iot_features: np.ndarray,
        router_tree: RouterTree,
        node_ids: Sequence[int]) -> np.ndarray:
    """
    Appends one row per router holding the sum of the IoT rows in its subtree

    Leaf-router rows sum their assigned IoT rows; each ancestor sums its child
    routers, which is the same as summing every IoT row below it.

    Parameters
    ----------
    iot_features: num_iot x F (or B x num_iot x F) feature matrix
    router_tree: router hierarchy
    node_ids: IoT node ids in row order

    Returns
    -------
    (num_iot + R) x F matrix (batched when the input is)
    """
    iot_features = np.asarray(iot_features, dtype=float)
    if iot_features.shape[-2] != len(node_ids):
        raise ValueError(
            f"feature matrix has {iot_features.shape[-2]} rows for {len(node_ids)} IoT nodes"
        )
    subtree = router_tree.subtree_matrix(node_ids).toarray()
    router_features = subtree @ iot_features
    return np.concatenate([iot_features, router_features], axis=-2)
