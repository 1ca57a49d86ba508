import logging
from dataclasses import dataclass
from typing import Any

import networkx as nx
import numpy as np
from numpy.typing import NDArray

from network.graph import NetworkGraph

logger = logging.getLogger(__name__)

DEFAULT_RESOLUTION = 1.0


@dataclass(frozen=True)
class Clustering:
    """Partition of the network into hydraulically coherent clusters.

    Attributes:
        assignment (dict[str, int]): Cluster index per node id
        modularity (float): Newman-Girvan modularity Q of the partition
    """
    assignment: dict[str, int]
    modularity: float

    @property
    def n_clusters(self) -> int:
        return len(set(self.assignment.values()))

    def labels(self, node_ids: tuple[str, ...]) -> NDArray[np.int64]:
        """Cluster index per node, in the given node order."""
        return np.array([self.assignment[n] for n in node_ids], dtype=np.int64)

    def members(self, cluster: int) -> list[str]:
        return sorted(n for n, c in self.assignment.items() if c == cluster)

    def to_dict(self) -> dict[str, Any]:
        return {**self.assignment, "modularity": self.modularity}

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "Clustering":
        assignment = {str(k): int(v) for k, v in raw.items() if k != "modularity"}
        return cls(assignment=assignment, modularity=float(raw.get("modularity", 0.0)))


def topology_graph(g: NetworkGraph) -> nx.Graph:
    """Unweighted undirected topology with nodes inserted in lexicographic id order."""
    graph = nx.Graph()
    graph.add_nodes_from(sorted(g.node_ids))
    graph.add_edges_from(sorted((min(e.from_node, e.to_node), max(e.from_node, e.to_node)) for e in g.edges))
    return graph


def louvain(g: NetworkGraph, seed: int = 0, resolution: float = DEFAULT_RESOLUTION) -> Clustering:
    """Louvain modularity maximization on the unweighted topology.

    The graph is built in lexicographic id order and networkx visits its nodes
    in an order shuffled by `seed`, so the result depends on topology and seed
    only, never on the order nodes are declared in. Communities that come
    back disconnected are split into their connected components. Clusters are
    numbered by their lexicographically smallest node id.
    """
    graph = topology_graph(g)
    communities = nx.community.louvain_communities(graph, weight=None, resolution=resolution, seed=seed)
    parts: list[set[str]] = []
    for community in communities:
        parts.extend(set(c) for c in nx.connected_components(graph.subgraph(community)))
    parts.sort(key=min)
    modularity = (
        float(nx.community.modularity(graph, parts, weight=None, resolution=resolution))
        if graph.number_of_edges()
        else 0.0
    )
    assignment = {node_id: k for k, part in enumerate(parts) for node_id in part}
    logger.info("Louvain found %d clusters on %d nodes (Q=%.4f)", len(parts), len(assignment), modularity)
    return Clustering(assignment=dict(sorted(assignment.items())), modularity=modularity)
