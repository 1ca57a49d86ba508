import math

import networkx as nx
import pandas as pd

from network.graph import NetworkGraph


def _require_nodes(g: NetworkGraph, *node_ids: str) -> None:
    missing = [n for n in node_ids if n not in g.node_index]
    if missing:
        raise KeyError(f"Unknown node(s): {', '.join(missing)}")


def hydraulic_distance(g: NetworkGraph, i: str, j: str) -> float:
    """Shortest-path length between two nodes weighted by pipe length (pumps weigh 0 m).

    Returns math.inf when no path exists.
    """
    _require_nodes(g, i, j)
    if i == j:
        return 0.0
    try:
        return float(nx.dijkstra_path_length(g.nx_graph, i, j, weight="length"))
    except nx.NetworkXNoPath:
        return math.inf


def shortest_hydraulic_path(g: NetworkGraph, i: str, j: str) -> list[str]:
    """Node sequence realizing `hydraulic_distance`; equal-length routes resolve to the
    lexicographically smallest node sequence.

    Raises:
        ValueError: If the two nodes are not connected
    """
    _require_nodes(g, i, j)
    if i == j:
        return [i]
    try:
        return min(nx.all_shortest_paths(g.nx_graph, i, j, weight="length"))
    except nx.NetworkXNoPath:
        raise ValueError(f"No hydraulic path between '{i}' and '{j}' (infinite distance)") from None


def distance_matrix(g: NetworkGraph) -> pd.DataFrame:
    """All-pairs hydraulic distances, rows and columns in node order; math.inf if unreachable."""
    ids = list(g.node_ids)
    frame = pd.DataFrame(math.inf, index=ids, columns=ids)
    for source, lengths in nx.all_pairs_dijkstra_path_length(g.nx_graph, weight="length"):
        for target, length in lengths.items():
            frame.at[source, target] = float(length)
    return frame
