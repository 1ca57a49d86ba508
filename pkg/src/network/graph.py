import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal

import networkx as nx
import numpy as np

NodeKind = Literal["junction", "tank", "reservoir"]
EdgeKind = Literal["pipe", "pump"]
EdgeStatus = Literal["open", "closed"]

ROUGHNESS_RANGE = (50.0, 160.0)
TANK_LEVEL_RANGE = (0.0, 10.0)
DEFAULT_TANK_LEVEL = 5.0


class NetworkValidationError(ValueError):
    """Raised when a network violates one of its structural invariants."""

    def __init__(self, errors: list[str]):
        self.errors = errors
        super().__init__("Invalid network: " + "; ".join(errors))


@dataclass(frozen=True)
class Node:
    """A junction, tank or reservoir.

    Attributes:
        id (str): Unique node identifier
        kind (str): "junction", "tank" or "reservoir"
        elevation_z (float): Elevation in meters
        base_demand (float): Base demand in m³/s (junctions only)
        measured (bool): Whether a pressure sensor is installed
        tank_area (float | None): Tank cross-section in m² (tanks only)
        fixed_head (float | None): Total head in meters (reservoirs only)
        init_level (float | None): Initial tank level in meters (tanks only)
    """
    id: str
    kind: NodeKind
    elevation_z: float
    base_demand: float = 0.0
    measured: bool = True
    tank_area: float | None = None
    fixed_head: float | None = None
    init_level: float | None = None

    @property
    def is_fixed_head(self) -> bool:
        return self.kind != "junction"

    @property
    def start_level(self) -> float:
        return DEFAULT_TANK_LEVEL if self.init_level is None else self.init_level


@dataclass(frozen=True)
class Edge:
    """A pipe or pump; orientation `from_node -> to_node` defines positive flow.

    Attributes:
        id (str): Unique edge identifier
        from_node (str): Upstream node id
        to_node (str): Downstream node id
        kind (str): "pipe" or "pump"
        length_L (float | None): Pipe length in meters
        diameter_D (float | None): Pipe diameter in meters
        roughness_C (float | None): Hazen-Williams coefficient
        pump_shutoff_head_h0 (float | None): Pump shut-off head in meters
        pump_curve_coeff_r (float | None): Pump curve coefficient in s²/m⁵
        status (str): "open" or "closed"
    """
    id: str
    from_node: str
    to_node: str
    kind: EdgeKind
    length_L: float | None = None
    diameter_D: float | None = None
    roughness_C: float | None = None
    pump_shutoff_head_h0: float | None = None
    pump_curve_coeff_r: float | None = None
    status: EdgeStatus = "open"

    @property
    def is_open(self) -> bool:
        return self.status == "open"

    @property
    def hydraulic_length(self) -> float:
        """Length used for hydraulic distance; pumps count as 0 m."""
        return float(self.length_L) if self.kind == "pipe" and self.length_L is not None else 0.0


def check_network(nodes: tuple[Node, ...], edges: tuple[Edge, ...]) -> list[str]:
    """Return every invariant violation of a node/edge set, empty when valid."""
    errors: list[str] = []

    seen: set[str] = set()
    for node in nodes:
        if node.id in seen:
            errors.append(f"duplicate node id '{node.id}'")
        seen.add(node.id)
        if not math.isfinite(node.elevation_z):
            errors.append(f"node '{node.id}' has non-finite elevation")
        if node.base_demand < 0:
            errors.append(f"node '{node.id}' has negative base_demand {node.base_demand}")
        if node.kind != "junction" and node.base_demand != 0:
            errors.append(f"node '{node.id}' is a {node.kind} and cannot carry a base_demand")
        if node.kind == "tank":
            if node.tank_area is None or not node.tank_area > 0:
                errors.append(f"tank '{node.id}' requires tank_area > 0")
            lo, hi = TANK_LEVEL_RANGE
            if not lo <= node.start_level <= hi:
                errors.append(f"tank '{node.id}' init_level {node.start_level} outside [{lo}, {hi}]")
        elif node.tank_area is not None or node.init_level is not None:
            errors.append(f"node '{node.id}' is not a tank but sets tank fields")
        if node.kind == "reservoir":
            if node.fixed_head is None or not math.isfinite(node.fixed_head):
                errors.append(f"reservoir '{node.id}' requires a finite fixed_head")
        elif node.fixed_head is not None:
            errors.append(f"node '{node.id}' is not a reservoir but sets fixed_head")

    seen_edges: set[str] = set()
    for edge in edges:
        if edge.id in seen_edges:
            errors.append(f"duplicate edge id '{edge.id}'")
        seen_edges.add(edge.id)
        for endpoint in (edge.from_node, edge.to_node):
            if endpoint not in seen:
                errors.append(f"edge '{edge.id}' references missing node '{endpoint}'")
        if edge.from_node == edge.to_node:
            errors.append(f"edge '{edge.id}' connects node '{edge.from_node}' to itself")
        if edge.kind == "pipe":
            if edge.length_L is None or not edge.length_L > 0:
                errors.append(f"pipe '{edge.id}' requires length_L > 0")
            if edge.diameter_D is None or not edge.diameter_D > 0:
                errors.append(f"pipe '{edge.id}' requires diameter_D > 0")
            lo, hi = ROUGHNESS_RANGE
            if edge.roughness_C is None or not lo <= edge.roughness_C <= hi:
                errors.append(f"pipe '{edge.id}' requires roughness_C in [{lo:g}, {hi:g}]")
        else:
            if edge.pump_shutoff_head_h0 is None or not edge.pump_shutoff_head_h0 > 0:
                errors.append(f"pump '{edge.id}' requires pump_shutoff_head_h0 > 0")
            if edge.pump_curve_coeff_r is None or not edge.pump_curve_coeff_r > 0:
                errors.append(f"pump '{edge.id}' requires pump_curve_coeff_r > 0")

    if errors or not nodes:
        if not nodes:
            errors.append("network has no nodes")
        return errors

    topology = nx.Graph()
    topology.add_nodes_from(node.id for node in nodes)
    topology.add_edges_from((edge.from_node, edge.to_node) for edge in edges)
    components = sorted((sorted(c) for c in nx.connected_components(topology)), key=lambda c: c[0])
    for component in components[1:]:
        errors.append(f"disconnected component containing node {component[0]}")
    return errors


@dataclass(frozen=True)
class NetworkGraph:
    """Immutable water network 𝒢 = (𝒱, ℰ) with cached adjacency.

    Construction validates every invariant and raises NetworkValidationError
    listing all violations.
    """
    nodes: tuple[Node, ...]
    edges: tuple[Edge, ...]
    node_index: dict[str, int] = field(init=False, repr=False, compare=False, hash=False)
    edge_index: dict[str, int] = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple(self.edges))
        errors = check_network(self.nodes, self.edges)
        if errors:
            raise NetworkValidationError(errors)
        object.__setattr__(self, "node_index", {n.id: i for i, n in enumerate(self.nodes)})
        object.__setattr__(self, "edge_index", {e.id: k for k, e in enumerate(self.edges)})

    @property
    def node_ids(self) -> tuple[str, ...]:
        return tuple(n.id for n in self.nodes)

    @property
    def edge_ids(self) -> tuple[str, ...]:
        return tuple(e.id for e in self.edges)

    def node(self, node_id: str) -> Node:
        try:
            return self.nodes[self.node_index[node_id]]
        except KeyError:
            raise KeyError(f"Unknown node '{node_id}'") from None

    def edge(self, edge_id: str) -> Edge:
        try:
            return self.edges[self.edge_index[edge_id]]
        except KeyError:
            raise KeyError(f"Unknown edge '{edge_id}'") from None

    def nodes_of_kind(self, kind: NodeKind) -> tuple[Node, ...]:
        return tuple(n for n in self.nodes if n.kind == kind)

    def edges_of_kind(self, kind: EdgeKind) -> tuple[Edge, ...]:
        return tuple(e for e in self.edges if e.kind == kind)

    @cached_property
    def _incidence(self) -> dict[str, tuple[tuple[str, ...], tuple[str, ...]]]:
        out: dict[str, list[str]] = {n.id: [] for n in self.nodes}
        inc: dict[str, list[str]] = {n.id: [] for n in self.nodes}
        for e in self.edges:
            out[e.from_node].append(e.id)
            inc[e.to_node].append(e.id)
        return {nid: (tuple(inc[nid]), tuple(out[nid])) for nid in out}

    def in_edges(self, node_id: str) -> tuple[str, ...]:
        """Edges oriented into `node_id` (𝒩_in by static orientation)."""
        return self._incidence[node_id][0]

    def out_edges(self, node_id: str) -> tuple[str, ...]:
        """Edges oriented out of `node_id` (𝒩_out by static orientation)."""
        return self._incidence[node_id][1]

    def incident_edges(self, node_id: str) -> tuple[str, ...]:
        inc, out = self._incidence[node_id]
        return inc + out

    @cached_property
    def _neighbors(self) -> dict[str, tuple[str, ...]]:
        adjacent: dict[str, set[str]] = {n.id: set() for n in self.nodes}
        for e in self.edges:
            adjacent[e.from_node].add(e.to_node)
            adjacent[e.to_node].add(e.from_node)
        return {nid: tuple(sorted(nbrs)) for nid, nbrs in adjacent.items()}

    def neighbors(self, node_id: str) -> tuple[str, ...]:
        """Undirected neighbor set 𝒩(i), sorted by id."""
        return self._neighbors[node_id]

    @cached_property
    def nx_graph(self) -> nx.Graph:
        """Undirected graph weighted by hydraulic length (shortest parallel edge wins)."""
        graph = nx.Graph()
        graph.add_nodes_from(self.node_ids)
        for e in self.edges:
            length = e.hydraulic_length
            if graph.has_edge(e.from_node, e.to_node):
                length = min(length, graph[e.from_node][e.to_node]["length"])
            graph.add_edge(e.from_node, e.to_node, length=length)
        return graph

    @cached_property
    def attention_pairs(self) -> tuple[np.ndarray, np.ndarray]:
        """Directed (target, source) index pairs over 𝒩(i) ∪ {i}, sorted by target then source."""
        targets: list[int] = []
        sources: list[int] = []
        for i, nid in enumerate(self.node_ids):
            support = sorted({i} | {self.node_index[j] for j in self.neighbors(nid)})
            targets.extend([i] * len(support))
            sources.extend(support)
        return np.asarray(targets, dtype=np.int64), np.asarray(sources, dtype=np.int64)

    @cached_property
    def edge_endpoints(self) -> np.ndarray:
        """(|ℰ|, 2) array of (from, to) node indices in edge order."""
        return np.asarray(
            [(self.node_index[e.from_node], self.node_index[e.to_node]) for e in self.edges],
            dtype=np.int64,
        ).reshape(-1, 2)

    @cached_property
    def incidence_matrix(self) -> np.ndarray:
        """(N, E) signed incidence: +1 where the edge ends, -1 where it starts."""
        matrix = np.zeros((len(self.nodes), len(self.edges)))
        for k, (a, b) in enumerate(self.edge_endpoints):
            matrix[a, k] -= 1.0
            matrix[b, k] += 1.0
        return matrix
