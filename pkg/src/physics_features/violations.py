"""Conservation-law residuals: Hazen-Williams head loss, mass-balance and
energy-gradient violations, in scalar and time-vectorized form."""
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from network.graph import NetworkGraph

HW_COEFFICIENT = 10.67
HW_FLOW_EXPONENT = 1.852
HW_DIAMETER_EXPONENT = 4.87
DEFAULT_EPSILON = 1e-6


@dataclass
class ObservedState:
    """Observed hydraulic quantities at one instant, keyed by id.

    Attributes:
        flows (Mapping[str, float]): Signed edge flows in m³/s
        heads (Mapping[str, float]): Nodal heads p + z in meters
        demand (Mapping[str, float]): Demand estimate per junction in m³/s
    """
    flows: Mapping[str, float]
    heads: Mapping[str, float] = field(default_factory=dict)
    demand: Mapping[str, float] = field(default_factory=dict)


def hw_resistance(length: ArrayLike, diameter: ArrayLike, roughness: ArrayLike) -> NDArray[np.float64]:
    """Hazen-Williams resistance r such that h_L = r·sign(Q)·|Q|^1.852 (SI units)."""
    L, D, C = (np.asarray(v, dtype=float) for v in (length, diameter, roughness))
    if np.any(L <= 0) or np.any(D <= 0) or np.any(C <= 0):
        raise ValueError("Hazen-Williams parameters L, D and C must be positive")
    return HW_COEFFICIENT * L / (C ** HW_FLOW_EXPONENT * D ** HW_DIAMETER_EXPONENT)


def head_loss(Q: ArrayLike, L: ArrayLike, D: ArrayLike, C: ArrayLike) -> float | NDArray[np.float64]:
    """Hazen-Williams head loss in meters, signed by the flow direction.

    h_L = 10.67 · L · |Q|^1.852 / (C^1.852 · D^4.87) · sign(Q)
    """
    q = np.asarray(Q, dtype=float)
    loss = np.sign(q) * hw_resistance(L, D, C) * np.abs(q) ** HW_FLOW_EXPONENT
    return float(loss) if loss.ndim == 0 else loss


def mass_violation(
    g: NetworkGraph,
    state: ObservedState,
    i: str,
    eps: float = DEFAULT_EPSILON,
    normalize: bool = True,
) -> float:
    """Relative mass-balance residual at junction `i`.

    Inflow and outflow are resolved by the sign of each incident flow. Tanks and
    reservoirs absorb any imbalance in storage and always return 0.
    """
    if g.node(i).kind != "junction":
        return 0.0
    inflow = outflow = 0.0
    for edge_id in g.in_edges(i):
        q = float(state.flows[edge_id])
        if q >= 0:
            inflow += q
        else:
            outflow -= q
    for edge_id in g.out_edges(i):
        q = float(state.flows[edge_id])
        if q >= 0:
            outflow += q
        else:
            inflow -= q
    residual = abs(inflow - outflow - float(state.demand.get(i, 0.0)))
    return residual / (inflow + eps) if normalize else residual


def energy_violation(
    g: NetworkGraph,
    state: ObservedState,
    edge: str,
    roughness_scale: float = 1.0,
    normalize: bool = True,
) -> float:
    """Relative energy-gradient residual along an open pipe.

    Raises:
        ValueError: If the edge is not an open pipe, or both endpoint heads are ≤ 0
    """
    e = g.edge(edge)
    if e.kind != "pipe" or not e.is_open:
        raise ValueError(f"Energy violation is defined for open pipes only; '{edge}' is a {e.status} {e.kind}")
    head_a = float(state.heads[e.from_node])
    head_b = float(state.heads[e.to_node])
    scale = max(head_a, head_b)
    if scale <= 0:
        raise ValueError(
            f"Non-physical state on pipe '{edge}': heads {head_a:g} and {head_b:g} are both ≤ 0"
        )
    loss = head_loss(state.flows[edge], e.length_L, e.diameter_D, float(e.roughness_C) * roughness_scale)
    # |H_a - H_b - h_L(Q)| is orientation independent because h_L is odd in Q
    residual = abs(head_a - head_b - loss)
    return residual / scale if normalize else residual


def node_energy_violation(
    g: NetworkGraph,
    state: ObservedState,
    i: str,
    roughness_scale: float = 1.0,
    normalize: bool = True,
) -> float:
    """Largest energy violation over the open pipes incident to `i`; 0 when there are none."""
    values = [
        energy_violation(g, state, edge_id, roughness_scale, normalize)
        for edge_id in g.incident_edges(i)
        if g.edge(edge_id).kind == "pipe" and g.edge(edge_id).is_open
    ]
    return max(values, default=0.0)


def net_nodal_flows(g: NetworkGraph, flows: NDArray[np.float64]) -> NDArray[np.float64]:
    """Σ inflow − Σ outflow per node for a (T, E) flow matrix, giving (T, N)."""
    return flows @ g.incidence_matrix.T


def mass_violations(
    g: NetworkGraph,
    flows: NDArray[np.float64],
    demand: NDArray[np.float64],
    eps: float = DEFAULT_EPSILON,
    normalize: bool = True,
) -> NDArray[np.float64]:
    """Vectorized `mass_violation` for (T, E) flows and (T, N) demands, giving (T, N)."""
    incidence = g.incidence_matrix
    arriving = (incidence > 0).astype(float)
    leaving = (incidence < 0).astype(float)
    inflow = np.clip(flows, 0.0, None) @ arriving.T + np.clip(-flows, 0.0, None) @ leaving.T
    residual = np.abs(flows @ incidence.T - demand)
    result = residual / (inflow + eps) if normalize else residual
    junctions = np.array([n.kind == "junction" for n in g.nodes])
    return np.where(junctions[None, :], result, 0.0)


def open_pipe_mask(g: NetworkGraph, observed: NDArray[np.bool_] | None = None) -> NDArray[np.bool_]:
    """Open pipes, restricted to those whose endpoint heads are both observed when `observed` is given."""
    mask = np.array([e.kind == "pipe" and e.is_open for e in g.edges], dtype=bool)
    if observed is None or not mask.size:
        return mask
    ends = g.edge_endpoints
    return mask & observed[ends[:, 0]] & observed[ends[:, 1]]


def energy_violations(
    g: NetworkGraph,
    heads: NDArray[np.float64],
    flows: NDArray[np.float64],
    roughness_scale: float = 1.0,
    normalize: bool = True,
    observed: NDArray[np.bool_] | None = None,
) -> NDArray[np.float64]:
    """Vectorized `energy_violation` for (T, N) heads and (T, E) flows, giving (T, E).

    Columns that are not open pipes are 0, and so are pipes touching a node
    outside `observed` when that (N,) mask is given.
    """
    result = np.zeros_like(flows, dtype=float)
    mask = open_pipe_mask(g, observed)
    if not mask.any():
        return result
    pipes = [e for e, is_pipe in zip(g.edges, mask) if is_pipe]
    ends = g.edge_endpoints[mask]
    head_a = heads[:, ends[:, 0]]
    head_b = heads[:, ends[:, 1]]
    scale = np.maximum(head_a, head_b)
    if normalize and np.any(scale <= 0):
        raise ValueError("Non-physical state: a pipe has both endpoint heads ≤ 0")
    resistance = hw_resistance(
        [e.length_L for e in pipes],
        [e.diameter_D for e in pipes],
        [float(e.roughness_C) * roughness_scale for e in pipes],
    )
    q = flows[:, mask]
    loss = np.sign(q) * resistance[None, :] * np.abs(q) ** HW_FLOW_EXPONENT
    residual = np.abs(head_a - head_b - loss)
    result[:, mask] = residual / scale if normalize else residual
    return result


def node_energy_violations(
    g: NetworkGraph,
    heads: NDArray[np.float64],
    flows: NDArray[np.float64],
    roughness_scale: float = 1.0,
    normalize: bool = True,
    observed: NDArray[np.bool_] | None = None,
) -> NDArray[np.float64]:
    """Per-node maximum of incident open-pipe energy violations, giving (T, N).

    With an `observed` mask only pipes between two observed heads count.
    """
    per_edge = energy_violations(g, heads, flows, roughness_scale, normalize, observed)
    result = np.zeros_like(heads, dtype=float)
    mask = open_pipe_mask(g, observed)
    for k in np.flatnonzero(mask):
        a, b = g.edge_endpoints[k]
        result[:, a] = np.maximum(result[:, a], per_edge[:, k])
        result[:, b] = np.maximum(result[:, b], per_edge[:, k])
    return result
