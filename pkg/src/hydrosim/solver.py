import logging
from collections.abc import Mapping
from dataclasses import dataclass

import networkx as nx
import numpy as np
import scipy.sparse as sp
from numpy.typing import NDArray
from scipy.sparse.linalg import spsolve

from network.graph import NetworkGraph
from physics_features.violations import HW_FLOW_EXPONENT, hw_resistance

logger = logging.getLogger(__name__)

MASS_TOLERANCE = 1e-6
ENERGY_TOLERANCE = 1e-7
MAX_ITERATIONS = 200
FLOW_FLOOR = 1e-6


class HydraulicSolverError(RuntimeError):
    """Raised when the steady-state solve cannot produce a conservative state.

    Attributes:
        residual (float | None): Final max junction mass residual on non-convergence
        isolated_nodes (tuple[str, ...]): Junctions cut off from every fixed-head node
    """

    def __init__(self, message: str, residual: float | None = None, isolated_nodes: tuple[str, ...] = ()):
        super().__init__(message)
        self.residual = residual
        self.isolated_nodes = isolated_nodes


@dataclass
class HydraulicState:
    """Steady-state solution aligned with the graph's node and edge order.

    Attributes:
        head (NDArray): Total head p + z per node, meters
        flow (NDArray): Signed flow per edge, m³/s (positive from -> to)
        demand (NDArray): Demand per node, m³/s (0 for tanks and reservoirs)
    """
    head: NDArray[np.float64]
    flow: NDArray[np.float64]
    demand: NDArray[np.float64]

    def pressure(self, g: NetworkGraph) -> NDArray[np.float64]:
        return self.head - np.array([n.elevation_z for n in g.nodes])

    def mass_residual(self, g: NetworkGraph) -> NDArray[np.float64]:
        """|Σ inflow − Σ outflow − demand| at every junction (0 elsewhere)."""
        residual = np.abs(g.incidence_matrix @ self.flow - self.demand)
        junctions = np.array([n.kind == "junction" for n in g.nodes])
        return np.where(junctions, residual, 0.0)


def _as_node_vector(g: NetworkGraph, values: Mapping[str, float] | NDArray[np.float64] | None) -> NDArray[np.float64]:
    if values is None:
        return np.zeros(len(g.nodes))
    if isinstance(values, Mapping):
        vector = np.zeros(len(g.nodes))
        for node_id, value in values.items():
            vector[g.node_index[node_id]] = value
        return vector
    vector = np.array(values, dtype=float)
    if vector.shape != (len(g.nodes),):
        raise ValueError(f"Expected {len(g.nodes)} nodal values, got shape {vector.shape}")
    return vector


def _isolated_junctions(g: NetworkGraph, active: NDArray[np.bool_]) -> tuple[str, ...]:
    topology = nx.Graph()
    topology.add_nodes_from(g.node_ids)
    topology.add_edges_from((e.from_node, e.to_node) for e, on in zip(g.edges, active) if on)
    isolated: list[str] = []
    for component in nx.connected_components(topology):
        if not any(g.node(n).is_fixed_head for n in component):
            isolated.extend(component)
    return tuple(sorted(isolated))


def solve_steady_state(
    g: NetworkGraph,
    demand: Mapping[str, float] | NDArray[np.float64] | None,
    pump_status: Mapping[str, bool] | None = None,
    tank_levels: Mapping[str, float] | None = None,
    max_iterations: int = MAX_ITERATIONS,
    tolerance: float = MASS_TOLERANCE,
) -> HydraulicState:
    """Demand-driven steady state by Newton-Raphson on link flows and junction heads.

    Each iteration linearizes the Hazen-Williams pipe law and the quadratic pump
    curve h_gain = h0 − r·Q², eliminates the flow corrections and solves the
    sparse head system. Reservoirs hold their fixed head; tanks hold
    elevation + current level.

    Args:
        g: Network to solve
        demand: Demand per node (mapping by id or array in node order), m³/s
        pump_status: Open/closed flag per pump id; missing pumps follow their edge status
        tank_levels: Current level per tank id; missing tanks use their initial level
        max_iterations: Newton iteration cap
        tolerance: Max junction mass residual accepted, m³/s

    Returns:
        HydraulicState: heads, flows and the demand vector used

    Raises:
        HydraulicSolverError: If no fixed-head node exists, a subnetwork is isolated,
                              or the iteration does not converge
    """
    demand_vec = _as_node_vector(g, demand)
    fixed_head_nodes = [n for n in g.nodes if n.is_fixed_head]
    if not fixed_head_nodes:
        raise HydraulicSolverError("Network has no reservoir or tank to fix the head")
    if np.any(demand_vec < 0):
        raise ValueError("Demands must be non-negative")
    for n in fixed_head_nodes:
        demand_vec[g.node_index[n.id]] = 0.0

    pump_status = pump_status or {}
    tank_levels = tank_levels or {}
    active = np.array(
        [e.is_open and (e.kind == "pipe" or pump_status.get(e.id, True)) for e in g.edges], dtype=bool
    )
    isolated = _isolated_junctions(g, active)
    if isolated:
        raise HydraulicSolverError(
            f"Singular system: nodes {', '.join(isolated)} are isolated from every fixed-head node",
            isolated_nodes=isolated,
        )

    head = np.zeros(len(g.nodes))
    fixed = np.zeros(len(g.nodes), dtype=bool)
    for n in fixed_head_nodes:
        k = g.node_index[n.id]
        fixed[k] = True
        head[k] = n.fixed_head if n.kind == "reservoir" else n.elevation_z + tank_levels.get(n.id, n.start_level)
    free = np.flatnonzero(~fixed)
    mean_fixed = float(head[fixed].mean())
    head[free] = mean_fixed

    links = np.flatnonzero(active)
    flow = np.zeros(len(g.edges))
    if free.size == 0 or links.size == 0:
        return HydraulicState(head=head, flow=flow, demand=demand_vec)

    edges = [g.edges[k] for k in links]
    is_pump = np.array([e.kind == "pump" for e in edges])
    resistance = np.zeros(len(edges))
    pipe_idx = np.flatnonzero(~is_pump)
    if pipe_idx.size:
        resistance[pipe_idx] = hw_resistance(
            [edges[k].length_L for k in pipe_idx],
            [edges[k].diameter_D for k in pipe_idx],
            [edges[k].roughness_C for k in pipe_idx],
        )
    shutoff = np.array([e.pump_shutoff_head_h0 or 0.0 for e in edges])
    curve = np.array([e.pump_curve_coeff_r or 0.0 for e in edges])

    # Link-node incidence split into unknown (junction) and known (fixed-head) columns;
    # row l carries +1 at the start node and -1 at the end node, so A @ H = H_from − H_to.
    ends = g.edge_endpoints[links]
    rows = np.repeat(np.arange(len(edges)), 2)
    cols = ends.reshape(-1)
    vals = np.tile([1.0, -1.0], len(edges))
    incidence = sp.csr_matrix((vals, (rows, cols)), shape=(len(edges), len(g.nodes)))
    a_free = incidence[:, free]
    a_fixed = incidence[:, np.flatnonzero(fixed)]
    fixed_drop = a_fixed @ head[fixed]
    demand_free = demand_vec[free]

    q = np.where(is_pump, np.sqrt(np.divide(shutoff, 2.0 * curve, out=np.zeros_like(shutoff), where=curve > 0)),
                 0.5 * np.pi * np.array([(e.diameter_D or 0.0) ** 2 for e in edges]) / 4.0)
    h = head[free].copy()

    mass_res = np.inf
    for iteration in range(1, max_iterations + 1):
        magnitude = np.abs(q)
        loss = np.where(
            is_pump,
            curve * q * magnitude - shutoff,
            resistance * np.sign(q) * magnitude ** HW_FLOW_EXPONENT,
        )
        floored = np.maximum(magnitude, FLOW_FLOOR)
        slope = np.where(
            is_pump,
            2.0 * curve * floored,
            HW_FLOW_EXPONENT * resistance * floored ** (HW_FLOW_EXPONENT - 1.0),
        )
        energy_res = loss - (a_free @ h + fixed_drop)
        mass_vec = a_free.T @ q + demand_free
        mass_res = float(np.max(np.abs(mass_vec)))
        energy_max = float(np.max(np.abs(energy_res)))
        logger.debug("newton iteration %d: mass %.3e, energy %.3e", iteration, mass_res, energy_max)
        if mass_res < tolerance and energy_max < ENERGY_TOLERANCE and iteration > 1:
            break

        inv_slope = 1.0 / slope
        system = (a_free.T @ sp.diags(inv_slope) @ a_free).tocsc()
        rhs = a_free.T @ (inv_slope * energy_res) - mass_vec
        dh = np.atleast_1d(spsolve(system, rhs))
        if not np.all(np.isfinite(dh)):
            raise HydraulicSolverError("Singular Jacobian while solving for junction heads", residual=mass_res)
        dq = inv_slope * (a_free @ dh - energy_res)
        h += dh
        q += dq
    else:
        raise HydraulicSolverError(
            f"Newton-Raphson did not converge after {max_iterations} iterations "
            f"(max junction mass residual {mass_res:.3e} m³/s)",
            residual=mass_res,
        )

    head[free] = h
    flow[links] = q
    return HydraulicState(head=head, flow=flow, demand=demand_vec)
