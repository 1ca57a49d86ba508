import logging
from collections.abc import Sequence

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from hydrosim.series import DEFAULT_TIMESTEP, ScadaSeries, SimulationTrace, draw_noise, make_index
from hydrosim.solver import HydraulicSolverError, solve_steady_state
from network.graph import TANK_LEVEL_RANGE, NetworkGraph

logger = logging.getLogger(__name__)

# Residential diurnal profile, hour 0 first
DEFAULT_PATTERN: tuple[float, ...] = (
    0.60, 0.50, 0.45, 0.45, 0.50, 0.65, 0.90, 1.20, 1.35, 1.30, 1.20, 1.10,
    1.05, 1.00, 1.00, 1.05, 1.15, 1.30, 1.40, 1.35, 1.20, 1.00, 0.85, 0.70,
)
MAX_NOISE_STD = 0.1


class SimulationError(RuntimeError):
    """Raised when the steady-state solve fails at one step of a simulation.

    Attributes:
        timestep (int): Index of the failing step
    """

    def __init__(self, message: str, timestep: int):
        super().__init__(message)
        self.timestep = timestep


def simulate(
    g: NetworkGraph,
    demands: NDArray[np.float64],
    pump_status: NDArray[np.bool_],
    index: pd.DatetimeIndex,
    start_levels: NDArray[np.float64] | None = None,
    timestep: int = DEFAULT_TIMESTEP,
    offset: int = 0,
) -> SimulationTrace:
    """Quasi-static extended-period run: one steady-state solve per step.

    Tank levels integrate between solves (level += net inflow · Δt / area) and
    are clamped to the allowed range.

    Args:
        g: Network to simulate
        demands: (T, N) true nodal demands
        pump_status: (T, P) running flag per pump, pumps in edge order
        index: Timestamps of the T steps
        start_levels: Tank levels at the first step, tanks in node order; initial levels if omitted
        timestep: Step length in seconds
        offset: Index of the first step within the full series, used in error messages

    Raises:
        SimulationError: If any step fails to solve
    """
    tanks = g.nodes_of_kind("tank")
    pumps = g.edges_of_kind("pump")
    n_steps = len(index)
    levels = np.zeros((n_steps, len(tanks)))
    heads = np.zeros((n_steps, len(g.nodes)))
    flows = np.zeros((n_steps, len(g.edges)))
    level = (
        np.array([t.start_level for t in tanks], dtype=float)
        if start_levels is None
        else np.array(start_levels, dtype=float)
    )
    tank_rows = [g.node_index[t.id] for t in tanks]
    areas = np.array([t.tank_area for t in tanks], dtype=float)
    lo, hi = TANK_LEVEL_RANGE
    clamped: dict[str, int] = {}

    for t in range(n_steps):
        levels[t] = level
        try:
            state = solve_steady_state(
                g,
                demands[t],
                pump_status={p.id: bool(pump_status[t, k]) for k, p in enumerate(pumps)},
                tank_levels={tank.id: float(level[k]) for k, tank in enumerate(tanks)},
            )
        except HydraulicSolverError as e:
            raise SimulationError(
                f"Hydraulic solve failed at timestep {offset + t} ({index[t]}): {e}", timestep=offset + t
            ) from e
        heads[t] = state.head
        flows[t] = state.flow
        if tanks:
            net_inflow = (g.incidence_matrix @ state.flow)[tank_rows]
            level = level + net_inflow * timestep / areas
            for k, tank in enumerate(tanks):
                if not lo <= level[k] <= hi:
                    clamped[tank.id] = clamped.get(tank.id, 0) + 1
            level = np.clip(level, lo, hi)

    for tank_id, count in clamped.items():
        logger.warning(
            "Tank %s overflowed or ran dry on %d step(s); level clamped to [%g, %g] m", tank_id, count, lo, hi
        )

    return SimulationTrace(
        heads=pd.DataFrame(heads, index=index, columns=list(g.node_ids)),
        flows=pd.DataFrame(flows, index=index, columns=list(g.edge_ids)),
        demands=pd.DataFrame(np.array(demands, dtype=float), index=index, columns=list(g.node_ids)),
        tank_levels=pd.DataFrame(levels, index=index, columns=[t.id for t in tanks]),
        pump_status=pd.DataFrame(np.array(pump_status, dtype=bool), index=index, columns=[p.id for p in pumps]),
    )


def record_sensors(
    g: NetworkGraph,
    truth: SimulationTrace,
    seed: int,
    noise_std: float,
    masked: Sequence[str] = (),
) -> tuple[pd.DataFrame, pd.DataFrame, pd.DataFrame, pd.DataFrame]:
    """Recorded pressures, flows, tank levels and pump states for a ground-truth trace.

    Relative Gaussian noise multiplies every analog reading; pump states are
    recorded exactly.
    """
    pressure_noise, flow_noise, level_noise = draw_noise(
        seed, noise_std, len(truth.heads.index), len(g.nodes), len(g.edges), truth.tank_levels.shape[1]
    )
    elevation = np.array([n.elevation_z for n in g.nodes])
    pressure = (truth.heads.to_numpy() - elevation[None, :]) * (1.0 + pressure_noise)
    sensors = [k for k, n in enumerate(g.nodes) if n.measured and n.id not in masked]
    pressures = pd.DataFrame(
        pressure[:, sensors], index=truth.heads.index, columns=[g.nodes[k].id for k in sensors]
    )
    flows = pd.DataFrame(
        truth.flows.to_numpy() * (1.0 + flow_noise), index=truth.flows.index, columns=truth.flows.columns
    )
    tank_levels = pd.DataFrame(
        truth.tank_levels.to_numpy() * (1.0 + level_noise),
        index=truth.tank_levels.index,
        columns=truth.tank_levels.columns,
    )
    return pressures, flows, tank_levels, truth.pump_status.copy()


def demand_matrix(
    g: NetworkGraph, pattern: Sequence[float], n_steps: int, timestep: int = DEFAULT_TIMESTEP
) -> NDArray[np.float64]:
    """(T, N) nominal demands: base demand times the multiplier of the hour of day."""
    hours = (np.arange(n_steps) * timestep // 3600) % 24
    multiplier = np.asarray(pattern, dtype=float)[hours]
    base = np.array([n.base_demand for n in g.nodes])
    return multiplier[:, None] * base[None, :]


def generate_series(
    g: NetworkGraph,
    pattern: Sequence[float] = DEFAULT_PATTERN,
    days: int = 7,
    noise_std: float = 0.0,
    seed: int = 0,
    timestep: int = DEFAULT_TIMESTEP,
) -> ScadaSeries:
    """Generate a clean, labeled SCADA series from hourly steady-state solves.

    Args:
        g: Network to simulate
        pattern: 24 positive hourly demand multipliers
        days: Number of simulated days
        noise_std: Relative sensor noise standard deviation in [0, 0.1]
        seed: Seed for the noise draws
        timestep: Step length in seconds

    Returns:
        ScadaSeries with all-zero labels and an empty attack log

    Raises:
        ValueError: If the pattern, days or noise level are out of range
        SimulationError: If a step fails to solve
    """
    if len(pattern) != 24 or any(not m > 0 for m in pattern):
        raise ValueError(f"Demand pattern must have 24 positive multipliers, got {list(pattern)}")
    if not 0.0 <= noise_std <= MAX_NOISE_STD:
        raise ValueError(f"noise_std must be within [0, {MAX_NOISE_STD}], got {noise_std}")
    if days < 1:
        raise ValueError(f"days must be at least 1, got {days}")

    n_steps = days * 86400 // timestep
    index = make_index(n_steps, timestep)
    demands = demand_matrix(g, pattern, n_steps, timestep)
    pumps = g.edges_of_kind("pump")
    pump_status = np.tile(np.array([p.is_open for p in pumps], dtype=bool), (n_steps, 1))

    truth = simulate(g, demands, pump_status, index, timestep=timestep)
    pressures, flows, tank_levels, pump_frame = record_sensors(g, truth, seed, noise_std)
    junctions = [n.id for n in g.nodes if n.kind == "junction"]
    logger.info("Simulated %d steps on %d nodes (noise %.3g, seed %d)", n_steps, len(g.nodes), noise_std, seed)
    return ScadaSeries(
        pressures=pressures,
        flows=flows,
        tank_levels=tank_levels,
        pump_status=pump_frame,
        labels=pd.DataFrame(0, index=index, columns=list(g.node_ids), dtype=np.int64),
        demand_estimate=truth.demands[junctions].copy(),
        truth=truth,
        seed=seed,
        noise_std=noise_std,
        timestep=timestep,
    )
