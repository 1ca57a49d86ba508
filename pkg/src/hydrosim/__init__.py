from hydrosim.solver import HydraulicSolverError, HydraulicState, solve_steady_state
from hydrosim.series import AttackSpec, ScadaSeries, SimulationTrace, load_series, save_series
from hydrosim.generator import DEFAULT_PATTERN, SimulationError, generate_series, record_sensors, simulate
from hydrosim.attacks import AttackSpecError, inject_attack, load_attack_scenario, mask_sensors

__all__ = [
    "AttackSpec",
    "AttackSpecError",
    "DEFAULT_PATTERN",
    "HydraulicSolverError",
    "HydraulicState",
    "ScadaSeries",
    "SimulationError",
    "SimulationTrace",
    "generate_series",
    "inject_attack",
    "load_attack_scenario",
    "load_series",
    "mask_sensors",
    "record_sensors",
    "save_series",
    "simulate",
    "solve_steady_state",
]
