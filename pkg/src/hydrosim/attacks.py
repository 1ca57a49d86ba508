import logging
import math
from dataclasses import replace
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
import yaml
from jsonschema import Draft7Validator

from hydrosim.generator import record_sensors, simulate
from hydrosim.series import AttackSpec, ScadaSeries
from network.graph import NetworkGraph

logger = logging.getLogger(__name__)

LABEL_HEAD_THRESHOLD = 0.01
MAX_MASK_FRACTION = 0.5

ATTACK_SCENARIO_SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["attacks"],
    "additionalProperties": False,
    "properties": {
        "attacks": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["kind", "target", "start", "duration"],
                "additionalProperties": False,
                "properties": {
                    "id": {"type": "string"},
                    "kind": {"enum": ["sensor_offset", "sensor_replay", "pump_shutdown", "flow_manipulation"]},
                    "target": {"type": "string", "minLength": 1},
                    "start": {"type": "integer", "minimum": 0},
                    "duration": {"type": "integer", "minimum": 0},
                    "magnitude": {"type": "number"},
                },
            },
        },
    },
}


class AttackSpecError(ValueError):
    """Raised when an attack does not fit the series or network it is applied to."""


def load_attack_scenario(path: str | Path) -> list[AttackSpec]:
    """Read a YAML (or JSON) scenario file holding an `attacks` list.

    Raises:
        FileNotFoundError: If the file doesn't exist
        AttackSpecError: If the file is not valid YAML or violates the scenario format
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(
            f"Attack scenario not found: {path}. "
            "Please verify the file path is correct and the file exists."
        )
    try:
        with open(path, "r", encoding="utf-8") as f:
            payload = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise AttackSpecError(f"Invalid YAML in attack scenario {path}: {e}") from e

    errors = sorted(Draft7Validator(ATTACK_SCENARIO_SCHEMA).iter_errors(payload), key=lambda e: list(e.path))
    if errors:
        details = "; ".join(
            f"Validation error at {'.'.join(str(p) for p in e.path) or '<root>'}: {e.message}" for e in errors
        )
        raise AttackSpecError(f"Attack scenario {path} does not match the scenario format: {details}")

    specs = []
    for k, raw in enumerate(payload["attacks"]):
        spec = AttackSpec.from_dict(raw)
        specs.append(spec if spec.id else replace(spec, id=f"A{k + 1}"))
    return specs


def _check_spec(s: ScadaSeries, g: NetworkGraph, spec: AttackSpec) -> None:
    if spec.start < 0 or spec.duration < 0 or spec.end > s.n_steps:
        raise AttackSpecError(
            f"Attack window [{spec.start}, {spec.end}) does not fit a series of {s.n_steps} steps"
        )
    is_node = spec.target in g.node_index
    is_edge = spec.target in g.edge_index
    if not (is_node or is_edge):
        raise AttackSpecError(f"Attack target '{spec.target}' is neither a node nor an edge of the network")

    if spec.kind in ("sensor_offset", "sensor_replay"):
        if is_node and spec.target not in s.measured_nodes:
            raise AttackSpecError(f"Node '{spec.target}' carries no pressure sensor to attack")
        if spec.kind == "sensor_offset" and not (math.isfinite(spec.magnitude) and spec.magnitude > 0):
            raise AttackSpecError(f"sensor_offset needs magnitude > 0, got {spec.magnitude}")
        if spec.kind == "sensor_replay" and spec.start - spec.duration < 0:
            raise AttackSpecError(
                f"Replay window [{spec.start}, {spec.end}) needs {spec.duration} earlier steps "
                f"but starts at t={spec.start}"
            )
    elif spec.kind == "pump_shutdown":
        if not is_edge or g.edge(spec.target).kind != "pump":
            raise AttackSpecError(f"pump_shutdown targets a pump, but '{spec.target}' is not a pump")
    elif spec.kind == "flow_manipulation":
        if not is_node or g.node(spec.target).kind != "junction":
            raise AttackSpecError(f"flow_manipulation targets a demand junction, but '{spec.target}' is not one")
        if not (math.isfinite(spec.magnitude) and spec.magnitude > 0):
            raise AttackSpecError(f"flow_manipulation needs magnitude > 0, got {spec.magnitude}")


def _target_nodes(g: NetworkGraph, target: str) -> list[str]:
    if target in g.node_index:
        return [target]
    edge = g.edge(target)
    return [edge.from_node, edge.to_node]


def _apply_sensor_attack(s: ScadaSeries, g: NetworkGraph, spec: AttackSpec) -> None:
    """Tamper with the recorded frames of `s` in place."""
    frame = s.pressures if spec.target in g.node_index else s.flows
    column = frame.columns.get_loc(spec.target)
    window = slice(spec.start, spec.end)
    if spec.kind == "sensor_offset":
        frame.iloc[window, column] = frame.iloc[window, column].to_numpy() * (1.0 + spec.magnitude)
    else:
        frame.iloc[window, column] = frame.iloc[spec.start - spec.duration:spec.start, column].to_numpy()


def _rerecord(s: ScadaSeries, g: NetworkGraph) -> None:
    """Rebuild recordings from the ground truth and replay every logged sensor attack."""
    s.pressures, s.flows, s.tank_levels, s.pump_status = record_sensors(g, s.truth, s.seed, s.noise_std, s.masked)
    for spec in s.attack_log:
        if not spec.is_physical and spec.duration > 0:
            _apply_sensor_attack(s, g, spec)


def inject_attack(s: ScadaSeries, g: NetworkGraph, spec: AttackSpec) -> ScadaSeries:
    """Apply one attack and return a new labeled series; `s` is left untouched.

    Sensor attacks alter recorded values only. Physical attacks re-simulate the
    network from the window start to the end of the series, so tank levels
    carry the disturbance forward, and label every node whose head moves by
    more than 0.01 m inside the window.

    Raises:
        AttackSpecError: If the window does not fit, a replay reaches before
                         t=0, or the target has the wrong kind
        SimulationError: If re-simulation fails to solve
    """
    _check_spec(s, g, spec)
    if spec.duration == 0:
        return s

    out = replace(
        s,
        pressures=s.pressures.copy(),
        flows=s.flows.copy(),
        tank_levels=s.tank_levels.copy(),
        pump_status=s.pump_status.copy(),
        labels=s.labels.copy(),
        truth=s.truth.copy(),
        attack_log=[*s.attack_log, spec],
    )
    window = slice(spec.start, spec.end)
    labeled = set(_target_nodes(g, spec.target))

    if spec.is_physical:
        demands = s.truth.demands.to_numpy().copy()
        pump_status = s.truth.pump_status.to_numpy().copy()
        if spec.kind == "pump_shutdown":
            pump_status[window, s.truth.pump_status.columns.get_loc(spec.target)] = False
        else:
            demands[window, g.node_index[spec.target]] *= spec.magnitude
        tail = slice(spec.start, s.n_steps)
        rerun = simulate(
            g,
            demands[tail],
            pump_status[tail],
            s.index[tail],
            start_levels=s.truth.tank_levels.iloc[spec.start].to_numpy(),
            timestep=s.timestep,
            offset=spec.start,
        )
        for name in ("heads", "flows", "demands", "tank_levels", "pump_status"):
            frame: pd.DataFrame = getattr(out.truth, name)
            frame.iloc[tail] = getattr(rerun, name).to_numpy()
        shift = np.abs(out.truth.heads.iloc[window].to_numpy() - s.truth.heads.iloc[window].to_numpy())
        labeled.update(g.nodes[k].id for k in np.flatnonzero((shift > LABEL_HEAD_THRESHOLD).any(axis=0)))
        _rerecord(out, g)
    else:
        _apply_sensor_attack(out, g, spec)

    columns = [out.labels.columns.get_loc(n) for n in sorted(labeled)]
    out.labels.iloc[window, columns] = 1
    logger.info(
        "Injected %s on %s over steps [%d, %d); %d node(s) labeled",
        spec.kind, spec.target, spec.start, spec.end, len(labeled),
    )
    return out


def mask_sensors(s: ScadaSeries, fraction: float, seed: int) -> ScadaSeries:
    """Drop ⌊fraction · #pressure sensors⌋ uniformly chosen sensors for the whole series.

    Raises:
        ValueError: If fraction is outside [0, 0.5]
    """
    if not 0.0 <= fraction <= MAX_MASK_FRACTION:
        raise ValueError(f"Mask fraction must be within [0, {MAX_MASK_FRACTION}], got {fraction}")
    sensors = list(s.measured_nodes)
    count = math.floor(fraction * len(sensors))
    if count == 0:
        return s
    rng = np.random.default_rng(seed)
    chosen = sorted(sensors[k] for k in rng.choice(len(sensors), size=count, replace=False))
    logger.info("Masking %d of %d pressure sensors: %s", count, len(sensors), ", ".join(chosen))
    return replace(
        s,
        pressures=s.pressures.drop(columns=chosen),
        masked=tuple(sorted({*s.masked, *chosen})),
    )
