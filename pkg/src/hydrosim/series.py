import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Literal

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from utils.dtos import Provenance
from utils.io import read_json, write_csv, write_json

logger = logging.getLogger(__name__)

AttackKind = Literal["sensor_offset", "sensor_replay", "pump_shutdown", "flow_manipulation"]
SENSOR_ATTACKS: tuple[str, ...] = ("sensor_offset", "sensor_replay")
PHYSICAL_ATTACKS: tuple[str, ...] = ("pump_shutdown", "flow_manipulation")

DEFAULT_TIMESTEP = 3600
SERIES_START = pd.Timestamp("2024-01-01T00:00:00")
SERIES_FORMAT = "scada-series/1"
TIMESTAMP_FORMAT = "%Y-%m-%dT%H:%M:%S"

RECORDED_FILES = ("pressures", "flows", "tank_levels", "pump_status", "labels", "demand_estimate")
TRUTH_FILES = ("heads", "flows", "demands", "tank_levels", "pump_status")


@dataclass(frozen=True)
class AttackSpec:
    """One attack applied to a series.

    Attributes:
        kind (str): sensor_offset, sensor_replay, pump_shutdown or flow_manipulation
        target (str): Node id (pressure sensor or demand junction) or edge id (flow sensor or pump)
        start (int): First attacked time index
        duration (int): Number of attacked steps
        magnitude (float): Offset fraction for sensor_offset, demand multiplier for flow_manipulation
        id (str): Scenario-unique name, used to select an attack for explanation
    """
    kind: AttackKind
    target: str
    start: int
    duration: int
    magnitude: float = 0.0
    id: str = ""

    @property
    def end(self) -> int:
        return self.start + self.duration

    @property
    def is_physical(self) -> bool:
        return self.kind in PHYSICAL_ATTACKS

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "kind": self.kind,
            "target": self.target,
            "start": self.start,
            "duration": self.duration,
            "magnitude": self.magnitude,
        }

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "AttackSpec":
        return cls(
            kind=raw["kind"],
            target=raw["target"],
            start=int(raw["start"]),
            duration=int(raw["duration"]),
            magnitude=float(raw.get("magnitude", 0.0)),
            id=str(raw.get("id", "")),
        )


@dataclass
class SimulationTrace:
    """Ground-truth hydraulic state per step; conservative by construction.

    Attributes:
        heads (pd.DataFrame): time × nodes, total head in meters
        flows (pd.DataFrame): time × edges, signed flow in m³/s
        demands (pd.DataFrame): time × nodes, true demand in m³/s
        tank_levels (pd.DataFrame): time × tanks, level at the start of each step in meters
        pump_status (pd.DataFrame): time × pumps, True when running
    """
    heads: pd.DataFrame
    flows: pd.DataFrame
    demands: pd.DataFrame
    tank_levels: pd.DataFrame
    pump_status: pd.DataFrame

    def copy(self) -> "SimulationTrace":
        return SimulationTrace(
            heads=self.heads.copy(),
            flows=self.flows.copy(),
            demands=self.demands.copy(),
            tank_levels=self.tank_levels.copy(),
            pump_status=self.pump_status.copy(),
        )


@dataclass
class ScadaSeries:
    """Recorded SCADA telemetry, labels and the ground truth behind them.

    Recorded frames share one hourly DatetimeIndex. `pressures` holds a column
    per measured node only; masking a sensor removes its column. Relative
    sensor noise is redrawn from `seed` on demand, so re-recording after an
    attack reproduces the original noise exactly.

    Attributes:
        pressures (pd.DataFrame): time × measured nodes, meters
        flows (pd.DataFrame): time × edges, m³/s
        tank_levels (pd.DataFrame): time × tanks, meters
        pump_status (pd.DataFrame): time × pumps, boolean
        labels (pd.DataFrame): time × nodes, binary y_{i,t}
        demand_estimate (pd.DataFrame): time × junctions, operator's nominal demand in m³/s
        truth (SimulationTrace): Ground-truth hydraulic state
        attack_log (list[AttackSpec]): Attacks applied, in order
        masked (tuple[str, ...]): Pressure sensors masked out for the whole series
        seed (int): Seed of the noise draws
        noise_std (float): Relative noise standard deviation
        timestep (int): Step length in seconds
    """
    pressures: pd.DataFrame
    flows: pd.DataFrame
    tank_levels: pd.DataFrame
    pump_status: pd.DataFrame
    labels: pd.DataFrame
    demand_estimate: pd.DataFrame
    truth: SimulationTrace
    attack_log: list[AttackSpec] = field(default_factory=list)
    masked: tuple[str, ...] = ()
    seed: int = 0
    noise_std: float = 0.0
    timestep: int = DEFAULT_TIMESTEP

    @property
    def index(self) -> pd.DatetimeIndex:
        return pd.DatetimeIndex(self.labels.index)

    @property
    def n_steps(self) -> int:
        return len(self.labels.index)

    @property
    def measured_nodes(self) -> tuple[str, ...]:
        return tuple(str(c) for c in self.pressures.columns)

    @property
    def network_labels(self) -> NDArray[np.int64]:
        """1 at every step where any node is under attack."""
        return self.labels.to_numpy().max(axis=1).astype(np.int64)

    @property
    def attack_onsets(self) -> list[int]:
        return [a.start for a in self.attack_log if a.duration > 0]

    def noise(self) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
        """Relative noise draws for node pressures, edge flows and tank levels."""
        return draw_noise(
            self.seed,
            self.noise_std,
            self.n_steps,
            self.truth.heads.shape[1],
            self.truth.flows.shape[1],
            self.truth.tank_levels.shape[1],
        )


def draw_noise(
    seed: int, noise_std: float, n_steps: int, n_nodes: int, n_edges: int, n_tanks: int
) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
    rng = np.random.default_rng(seed)
    pressure = rng.normal(0.0, 1.0, size=(n_steps, n_nodes)) * noise_std
    flow = rng.normal(0.0, 1.0, size=(n_steps, n_edges)) * noise_std
    level = rng.normal(0.0, 1.0, size=(n_steps, n_tanks)) * noise_std
    return pressure, flow, level


def make_index(n_steps: int, timestep: int = DEFAULT_TIMESTEP) -> pd.DatetimeIndex:
    return pd.date_range(SERIES_START, periods=n_steps, freq=pd.Timedelta(seconds=timestep), name="timestamp")


def _write_frame(path: Path, frame: pd.DataFrame) -> None:
    out = frame.astype({c: int for c in frame.columns if pd.api.types.is_bool_dtype(frame[c])})
    out.index = pd.DatetimeIndex(out.index).strftime(TIMESTAMP_FORMAT)
    out.index.name = "timestamp"
    write_csv(path, out)


def _read_frame(path: Path) -> pd.DataFrame:
    if not path.exists():
        raise FileNotFoundError(
            f"Series file not found: {path}. "
            "Please verify the directory was written by `simulate` or `attack`."
        )
    frame = pd.read_csv(path, index_col=0, float_precision="round_trip")
    frame.index = pd.DatetimeIndex(pd.to_datetime(frame.index), name="timestamp")
    frame.columns = [str(c) for c in frame.columns]
    return frame


def save_series(
    s: ScadaSeries,
    directory: str | Path,
    network_payload: dict[str, Any] | None = None,
    provenance: Provenance | None = None,
) -> None:
    """Persist a series as one CSV per signal group plus JSON sidecars.

    Layout: pressures.csv, flows.csv, tank_levels.csv, pump_status.csv,
    labels.csv, demand_estimate.csv, truth/*.csv, attack_log.json, series.json
    and, when given, network.json.
    """
    directory = Path(directory)
    for name in RECORDED_FILES:
        _write_frame(directory / f"{name}.csv", getattr(s, name))
    for name in TRUTH_FILES:
        _write_frame(directory / "truth" / f"{name}.csv", getattr(s.truth, name))
    write_json(directory / "attack_log.json", [a.to_dict() for a in s.attack_log])
    meta: dict[str, Any] = {
        "format": SERIES_FORMAT,
        "timestep": s.timestep,
        "seed": s.seed,
        "noise_std": s.noise_std,
        "masked": list(s.masked),
        "n_steps": s.n_steps,
    }
    if provenance is not None:
        meta["provenance"] = provenance.to_dict()
    write_json(directory / "series.json", meta)
    if network_payload is not None:
        write_json(directory / "network.json", network_payload)
    logger.info("Wrote series with %d steps to %s", s.n_steps, directory)


def load_series(directory: str | Path) -> ScadaSeries:
    """Load a series written by `save_series`.

    Raises:
        FileNotFoundError: If the directory or any expected file is missing
        ValueError: If series.json carries an unknown format tag
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(
            f"Series directory not found: {directory}. "
            "Please verify the path is correct and the directory exists."
        )
    meta = read_json(directory / "series.json")
    if meta.get("format") != SERIES_FORMAT:
        raise ValueError(f"Unsupported series format '{meta.get('format')}' in {directory / 'series.json'}")
    frames = {name: _read_frame(directory / f"{name}.csv") for name in RECORDED_FILES}
    truth = {name: _read_frame(directory / "truth" / f"{name}.csv") for name in TRUTH_FILES}
    frames["pump_status"] = frames["pump_status"].astype(bool)
    frames["labels"] = frames["labels"].astype(np.int64)
    truth["pump_status"] = truth["pump_status"].astype(bool)
    attack_log = [AttackSpec.from_dict(raw) for raw in read_json(directory / "attack_log.json")]
    return ScadaSeries(
        **frames,
        truth=SimulationTrace(**truth),
        attack_log=attack_log,
        masked=tuple(meta.get("masked", [])),
        seed=int(meta["seed"]),
        noise_std=float(meta["noise_std"]),
        timestep=int(meta["timestep"]),
    )
