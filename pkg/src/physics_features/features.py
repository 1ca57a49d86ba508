"""Per-node feature assembly.

Every node gets the same eight-entry vector per step, in FEATURE_LAYOUT order:
raw signals (pressure, net nodal flow, tank level), temporal statistics of
pressure over the trailing window (mean, population std, lag-1 difference)
and the two conservation-law violations. Nodes without a pressure sensor are
filled by distance-weighted interpolation of their measured neighbors. Energy
violations use only pipes whose two endpoint heads are observed.
"""
import logging
from collections.abc import Iterable
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
from numpy.typing import NDArray
from scipy.special import softmax

from hydrosim.series import AttackSpec, ScadaSeries
from network.distance import distance_matrix
from network.graph import NetworkGraph
from physics_features.violations import DEFAULT_EPSILON, energy_violations, mass_violations, node_energy_violations
from utils.dtos import Provenance
from utils.io import read_json, write_csv, write_json

logger = logging.getLogger(__name__)

FEATURE_LAYOUT: tuple[str, ...] = (
    "pressure",
    "net_flow",
    "tank_level",
    "pressure_mean",
    "pressure_std",
    "pressure_diff",
    "phi_mass",
    "phi_energy",
)
FEATURE_GROUPS: dict[str, tuple[int, ...]] = {
    "raw": (0, 1, 2),
    "temporal": (3, 4, 5),
    "phi_mass": (6,),
    "phi_energy": (7,),
}
PHI_MASS = FEATURE_LAYOUT.index("phi_mass")
PHI_ENERGY = FEATURE_LAYOUT.index("phi_energy")
DEFAULT_WINDOW = 24
DEFAULT_SIGMA = 2.0
FEATURES_FORMAT = "physics-features/1"


class InterpolationError(ValueError):
    """Raised when an unmeasured node has no reachable measured node."""


@dataclass(frozen=True)
class FeatureToggles:
    """Ablation switches; a disabled block is zeroed but keeps its column.

    Attributes:
        phi_mass (bool): Keep the mass-balance violation column
        phi_energy (bool): Keep the energy-gradient violation column
        normalization (bool): Divide residuals by their denominators; raw residuals when off
        interpolation (bool): Interpolate unmeasured nodes; zero-fill them when off
    """
    phi_mass: bool = True
    phi_energy: bool = True
    normalization: bool = True
    interpolation: bool = True

    @classmethod
    def from_ablation(cls, flags: Iterable[str]) -> "FeatureToggles":
        """Build toggles from ablation flag names ("phi" disables both violation columns)."""
        off = set()
        for flag in flags:
            name = flag.strip().removeprefix("no_").removeprefix("no-")
            if not name:
                continue
            if name == "phi":
                off.update({"phi_mass", "phi_energy"})
            elif name in cls.__dataclass_fields__:
                off.add(name)
            else:
                raise ValueError(
                    f"Unknown ablation flag '{flag}'. Use phi_mass, phi_energy, phi, normalization or interpolation."
                )
        return cls(**{name: name not in off for name in cls.__dataclass_fields__})

    def to_dict(self) -> dict[str, bool]:
        return {
            "phi_mass": self.phi_mass,
            "phi_energy": self.phi_energy,
            "normalization": self.normalization,
            "interpolation": self.interpolation,
        }


@dataclass
class FeatureTensor:
    """Feature values h_t(v_i) for every step and node, with their settings.

    Attributes:
        values (NDArray): (T, N, F) feature array, F in FEATURE_LAYOUT order
        node_ids (tuple[str, ...]): Node order of the second axis
        times (pd.DatetimeIndex): Timestamps of the first axis
        measured_mask (NDArray): (N,) True where a pressure sensor is available
        labels (NDArray): (T, N) binary attack labels
        window (int): Trailing window w of the temporal statistics
        eps (float): Mass-balance denominator guard in m³/s
        sigma (float): Interpolation smoothing constant
        toggles (FeatureToggles): Ablation switches used
        roughness_delta (float): Relative perturbation applied to every C_ij
        demand_error (float): Relative error applied to the demand estimate
        attack_log (list[AttackSpec]): Attacks present in the source series
        raw_residual (NDArray | None): (T,) largest unnormalized mass or energy residual
            per step; does not depend on the ablation toggles
    """
    values: NDArray[np.float64]
    node_ids: tuple[str, ...]
    times: pd.DatetimeIndex
    measured_mask: NDArray[np.bool_]
    labels: NDArray[np.int64]
    window: int = DEFAULT_WINDOW
    eps: float = DEFAULT_EPSILON
    sigma: float = DEFAULT_SIGMA
    toggles: FeatureToggles = field(default_factory=FeatureToggles)
    roughness_delta: float = 0.0
    demand_error: float = 0.0
    attack_log: list[AttackSpec] = field(default_factory=list)
    raw_residual: NDArray[np.float64] | None = None

    @property
    def n_steps(self) -> int:
        return int(self.values.shape[0])

    @property
    def network_labels(self) -> NDArray[np.int64]:
        return self.labels.max(axis=1).astype(np.int64)

    def column(self, name: str) -> NDArray[np.float64]:
        """(T, N) slice of one named feature."""
        return self.values[:, :, FEATURE_LAYOUT.index(name)]

    def metadata(self) -> dict[str, Any]:
        return {
            "format": FEATURES_FORMAT,
            "layout": list(FEATURE_LAYOUT),
            "nodes": list(self.node_ids),
            "measured": [bool(m) for m in self.measured_mask],
            "window": self.window,
            "eps": self.eps,
            "sigma": self.sigma,
            "toggles": self.toggles.to_dict(),
            "roughness_delta": self.roughness_delta,
            "demand_error": self.demand_error,
            "attack_log": [a.to_dict() for a in self.attack_log],
            "raw_residual": None if self.raw_residual is None else [float(v) for v in self.raw_residual],
        }

    def to_frame(self) -> pd.DataFrame:
        """Long form: one row per (time, node) with the eight features and the label."""
        n_steps, n_nodes, n_features = self.values.shape
        frame = pd.DataFrame(self.values.reshape(n_steps * n_nodes, n_features), columns=list(FEATURE_LAYOUT))
        frame.insert(0, "node", np.tile(np.array(self.node_ids, dtype=object), n_steps))
        frame.insert(0, "time", np.repeat(self.times.strftime("%Y-%m-%dT%H:%M:%S").to_numpy(), n_nodes))
        frame["label"] = self.labels.reshape(-1)
        return frame


def interpolation_weights(
    g: NetworkGraph,
    j: str,
    measured: Iterable[str],
    sigma: float = DEFAULT_SIGMA,
    distances: pd.DataFrame | None = None,
) -> pd.Series:
    """Softmax weights w_ij = exp(−d_ij/σ) / Σ_k exp(−d_jk/σ) over the measured neighbors of `j`.

    A node with no measured neighbor takes the nearest reachable measured
    node(s) instead, sharing equally on ties.

    Raises:
        InterpolationError: If no measured node is reachable from `j`
    """
    if distances is None:
        distances = distance_matrix(g)
    candidates = [i for i in measured if i != j]
    d = distances.loc[j, candidates].astype(float)
    d = d[np.isfinite(d.to_numpy())]
    if d.empty:
        raise InterpolationError(f"No measured node is reachable from unmeasured node '{j}'")
    support = d[d.index.isin(g.neighbors(j))]
    if support.empty:
        support = d[d == d.min()]
    return pd.Series(softmax(-support.to_numpy() / sigma), index=support.index, name=j)


def _weight_matrix(
    g: NetworkGraph, measured_mask: NDArray[np.bool_], sigma: float
) -> tuple[NDArray[np.int64], NDArray[np.int64], NDArray[np.float64]]:
    """(unmeasured rows, measured rows, weights[u, m]) in node order."""
    unmeasured = np.flatnonzero(~measured_mask)
    measured = np.flatnonzero(measured_mask)
    weights = np.zeros((unmeasured.size, measured.size))
    if unmeasured.size == 0:
        return unmeasured, measured, weights
    distances = distance_matrix(g)
    measured_ids = [g.nodes[k].id for k in measured]
    for row, k in enumerate(unmeasured):
        w = interpolation_weights(g, g.nodes[k].id, measured_ids, sigma, distances)
        weights[row] = w.reindex(measured_ids, fill_value=0.0).to_numpy()
    return unmeasured, measured, weights


def interpolate_unmeasured(tensor: FeatureTensor, g: NetworkGraph, j: str) -> NDArray[np.float64]:
    """(T, F) interpolated feature vectors of unmeasured node `j` from the measured nodes.

    Raises:
        ValueError: If `j` carries a sensor
        InterpolationError: If no measured node is reachable
    """
    k = tensor.node_ids.index(j)
    if tensor.measured_mask[k]:
        raise ValueError(f"Node '{j}' is measured; only unmeasured nodes are interpolated")
    measured_ids = [n for n, m in zip(tensor.node_ids, tensor.measured_mask) if m]
    weights = interpolation_weights(g, j, measured_ids, tensor.sigma)
    rows = [tensor.node_ids.index(i) for i in weights.index]
    return np.einsum("m,tmf->tf", weights.to_numpy(), tensor.values[:, rows, :])


def _temporal_stats(pressure: pd.DataFrame, window: int) -> tuple[pd.DataFrame, pd.DataFrame, pd.DataFrame]:
    rolling = pressure.rolling(window, min_periods=1)
    return rolling.mean(), rolling.std(ddof=0).fillna(0.0), pressure.diff().fillna(0.0)


def assemble_features(
    series: ScadaSeries,
    g: NetworkGraph,
    window: int = DEFAULT_WINDOW,
    toggles: FeatureToggles | None = None,
    roughness_delta: float = 0.0,
    demand_error: float = 0.0,
    eps: float = DEFAULT_EPSILON,
    sigma: float = DEFAULT_SIGMA,
) -> FeatureTensor:
    """Build the (T, N, 8) feature tensor of a recorded series.

    Args:
        series: Recorded telemetry
        g: Network the series was recorded on
        window: Trailing window w of the temporal statistics; the first w−1
                steps use the available prefix
        toggles: Ablation switches (all features on when omitted)
        roughness_delta: Every C_ij is multiplied by (1 + roughness_delta)
        demand_error: The demand estimate is multiplied by (1 + demand_error)
        eps: Mass-balance denominator guard
        sigma: Interpolation smoothing constant

    Raises:
        ValueError: If the series is shorter than the window
        InterpolationError: If an unmeasured node cannot be interpolated
    """
    toggles = toggles or FeatureToggles()
    if series.n_steps < window:
        raise ValueError(f"Series has {series.n_steps} steps, fewer than the window w={window}")
    if not 1.0 + roughness_delta > 0:
        raise ValueError(f"Roughness perturbation {roughness_delta} makes C non-positive")

    node_ids = list(g.node_ids)
    sensors = set(series.measured_nodes)
    measured_mask = np.array([n in sensors for n in node_ids], dtype=bool)
    unmeasured, measured, weights = _weight_matrix(g, measured_mask, sigma)
    elevation = np.array([n.elevation_z for n in g.nodes])

    pressure = np.zeros((series.n_steps, len(node_ids)))
    pressure[:, measured] = series.pressures[[node_ids[k] for k in measured]].to_numpy()
    heads = pressure + elevation[None, :]
    # energy residuals only run between observed heads; reservoir heads are known without a sensor
    observed = measured_mask.copy()
    for n in g.nodes_of_kind("reservoir"):
        k = g.node_index[n.id]
        if not observed[k]:
            observed[k] = True
            heads[:, k] = float(n.fixed_head or 0.0)
    if unmeasured.size:
        pressure[:, unmeasured] = pressure[:, measured] @ weights.T

    flows = series.flows[list(g.edge_ids)].to_numpy()
    demand = np.zeros_like(pressure)
    for column in series.demand_estimate.columns:
        demand[:, g.node_index[column]] = series.demand_estimate[column].to_numpy() * (1.0 + demand_error)
    tank_level = np.zeros_like(pressure)
    for column in series.tank_levels.columns:
        tank_level[:, g.node_index[column]] = series.tank_levels[column].to_numpy()

    frame = pd.DataFrame(pressure, index=series.index, columns=node_ids)
    mean, std, diff = _temporal_stats(frame, window)

    values = np.zeros((series.n_steps, len(node_ids), len(FEATURE_LAYOUT)))
    values[:, :, 0] = pressure
    values[:, :, 1] = flows @ g.incidence_matrix.T
    values[:, :, 2] = tank_level
    values[:, :, 3] = mean.to_numpy()
    values[:, :, 4] = std.to_numpy()
    values[:, :, 5] = diff.to_numpy()
    if toggles.phi_mass:
        values[:, :, PHI_MASS] = mass_violations(g, flows, demand, eps, toggles.normalization)
    if toggles.phi_energy:
        values[:, :, PHI_ENERGY] = node_energy_violations(
            g, heads, flows, 1.0 + roughness_delta, toggles.normalization, observed
        )
    raw_residual = np.maximum(
        mass_violations(g, flows, demand, eps, normalize=False).max(axis=1),
        energy_violations(g, heads, flows, 1.0 + roughness_delta, normalize=False, observed=observed).max(axis=1),
    )

    if unmeasured.size:
        if toggles.interpolation:
            values[:, unmeasured, :] = np.einsum("um,tmf->tuf", weights, values[:, measured, :])
        else:
            values[:, unmeasured, :] = 0.0

    logger.debug(
        "Assembled features: %d steps, %d nodes (%d interpolated), w=%d, toggles=%s",
        series.n_steps, len(node_ids), unmeasured.size, window, toggles.to_dict(),
    )
    return FeatureTensor(
        values=values,
        node_ids=tuple(node_ids),
        times=series.index,
        measured_mask=measured_mask,
        labels=series.labels[node_ids].to_numpy().astype(np.int64),
        window=window,
        eps=eps,
        sigma=sigma,
        toggles=toggles,
        roughness_delta=roughness_delta,
        demand_error=demand_error,
        attack_log=list(series.attack_log),
        raw_residual=raw_residual,
    )


@dataclass(frozen=True)
class FeatureSettings:
    """How a model's input features are assembled; stored with every checkpoint.

    Attributes:
        window (int): Trailing window w of the temporal statistics
        eps (float): Mass-balance denominator guard in m³/s
        sigma (float): Interpolation smoothing constant
        toggles (FeatureToggles): Ablation switches
    """
    window: int = DEFAULT_WINDOW
    eps: float = DEFAULT_EPSILON
    sigma: float = DEFAULT_SIGMA
    toggles: FeatureToggles = field(default_factory=FeatureToggles)

    def assemble(
        self, series: ScadaSeries, g: NetworkGraph, roughness_delta: float = 0.0, demand_error: float = 0.0
    ) -> FeatureTensor:
        return assemble_features(
            series,
            g,
            window=self.window,
            toggles=self.toggles,
            roughness_delta=roughness_delta,
            demand_error=demand_error,
            eps=self.eps,
            sigma=self.sigma,
        )

    def to_dict(self) -> dict[str, Any]:
        return {"window": self.window, "eps": self.eps, "sigma": self.sigma, "toggles": self.toggles.to_dict()}

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "FeatureSettings":
        unknown = sorted(set(raw) - {"window", "eps", "sigma", "toggles"})
        if unknown:
            raise ValueError(f"Unknown feature setting(s): {', '.join(unknown)}")
        return cls(
            window=int(raw.get("window", DEFAULT_WINDOW)),
            eps=float(raw.get("eps", DEFAULT_EPSILON)),
            sigma=float(raw.get("sigma", DEFAULT_SIGMA)),
            toggles=FeatureToggles(**raw.get("toggles", {})),
        )


def dominant_violation(tensor: FeatureTensor, t: int) -> pd.Series:
    """Per node at step t: which conservation law is violated more ("none" when both are 0)."""
    mass = tensor.values[t, :, PHI_MASS]
    energy = tensor.values[t, :, PHI_ENERGY]
    labels = np.where(mass >= energy, "phi_mass", "phi_energy")
    labels = np.where((mass == 0) & (energy == 0), "none", labels)
    return pd.Series(labels, index=list(tensor.node_ids), name="dominant_violation")


def metadata_path(path: str | Path) -> Path:
    return Path(path).with_suffix(".json")


def save_features(tensor: FeatureTensor, path: str | Path, provenance: Provenance | None = None) -> None:
    """Write the long-form CSV and its JSON metadata (same stem, .json suffix)."""
    write_csv(path, tensor.to_frame(), index=False)
    meta = tensor.metadata()
    if provenance is not None:
        meta["provenance"] = provenance.to_dict()
    write_json(metadata_path(path), meta)


def load_features(path: str | Path) -> FeatureTensor:
    """Read a tensor written by `save_features`.

    Raises:
        FileNotFoundError: If the CSV or its metadata is missing
        ValueError: If the metadata format or layout does not match
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(
            f"Features file not found: {path}. "
            "Please verify the file path is correct and the file exists."
        )
    meta = read_json(metadata_path(path))
    if meta.get("format") != FEATURES_FORMAT or tuple(meta.get("layout", ())) != FEATURE_LAYOUT:
        raise ValueError(f"Unsupported feature metadata in {metadata_path(path)}")
    frame = pd.read_csv(path, float_precision="round_trip")
    node_ids = tuple(meta["nodes"])
    n_nodes = len(node_ids)
    if len(frame) % n_nodes:
        raise ValueError(f"Features file {path} has {len(frame)} rows, not a multiple of {n_nodes} nodes")
    n_steps = len(frame) // n_nodes
    values = frame[list(FEATURE_LAYOUT)].to_numpy(dtype=float).reshape(n_steps, n_nodes, len(FEATURE_LAYOUT))
    times = pd.DatetimeIndex(pd.to_datetime(frame["time"].to_numpy()[::n_nodes]), name="timestamp")
    return FeatureTensor(
        values=values,
        node_ids=node_ids,
        times=times,
        measured_mask=np.array(meta["measured"], dtype=bool),
        labels=frame["label"].to_numpy(dtype=np.int64).reshape(n_steps, n_nodes),
        window=int(meta["window"]),
        eps=float(meta["eps"]),
        sigma=float(meta["sigma"]),
        toggles=FeatureToggles(**meta["toggles"]),
        roughness_delta=float(meta["roughness_delta"]),
        demand_error=float(meta["demand_error"]),
        attack_log=[AttackSpec.from_dict(raw) for raw in meta["attack_log"]],
        raw_residual=None if meta.get("raw_residual") is None else np.array(meta["raw_residual"], dtype=float),
    )
