"""Run configuration: defaults < config file < command-line flags."""
import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field, replace
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import Any

import yaml
from jsonschema import Draft7Validator

from gat_core.config import ATTENTION_MODES, FUSION_MODES, TEMPORAL_MODES, ModelConfig
from physics_features.features import FeatureSettings
from training.config import TrainConfig
from utils.dtos import Provenance

logger = logging.getLogger(__name__)

PACKAGE_NAME = "physics-gat-wds"
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


class ConfigError(ValueError):
    """Raised when a configuration file cannot be parsed or does not match the config format."""


def tool_version() -> str:
    try:
        return version(PACKAGE_NAME)
    except PackageNotFoundError:
        return "0.0.0+local"


@dataclass(frozen=True)
class PathSettings:
    """Default locations of the pipeline artifacts; every stage flag overrides its entry.

    Attributes:
        network (str | None): Network JSON file
        data (str | None): Series directory
        features (str | None): Feature CSV
        checkpoint (str | None): Model checkpoint
        report (str | None): Report JSON
    """
    network: str | None = None
    data: str | None = None
    features: str | None = None
    checkpoint: str | None = None
    report: str | None = None


@dataclass(frozen=True)
class SweepSettings:
    """Sweep axes and the statistics every sweep point is reported with.

    Attributes:
        roughness_deltas (tuple[float, ...]): Relative roughness perturbations δ
        outage_fractions (tuple[float, ...]): Masked share of pressure sensors
        outage_seeds (int): Masks drawn per outage fraction
        demand_errors (tuple[float, ...]): Relative demand-estimate errors
        ablation_variants (tuple[str, ...]): Ablation variants to retrain (all when empty)
        n_resamples (int): Bootstrap resamples per point
        false_alarm_rate (float): Clean-step alarm share of the residual-threshold baseline
    """
    roughness_deltas: tuple[float, ...] = (-0.15, -0.10, -0.05, 0.0, 0.05, 0.10, 0.15)
    outage_fractions: tuple[float, ...] = (0.0, 0.05, 0.10)
    outage_seeds: int = 5
    demand_errors: tuple[float, ...] = (-0.20, -0.10, 0.0, 0.10, 0.20)
    ablation_variants: tuple[str, ...] = ()
    n_resamples: int = 1000
    false_alarm_rate: float = 0.01

    def to_dict(self) -> dict[str, Any]:
        return {name: list(value) if isinstance(value, tuple) else value for name, value in asdict(self).items()}

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "SweepSettings":
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in raw.items()})


_NUMBER = {"type": "number"}
_POSITIVE_INT = {"type": "integer", "minimum": 1}
_NUMBER_LIST = {"type": "array", "items": _NUMBER}
_OPTIONAL_PATH = {"type": ["string", "null"]}


def _closed(properties: dict[str, Any]) -> dict[str, Any]:
    return {"type": "object", "additionalProperties": False, "properties": properties}


RUN_CONFIG_SCHEMA: dict[str, Any] = _closed({
    "seed": {"type": "integer", "minimum": 0},
    "threads": {"type": ["integer", "null"], "minimum": 1},
    "log_level": {"enum": list(LOG_LEVELS)},
    "paths": _closed({name: _OPTIONAL_PATH for name in ("network", "data", "features", "checkpoint", "report")}),
    "features": _closed({
        "window": _POSITIVE_INT,
        "eps": _NUMBER,
        "sigma": _NUMBER,
        "toggles": _closed({
            name: {"type": "boolean"} for name in ("phi_mass", "phi_energy", "normalization", "interpolation")
        }),
    }),
    "model": _closed({
        **{name: _POSITIVE_INT for name in (
            "in_features", "hidden", "heads", "layers", "lstm_hidden", "mlp_hidden", "pool_dim", "window"
        )},
        "leaky_slope": _NUMBER,
        "attention": {"enum": list(ATTENTION_MODES)},
        "temporal": {"enum": list(TEMPORAL_MODES)},
        "fusion": {"enum": list(FUSION_MODES)},
        "seed": {"type": "integer", "minimum": 0},
    }),
    "train": _closed({
        **{name: _NUMBER for name in (
            "eta0", "eta_min", "lambda_p", "lambda_c", "tau", "adam_beta1", "adam_beta2", "adam_eps",
            "fd_step", "fd_tolerance",
        )},
        **{name: _POSITIVE_INT for name in ("batch_size", "epochs", "validate_every", "patience", "sustain_k")},
        "seed": {"type": "integer", "minimum": 0},
        "grad_mode": {"enum": ["analytic", "check"]},
    }),
    "sweep": _closed({
        "roughness_deltas": _NUMBER_LIST,
        "outage_fractions": _NUMBER_LIST,
        "outage_seeds": _POSITIVE_INT,
        "demand_errors": _NUMBER_LIST,
        "ablation_variants": {"type": "array", "items": {"type": "string"}},
        "n_resamples": {"type": "integer", "minimum": 0},
        "false_alarm_rate": _NUMBER,
    }),
})


@dataclass(frozen=True)
class RunConfig:
    """Everything a pipeline stage reads besides its input files.

    Attributes:
        seed (int): Master seed; simulation, attacks and benchmark splits derive from it
        threads (int | None): Intra-op thread cap for torch (library default when None)
        log_level (str): Root logging level
        paths (PathSettings): Default artifact locations
        features (FeatureSettings): Feature assembly settings
        model (ModelConfig): Detector shape and variant switches
        train (TrainConfig): Optimization and alarm settings
        sweep (SweepSettings): Sweep axes and statistics
    """
    seed: int = 0
    threads: int | None = None
    log_level: str = "INFO"
    paths: PathSettings = field(default_factory=PathSettings)
    features: FeatureSettings = field(default_factory=FeatureSettings)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    sweep: SweepSettings = field(default_factory=SweepSettings)

    def to_dict(self) -> dict[str, Any]:
        return {
            "seed": self.seed,
            "threads": self.threads,
            "log_level": self.log_level,
            "paths": asdict(self.paths),
            "features": self.features.to_dict(),
            "model": self.model.to_dict(),
            "train": self.train.to_dict(),
            "sweep": self.sweep.to_dict(),
        }

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "RunConfig":
        errors = schema_errors(raw)
        if errors:
            raise ConfigError("Configuration does not match the config format: " + "; ".join(errors))
        return cls(
            seed=raw.get("seed", 0),
            threads=raw.get("threads"),
            log_level=raw.get("log_level", "INFO"),
            paths=PathSettings(**raw.get("paths", {})),
            features=FeatureSettings.from_dict(raw.get("features", {})),
            model=ModelConfig.from_dict(raw.get("model", {})),
            train=TrainConfig.from_dict(raw.get("train", {})),
            sweep=SweepSettings.from_dict(raw.get("sweep", {})),
        )

    def config_hash(self) -> str:
        # log level and thread count do not change any output
        payload = {k: v for k, v in self.to_dict().items() if k not in ("log_level", "threads")}
        canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def provenance(self) -> Provenance:
        return Provenance(config_hash=self.config_hash(), seed=self.seed, version=tool_version())


def schema_errors(payload: Any) -> list[str]:
    validator = Draft7Validator(RUN_CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(payload), key=lambda e: list(e.path))
    return [f"Validation error at {'.'.join(str(p) for p in e.path) or '<root>'}: {e.message}" for e in errors]


def read_config_file(path: str | Path) -> dict[str, Any]:
    """Parse a YAML or JSON configuration file (JSON is read by the YAML loader).

    Raises:
        FileNotFoundError: If the file doesn't exist
        ConfigError: If the file is not valid YAML or violates the config format
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(
            f"Config file not found: {path}. "
            "Please verify the file path is correct and the file exists."
        )
    try:
        payload = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as e:
        raise ConfigError(f"Invalid YAML in config file {path}: {e}") from e
    payload = payload or {}
    errors = schema_errors(payload)
    if errors:
        raise ConfigError(f"Config file {path} does not match the config format: " + "; ".join(errors))
    return payload


def merge(base: dict[str, Any], override: dict[str, Any]) -> dict[str, Any]:
    """Recursive dictionary merge; `override` wins and None values in it are ignored."""
    merged = dict(base)
    for key, value in override.items():
        if value is None:
            continue
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_run_config(path: str | Path | None = None, overrides: dict[str, Any] | None = None) -> RunConfig:
    """Merge the defaults, an optional config file and explicit flag values.

    A `seed` given in the file or the flags also seeds model initialization and
    batch shuffling unless those name their own seed.
    """
    payload = RunConfig().to_dict()
    file_payload = read_config_file(path) if path else {}
    flags = overrides or {}
    payload = merge(merge(payload, file_payload), flags)
    config = RunConfig.from_dict(payload)
    seed = flags.get("seed", file_payload.get("seed"))
    if seed is not None:
        explicit = merge(file_payload, flags)
        model_seed = explicit.get("model", {}).get("seed", seed)
        train_seed = explicit.get("train", {}).get("seed", seed)
        config = replace(config, model=replace(config.model, seed=model_seed),
                         train=replace(config.train, seed=train_seed))
    logger.debug("Run configuration %s: %s", config.config_hash()[:12], config.to_dict())
    return config
