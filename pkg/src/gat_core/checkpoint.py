import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import torch

from gat_core.config import ModelConfig
from gat_core.model import PhysicsGat
from multiscale import Clustering
from network.io import network_from_dict, network_to_dict
from utils.dtos import Provenance
from utils.io import read_json, write_json

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "physics-gat-checkpoint/1"


class CheckpointError(ValueError):
    """Raised when a checkpoint file is malformed or from another format version."""


@dataclass
class Checkpoint:
    """A restored model with the settings it was trained under.

    Attributes:
        model (PhysicsGat): Model with weights and fitted scaler loaded
        settings (dict): Feature, training and detection settings saved alongside
        provenance (dict | None): Config hash, seed and version of the training run
    """
    model: PhysicsGat
    settings: dict[str, Any] = field(default_factory=dict)
    provenance: dict[str, Any] | None = None


def checkpoint_payload(
    model: PhysicsGat, settings: dict[str, Any] | None = None, provenance: Provenance | None = None
) -> dict[str, Any]:
    return {
        "format": CHECKPOINT_FORMAT,
        "config": model.config.to_dict(),
        "network": network_to_dict(model.graph),
        "clustering": model.clustering.to_dict(),
        "parameters": {
            name: {"shape": list(tensor.shape), "data": tensor.detach().reshape(-1).tolist()}
            for name, tensor in model.state_dict().items()
        },
        "settings": settings or {},
        "provenance": provenance.to_dict() if provenance else None,
    }


def save_checkpoint(
    model: PhysicsGat,
    path: str | Path,
    settings: dict[str, Any] | None = None,
    provenance: Provenance | None = None,
) -> None:
    """Write every parameter array as {shape, data} together with the config, network and clustering."""
    write_json(path, checkpoint_payload(model, settings, provenance))
    logger.info("Saved checkpoint to %s", path)


def restore_model(payload: dict[str, Any]) -> PhysicsGat:
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(
            f"Unsupported checkpoint format {payload.get('format')!r}; expected {CHECKPOINT_FORMAT!r}"
        )
    try:
        model = PhysicsGat(
            ModelConfig.from_dict(payload["config"]),
            network_from_dict(payload["network"]),
            Clustering.from_dict(payload["clustering"]),
        )
        state = {
            name: torch.tensor(entry["data"], dtype=torch.float64).reshape(entry["shape"])
            for name, entry in payload["parameters"].items()
        }
        model.load_state_dict(state)
    except (KeyError, RuntimeError) as e:
        raise CheckpointError(f"Checkpoint does not match its model config: {e}") from e
    return model


def load_checkpoint(path: str | Path) -> Checkpoint:
    """Restore a model written by `save_checkpoint`.

    Raises:
        FileNotFoundError: If the file doesn't exist
        CheckpointError: If the format tag, config or parameter shapes don't match
    """
    payload = read_json(path)
    model = restore_model(payload)
    model.eval()
    return Checkpoint(model=model, settings=payload.get("settings", {}), provenance=payload.get("provenance"))
