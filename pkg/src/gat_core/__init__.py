from gat_core.config import ModelConfig
from gat_core.layers import MICRO_CLAMP, GatLayer, MicroHead, SpatialEncoder, TemporalFusion
from gat_core.model import FeatureScaler, ModelOutput, PhysicsGat, window_batch
from gat_core.checkpoint import (
    CHECKPOINT_FORMAT,
    Checkpoint,
    CheckpointError,
    load_checkpoint,
    restore_model,
    save_checkpoint,
)

__all__ = [
    "CHECKPOINT_FORMAT",
    "MICRO_CLAMP",
    "Checkpoint",
    "CheckpointError",
    "FeatureScaler",
    "GatLayer",
    "MicroHead",
    "ModelConfig",
    "ModelOutput",
    "PhysicsGat",
    "SpatialEncoder",
    "TemporalFusion",
    "load_checkpoint",
    "restore_model",
    "save_checkpoint",
    "window_batch",
]
