from training.config import TrainConfig
from training.losses import (
    LossBreakdown,
    WindowBatch,
    bce_loss,
    composite_loss,
    consistency_loss,
    physics_loss,
)
from training.optim import adam_step, cosine_anneal, make_optimizer
from training.gradients import GradientError, check_finite_gradients, finite_difference_check, verify_gradients
from training.trainer import HISTORY_COLUMNS, TrainResult, build_batch, train, window_samples

__all__ = [
    "HISTORY_COLUMNS",
    "GradientError",
    "LossBreakdown",
    "TrainConfig",
    "TrainResult",
    "WindowBatch",
    "adam_step",
    "bce_loss",
    "build_batch",
    "check_finite_gradients",
    "composite_loss",
    "consistency_loss",
    "cosine_anneal",
    "finite_difference_check",
    "make_optimizer",
    "physics_loss",
    "train",
    "verify_gradients",
    "window_samples",
]
