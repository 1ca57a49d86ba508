import logging

import numpy as np
import torch

from gat_core import PhysicsGat
from training.config import TrainConfig
from training.losses import WindowBatch, composite_loss

logger = logging.getLogger(__name__)

RELATIVE_ERROR_FLOOR = 1e-5


class GradientError(FloatingPointError):
    """Raised when a parameter group receives a non-finite or incorrect gradient.

    Attributes:
        group (str): Parameter group (gat, lstm, mlp or fusion)
    """

    def __init__(self, message: str, group: str):
        super().__init__(message)
        self.group = group


def check_finite_gradients(model: PhysicsGat) -> None:
    """Raise GradientError naming the first group holding a NaN or infinite gradient."""
    for group, params in model.parameter_groups().items():
        for name, param in params:
            if param.grad is not None and not torch.isfinite(param.grad).all():
                raise GradientError(f"Non-finite gradient in parameter group '{group}' ({name})", group)


def _total_loss(model: PhysicsGat, batch: WindowBatch, edge_endpoints: torch.Tensor, cfg: TrainConfig) -> torch.Tensor:
    total, _ = composite_loss(model(batch.x), batch, edge_endpoints, cfg)
    return total


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), RELATIVE_ERROR_FLOOR)


def finite_difference_check(
    model: PhysicsGat,
    batch: WindowBatch,
    edge_endpoints: torch.Tensor,
    cfg: TrainConfig,
    entries_per_param: int = 4,
    seed: int = 0,
) -> dict[str, float]:
    """Compare autograd gradients of the total loss with central differences.

    A random subset of `entries_per_param` entries of every parameter array is
    perturbed by ±cfg.fd_step. Parameters are restored afterwards and the
    model's gradients are cleared.

    Returns:
        Largest relative error per parameter group
    """
    rng = np.random.default_rng(seed)
    model.zero_grad()
    _total_loss(model, batch, edge_endpoints, cfg).backward()
    check_finite_gradients(model)

    errors: dict[str, float] = {}
    with torch.no_grad():
        for group, params in model.parameter_groups().items():
            worst = 0.0
            for _, param in params:
                flat = param.data.view(-1)
                grad = param.grad.view(-1) if param.grad is not None else torch.zeros_like(flat)
                picks = rng.choice(flat.numel(), size=min(entries_per_param, flat.numel()), replace=False)
                for idx in picks.tolist():
                    original = flat[idx].item()
                    flat[idx] = original + cfg.fd_step
                    plus = _total_loss(model, batch, edge_endpoints, cfg).item()
                    flat[idx] = original - cfg.fd_step
                    minus = _total_loss(model, batch, edge_endpoints, cfg).item()
                    flat[idx] = original
                    numeric = (plus - minus) / (2.0 * cfg.fd_step)
                    worst = max(worst, relative_error(grad[idx].item(), numeric))
            errors[group] = worst
    model.zero_grad()
    logger.info("Finite-difference check: %s", ", ".join(f"{k}={v:.2e}" for k, v in errors.items()))
    return errors


def verify_gradients(
    model: PhysicsGat, batch: WindowBatch, edge_endpoints: torch.Tensor, cfg: TrainConfig, seed: int = 0
) -> dict[str, float]:
    """Run the finite-difference check and raise GradientError above cfg.fd_tolerance."""
    errors = finite_difference_check(model, batch, edge_endpoints, cfg, seed=seed)
    for group, error in errors.items():
        if error > cfg.fd_tolerance:
            raise GradientError(
                f"Gradient check failed for parameter group '{group}': "
                f"relative error {error:.3e} exceeds {cfg.fd_tolerance:.1e}",
                group,
            )
    return errors
