import math
from collections.abc import Iterable

import torch

from training.config import TrainConfig


def cosine_anneal(epoch: int, cfg: TrainConfig) -> float:
    """Learning rate η_e = η_min + ½(η_0 − η_min)(1 + cos(πe/E)) for 0 ≤ e ≤ E."""
    if not 0 <= epoch <= cfg.epochs:
        raise ValueError(f"Epoch {epoch} outside the schedule range [0, {cfg.epochs}]")
    return cfg.eta_min + 0.5 * (cfg.eta0 - cfg.eta_min) * (1.0 + math.cos(math.pi * epoch / cfg.epochs))


def make_optimizer(params: Iterable[torch.nn.Parameter], cfg: TrainConfig) -> torch.optim.Adam:
    """Adam with bias correction; its per-parameter state holds the moment accumulators and step count."""
    return torch.optim.Adam(
        params,
        lr=cfg.eta0,
        betas=(cfg.adam_beta1, cfg.adam_beta2),
        eps=cfg.adam_eps,
        foreach=False,
    )


def adam_step(optimizer: torch.optim.Adam, eta: float) -> None:
    """Apply one Adam update with the current learning rate η_t."""
    for group in optimizer.param_groups:
        group["lr"] = eta
    optimizer.step()
