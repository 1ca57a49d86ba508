from dataclasses import dataclass
from typing import Any

import torch

from gat_core import MICRO_CLAMP, ModelOutput
from physics_features.features import PHI_ENERGY, PHI_MASS
from training.config import TrainConfig


@dataclass
class WindowBatch:
    """Mini-batch of raw feature windows and the labels of their last step.

    Attributes:
        x (Tensor): (B, w, N, F) unscaled feature windows
        labels (Tensor): (B, N) binary labels at the window end
    """
    x: torch.Tensor
    labels: torch.Tensor

    @property
    def size(self) -> int:
        return int(self.x.shape[0])


@dataclass
class LossBreakdown:
    """Scalar loss terms of one batch; total = bce + λ_p·physics + λ_c·consist."""
    bce: float
    physics: float
    consist: float
    total: float
    lambda_p: float
    lambda_c: float

    def to_dict(self) -> dict[str, Any]:
        return {"bce": self.bce, "physics": self.physics, "consist": self.consist, "total": self.total}


def bce_loss(scores: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """Mean binary cross-entropy over every (sample, node) pair."""
    a = scores.clamp(MICRO_CLAMP, 1.0 - MICRO_CLAMP)
    y = labels.to(a.dtype)
    return -(y * torch.log(a) + (1.0 - y) * torch.log(1.0 - a)).mean()


def physics_loss(x: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """Mean of 𝟙(y = 0) · max(φ_mass, φ_energy) at the window end.

    Only input features enter, so the term carries no parameter gradient.
    """
    last = x[:, -1]
    violation = torch.maximum(last[..., PHI_MASS], last[..., PHI_ENERGY])
    return ((labels == 0).to(x.dtype) * violation).mean()


def consistency_loss(final: torch.Tensor, edge_endpoints: torch.Tensor) -> torch.Tensor:
    """Mean over samples and edges of (â_i − â_j)²; 0 on a network without edges."""
    if edge_endpoints.numel() == 0:
        return final.new_zeros(())
    diff = final[..., edge_endpoints[:, 0]] - final[..., edge_endpoints[:, 1]]
    return (diff ** 2).mean()


def composite_loss(
    output: ModelOutput, batch: WindowBatch, edge_endpoints: torch.Tensor, cfg: TrainConfig
) -> tuple[torch.Tensor, LossBreakdown]:
    bce = bce_loss(output.scores.final, batch.labels)
    physics = physics_loss(batch.x, batch.labels)
    consist = consistency_loss(output.scores.final, edge_endpoints)
    total = bce + cfg.lambda_p * physics + cfg.lambda_c * consist
    breakdown = LossBreakdown(
        bce=float(bce),
        physics=float(physics),
        consist=float(consist),
        total=float(total),
        lambda_p=cfg.lambda_p,
        lambda_c=cfg.lambda_c,
    )
    return total, breakdown
