from dataclasses import dataclass

import torch
from torch import nn

from utils.tensor_ops import glorot_, scatter_softmax, scatter_sum

# Fixed (λ1, λ2, λ3) of the non-adaptive fusion variants
FIXED_MIX: dict[str, tuple[float, float, float]] = {
    "micro": (1.0, 0.0, 0.0),
    "equal": (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0),
    "micro_meso": (0.5, 0.5, 0.0),
    "micro_macro": (0.5, 0.0, 0.5),
}


@dataclass
class ScoreBundle:
    """Scores of one batch at node, cluster and network scale.

    Attributes:
        micro (Tensor): (B, N) node scores
        meso (Tensor): (B, C) cluster scores
        macro (Tensor): (B,) network score
        summary (Tensor): (B, 3) fusion input [std(micro), max meso, macro]
        lam (Tensor): (B, 3) fusion weights on the simplex
        final (Tensor): (B, N) fused node scores
        beta (Tensor): (B, N) pooling weight of each node within its cluster
    """
    micro: torch.Tensor
    meso: torch.Tensor
    macro: torch.Tensor
    summary: torch.Tensor
    lam: torch.Tensor
    final: torch.Tensor
    beta: torch.Tensor


def population_std(values: torch.Tensor) -> torch.Tensor:
    """Population std over the last axis with a finite gradient where it is 0."""
    var = values.var(dim=-1, correction=0)
    positive = var > 0
    safe = torch.where(positive, var, torch.ones_like(var))
    return torch.where(positive, torch.sqrt(safe), torch.zeros_like(var))


class MultiScaleFusion(nn.Module):
    """Attention pooling of micro scores into clusters and adaptive fusion.

        β_i        = softmax over 𝒞(i) of vᵀ tanh(W_pool f_i)
        meso(𝒞_k)  = Σ_{i∈𝒞_k} β_i · micro_i
        macro      = mean_i micro_i
        λ          = softmax(W_λ [std(micro), max_k meso, macro])
        final_i    = λ1 · micro_i + λ2 · meso(𝒞(i)) + λ3 · macro
    """

    def __init__(
        self,
        fused_dim: int,
        pool_dim: int,
        assignment: torch.Tensor,
        mode: str = "adaptive",
        generator: torch.Generator | None = None,
    ):
        super().__init__()
        if mode != "adaptive" and mode not in FIXED_MIX:
            raise ValueError(f"Unknown fusion mode '{mode}'")
        self.mode = mode
        self.register_buffer("assignment", assignment.to(torch.int64), persistent=False)
        self.n_clusters = int(assignment.max()) + 1 if assignment.numel() else 0
        self.pool = nn.Linear(fused_dim, pool_dim, bias=False, dtype=torch.float64)
        self.pool_vector = nn.Parameter(torch.empty(pool_dim, dtype=torch.float64))
        self.fusion_weight = nn.Parameter(torch.empty(3, 3, dtype=torch.float64))
        generator = generator or torch.Generator().manual_seed(0)
        glorot_(self.pool.weight, fused_dim, pool_dim, generator)
        glorot_(self.pool_vector, pool_dim, 1, generator)
        glorot_(self.fusion_weight, 3, 3, generator)

    def fusion_weights(self, summary: torch.Tensor) -> torch.Tensor:
        if self.mode == "adaptive":
            return torch.softmax(summary @ self.fusion_weight.T, dim=-1)
        fixed = torch.tensor(FIXED_MIX[self.mode], dtype=summary.dtype, device=summary.device)
        return fixed.expand_as(summary)

    def forward(self, micro: torch.Tensor, f: torch.Tensor) -> ScoreBundle:
        """Fuse (B, N) micro scores using the (B, N, fused_dim) node summaries."""
        pool_logits = torch.tanh(self.pool(f)) @ self.pool_vector
        beta = scatter_softmax(pool_logits, self.assignment, self.n_clusters)
        meso = scatter_sum(beta * micro, self.assignment, self.n_clusters, dim=-1)
        macro = micro.mean(dim=-1)
        summary = torch.stack([population_std(micro), meso.max(dim=-1).values, macro], dim=-1)
        lam = self.fusion_weights(summary)
        final = (
            lam[..., 0:1] * micro
            + lam[..., 1:2] * meso[..., self.assignment]
            + lam[..., 2:3] * macro[..., None]
        )
        return ScoreBundle(micro=micro, meso=meso, macro=macro, summary=summary, lam=lam, final=final, beta=beta)
