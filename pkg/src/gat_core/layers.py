import torch
import torch.nn.functional as F
from torch import nn

from utils.tensor_ops import glorot_, scatter_softmax, scatter_sum

MICRO_CLAMP = 1e-7


class GatLayer(nn.Module):
    """One multi-head graph-attention layer with averaged heads.

    For node i and head k:

        e_ij = LeakyReLU(a_kᵀ [W_k h_i ‖ W_k h_j])      j ∈ 𝒩(i) ∪ {i}
        α_ij = softmax_j(e_ij)
        h'_i = ELU((1/K) Σ_k Σ_j α_ij W_k h_j)

    The attention support is given as parallel (target, source) index arrays,
    so the cost is linear in the number of edges.
    """

    def __init__(
        self,
        in_dim: int,
        out_dim: int,
        heads: int,
        leaky_slope: float = 0.2,
        uniform: bool = False,
        generator: torch.Generator | None = None,
    ):
        super().__init__()
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.heads = heads
        self.leaky_slope = leaky_slope
        self.uniform = uniform
        self.weight = nn.Parameter(torch.empty(heads, out_dim, in_dim, dtype=torch.float64))
        self.attn = nn.Parameter(torch.empty(heads, 2 * out_dim, dtype=torch.float64))
        generator = generator or torch.Generator().manual_seed(0)
        glorot_(self.weight, in_dim, out_dim, generator)
        glorot_(self.attn, 2 * out_dim, 1, generator)

    def forward(
        self, h: torch.Tensor, targets: torch.Tensor, sources: torch.Tensor
    ) -> tuple[torch.Tensor, torch.Tensor]:
        """Map (..., N, d_in) embeddings to (..., N, d_out).

        Returns:
            The new embeddings and the attention weights, shaped (..., K, P)
            with P the number of (target, source) pairs.

        Raises:
            ValueError: On a feature-size mismatch or non-finite input
        """
        if h.shape[-1] != self.in_dim:
            raise ValueError(f"GAT layer expects {self.in_dim} input features, got {h.shape[-1]}")
        if not torch.isfinite(h).all():
            raise ValueError("GAT layer received non-finite node embeddings")
        n_nodes = h.shape[-2]

        projected = torch.einsum("kod,...nd->...kno", self.weight, h)
        if self.uniform:
            logits = torch.zeros((*projected.shape[:-2], targets.numel()), dtype=h.dtype, device=h.device)
        else:
            target_part = (projected * self.attn[:, None, :self.out_dim]).sum(-1)
            source_part = (projected * self.attn[:, None, self.out_dim:]).sum(-1)
            logits = F.leaky_relu(
                target_part[..., targets] + source_part[..., sources], negative_slope=self.leaky_slope
            )
        alpha = scatter_softmax(logits, targets, n_nodes)

        messages = projected[..., sources, :] * alpha[..., None]
        aggregated = scatter_sum(messages, targets, n_nodes, dim=-2)
        return F.elu(aggregated.mean(dim=-3)), alpha


class SpatialEncoder(nn.Module):
    """L stacked GAT layers applied independently to every frame of a window."""

    def __init__(
        self,
        in_dim: int,
        hidden: int,
        heads: int,
        layers: int,
        leaky_slope: float = 0.2,
        uniform: bool = False,
        generator: torch.Generator | None = None,
    ):
        super().__init__()
        generator = generator or torch.Generator().manual_seed(0)
        dims = [in_dim] + [hidden] * layers
        self.layers = nn.ModuleList(
            GatLayer(dims[k], dims[k + 1], heads, leaky_slope, uniform, generator) for k in range(layers)
        )

    def forward(
        self, x: torch.Tensor, targets: torch.Tensor, sources: torch.Tensor
    ) -> tuple[torch.Tensor, torch.Tensor]:
        """(..., N, F) → (..., N, d) plus the last layer's attention (..., K, P)."""
        h = x
        alpha = torch.empty(0)
        for layer in self.layers:
            h, alpha = layer(h, targets, sources)
        return h, alpha


class TemporalFusion(nn.Module):
    """Summarize each node's window of embeddings into one vector.

    "bilstm" concatenates the final forward and backward hidden states (2h
    values); "mean" averages the embeddings over the window (d values).
    """

    def __init__(self, in_dim: int, hidden: int, mode: str = "bilstm", generator: torch.Generator | None = None):
        super().__init__()
        self.mode = mode
        self.lstm: nn.LSTM | None = None
        if mode == "bilstm":
            self.lstm = nn.LSTM(in_dim, hidden, batch_first=True, bidirectional=True, dtype=torch.float64)
            generator = generator or torch.Generator().manual_seed(0)
            for name, param in self.lstm.named_parameters():
                if name.startswith("weight"):
                    glorot_(param, param.shape[1], param.shape[0], generator)
                else:
                    with torch.no_grad():
                        param.zero_()
                        if name.startswith("bias_ih"):
                            # gate order i, f, g, o
                            param[hidden:2 * hidden] = 1.0

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        """(B, w, N, d) → (B, N, fused_dim)."""
        if self.lstm is None:
            return z.mean(dim=1)
        batch, window, n_nodes, dim = z.shape
        sequences = z.permute(0, 2, 1, 3).reshape(batch * n_nodes, window, dim)
        _, (h_n, _) = self.lstm(sequences)
        fused = torch.cat([h_n[0], h_n[1]], dim=-1)
        return fused.reshape(batch, n_nodes, -1)


class MicroHead(nn.Module):
    """Two-layer MLP with a sigmoid output, clamped to [1e-7, 1 − 1e-7]."""

    def __init__(self, in_dim: int, hidden: int = 64, generator: torch.Generator | None = None):
        super().__init__()
        self.hidden_layer = nn.Linear(in_dim, hidden, dtype=torch.float64)
        self.out_layer = nn.Linear(hidden, 1, dtype=torch.float64)
        generator = generator or torch.Generator().manual_seed(0)
        for layer in (self.hidden_layer, self.out_layer):
            glorot_(layer.weight, layer.in_features, layer.out_features, generator)
            with torch.no_grad():
                layer.bias.zero_()

    def forward(self, f: torch.Tensor) -> torch.Tensor:
        score = torch.sigmoid(self.out_layer(F.relu(self.hidden_layer(f)))).squeeze(-1)
        return score.clamp(MICRO_CLAMP, 1.0 - MICRO_CLAMP)
