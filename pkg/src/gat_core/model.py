import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import torch
from numpy.typing import NDArray
from torch import nn

from gat_core.config import ModelConfig
from gat_core.layers import MicroHead, SpatialEncoder, TemporalFusion
from multiscale import Clustering, MultiScaleFusion, ScoreBundle
from network.graph import NetworkGraph

logger = logging.getLogger(__name__)

PARAMETER_GROUPS: dict[str, str] = {
    "encoder": "gat",
    "temporal": "lstm",
    "micro_head": "mlp",
    "fusion": "fusion",
}


class FeatureScaler(nn.Module):
    """Per-feature standardization (x − mean) / std fitted on training features.

    Features with zero spread keep std 1 so they pass through centered.
    """

    def __init__(self, n_features: int):
        super().__init__()
        self.register_buffer("mean", torch.zeros(n_features, dtype=torch.float64))
        self.register_buffer("std", torch.ones(n_features, dtype=torch.float64))

    def fit(self, values: NDArray[np.float64]) -> "FeatureScaler":
        """Fit on an (..., F) array of raw feature values."""
        flat = np.asarray(values, dtype=float).reshape(-1, self.mean.numel())
        if flat.shape[0] == 0:
            raise ValueError("Cannot fit the feature scaler on an empty feature array")
        std = flat.std(axis=0)
        std[std == 0] = 1.0
        with torch.no_grad():
            self.mean.copy_(torch.from_numpy(flat.mean(axis=0)))
            self.std.copy_(torch.from_numpy(std))
        return self

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return (x - self.mean) / self.std


@dataclass
class ModelOutput:
    """Forward-pass result for a batch of windows.

    Attributes:
        scores (ScoreBundle): Micro, meso, macro and fused scores
        attention (Tensor): (B, w, K, P) last-layer attention per frame, P = len(g.attention_pairs[0])
        fused (Tensor): (B, N, fused_dim) per-node temporal summaries
    """
    scores: ScoreBundle
    attention: torch.Tensor
    fused: torch.Tensor


class PhysicsGat(nn.Module):
    """GAT spatial encoder, temporal fusion, micro head and multi-scale fusion.

    The model is bound to one network: the attention support and cluster
    assignment are fixed buffers built from `g` and `clustering`. Inputs are raw
    (unscaled) feature windows shaped (B, w, N, F).
    """

    def __init__(self, config: ModelConfig, g: NetworkGraph, clustering: Clustering):
        super().__init__()
        self.config = config
        self.graph = g
        self.clustering = clustering
        generator = torch.Generator().manual_seed(config.seed)
        targets, sources = g.attention_pairs
        self.register_buffer("targets", torch.from_numpy(targets), persistent=False)
        self.register_buffer("sources", torch.from_numpy(sources), persistent=False)

        self.scaler = FeatureScaler(config.in_features)
        self.encoder = SpatialEncoder(
            config.in_features,
            config.hidden,
            config.heads,
            config.layers,
            config.leaky_slope,
            uniform=config.attention == "uniform",
            generator=generator,
        )
        self.temporal = TemporalFusion(config.hidden, config.lstm_hidden, config.temporal, generator)
        self.micro_head = MicroHead(config.fused_dim, config.mlp_hidden, generator)
        self.fusion = MultiScaleFusion(
            config.fused_dim,
            config.pool_dim,
            torch.from_numpy(clustering.labels(g.node_ids)),
            config.fusion,
            generator,
        )

    @property
    def n_nodes(self) -> int:
        return len(self.graph.nodes)

    def forward(self, x: torch.Tensor) -> ModelOutput:
        if x.ndim != 4 or x.shape[2:] != (self.n_nodes, self.config.in_features):
            raise ValueError(
                f"Expected input windows shaped (B, w, {self.n_nodes}, {self.config.in_features}), "
                f"got {tuple(x.shape)}"
            )
        z, attention = self.encoder(self.scaler(x), self.targets, self.sources)
        fused = self.temporal(z)
        micro = self.micro_head(fused)
        return ModelOutput(scores=self.fusion(micro, fused), attention=attention, fused=fused)

    def parameter_groups(self) -> dict[str, list[tuple[str, nn.Parameter]]]:
        """Trainable parameters keyed by group (gat, lstm, mlp, fusion)."""
        groups: dict[str, list[tuple[str, nn.Parameter]]] = {}
        for name, param in self.named_parameters():
            group = PARAMETER_GROUPS[name.split(".", 1)[0]]
            groups.setdefault(group, []).append((name, param))
        return groups


def window_batch(values: NDArray[np.float64], ends: Sequence[int], window: int) -> torch.Tensor:
    """Stack the windows [t−w+1, t] of a (T, N, F) array for every end step t into (B, w, N, F).

    Raises:
        ValueError: If a window reaches before step 0 or past the last step
    """
    n_steps = values.shape[0]
    for t in ends:
        if not window - 1 <= t < n_steps:
            raise ValueError(f"Window ending at step {t} needs steps [{t - window + 1}, {t}] of {n_steps}")
    stacked = np.stack([values[t - window + 1:t + 1] for t in ends]) if len(ends) else np.empty(
        (0, window, *values.shape[1:])
    )
    return torch.from_numpy(np.ascontiguousarray(stacked, dtype=np.float64))
