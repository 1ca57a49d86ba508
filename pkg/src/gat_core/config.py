from dataclasses import asdict, dataclass, fields
from typing import Any, Literal

AttentionMode = Literal["learned", "uniform"]
TemporalMode = Literal["bilstm", "mean"]
FusionMode = Literal["adaptive", "micro", "equal", "micro_meso", "micro_macro"]

ATTENTION_MODES: tuple[str, ...] = ("learned", "uniform")
TEMPORAL_MODES: tuple[str, ...] = ("bilstm", "mean")
FUSION_MODES: tuple[str, ...] = ("adaptive", "micro", "equal", "micro_meso", "micro_macro")


@dataclass(frozen=True)
class ModelConfig:
    """Shape and variant switches of the detector.

    Attributes:
        in_features (int): Features per node and step F
        hidden (int): GAT embedding size d
        heads (int): Attention heads K per layer (averaged, not concatenated)
        layers (int): Number of stacked GAT layers L
        lstm_hidden (int): Hidden size h of each LSTM direction
        mlp_hidden (int): Hidden width of the micro-score MLP
        pool_dim (int): Width of the cluster attention-pooling projection
        window (int): Input window w in steps
        leaky_slope (float): Negative slope of the attention LeakyReLU
        attention (str): "learned" or "uniform" (GCN-style 1/(deg+1) weights)
        temporal (str): "bilstm" or "mean" (temporal mean pooling)
        fusion (str): "adaptive" softmax fusion or a fixed scale mix
        seed (int): Seed of the parameter initialization
    """
    in_features: int = 8
    hidden: int = 16
    heads: int = 8
    layers: int = 3
    lstm_hidden: int = 16
    mlp_hidden: int = 64
    pool_dim: int = 16
    window: int = 24
    leaky_slope: float = 0.2
    attention: AttentionMode = "learned"
    temporal: TemporalMode = "bilstm"
    fusion: FusionMode = "adaptive"
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("in_features", "hidden", "heads", "layers", "lstm_hidden", "mlp_hidden", "pool_dim", "window"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ValueError(f"Model setting '{name}' must be a positive integer, got {value!r}")
        if not self.leaky_slope >= 0:
            raise ValueError(f"leaky_slope must be non-negative, got {self.leaky_slope}")
        for name, allowed in (("attention", ATTENTION_MODES), ("temporal", TEMPORAL_MODES),
                              ("fusion", FUSION_MODES)):
            if getattr(self, name) not in allowed:
                raise ValueError(f"Unknown {name} mode '{getattr(self, name)}'. Use one of {', '.join(allowed)}.")

    @property
    def fused_dim(self) -> int:
        """Size of the per-node temporal summary fed to the micro head and pooling."""
        return 2 * self.lstm_hidden if self.temporal == "bilstm" else self.hidden

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ValueError(f"Unknown model setting(s): {', '.join(unknown)}")
        return cls(**raw)
