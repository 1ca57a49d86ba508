from dataclasses import asdict, dataclass, fields
from typing import Any, Literal

GradMode = Literal["analytic", "check"]


@dataclass(frozen=True)
class TrainConfig:
    """Optimization, loss weighting, validation and alarm settings.

    Attributes:
        eta0 (float): Initial learning rate η_0
        batch_size (int): Window samples per mini-batch B
        epochs (int): Maximum number of epochs E
        eta_min (float): Floor of the cosine schedule
        validate_every (int): Validate every this many epochs
        patience (int): Validations without F1 improvement before stopping early
        lambda_p (float): Weight of the physics loss
        lambda_c (float): Weight of the spatial consistency loss
        tau (float): Network alarm threshold on the fused scores
        sustain_k (int): Consecutive alarms that count as a detection
        seed (int): Seed of the mini-batch shuffling
        grad_mode (str): "check" verifies gradients by finite differences before training
        adam_beta1 (float): Adam first-moment decay
        adam_beta2 (float): Adam second-moment decay
        adam_eps (float): Adam denominator guard
        fd_step (float): Central finite-difference step
        fd_tolerance (float): Largest accepted relative gradient error
    """
    eta0: float = 1e-3
    batch_size: int = 32
    epochs: int = 30
    eta_min: float = 1e-5
    validate_every: int = 5
    patience: int = 2
    lambda_p: float = 0.1
    lambda_c: float = 0.05
    tau: float = 0.5
    sustain_k: int = 2
    seed: int = 0
    grad_mode: GradMode = "analytic"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    fd_step: float = 1e-4
    fd_tolerance: float = 1e-4

    def __post_init__(self) -> None:
        if not self.eta0 > self.eta_min > 0:
            raise ValueError(f"Learning rates must satisfy eta0 > eta_min > 0, got {self.eta0} and {self.eta_min}")
        for name in ("batch_size", "epochs", "validate_every", "patience", "sustain_k"):
            if getattr(self, name) < 1:
                raise ValueError(f"Training setting '{name}' must be at least 1, got {getattr(self, name)}")
        if self.lambda_p < 0 or self.lambda_c < 0:
            raise ValueError("Loss weights lambda_p and lambda_c must be non-negative")
        if not 0.0 < self.tau < 1.0:
            raise ValueError(f"Alarm threshold tau must lie in (0, 1), got {self.tau}")
        if self.grad_mode not in ("analytic", "check"):
            raise ValueError(f"Unknown grad_mode '{self.grad_mode}'. Use 'analytic' or 'check'.")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ValueError(f"Unknown training setting(s): {', '.join(unknown)}")
        return cls(**raw)
