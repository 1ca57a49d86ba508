from dataclasses import dataclass, field
from typing import Any


@dataclass
class ValidationResult:
    """Result of a file validation operation.

    Attributes:
        success (bool): True if validation passed, False otherwise
        message (str): Human-readable message describing the result
        errors (list[str] | None): List of validation error messages
                                   if validation failed, None otherwise
    """
    success: bool
    message: str
    errors: list[str] | None = None


@dataclass
class Provenance:
    """Traceability block embedded in every artifact.

    Attributes:
        config_hash (str): SHA-256 of the canonical run configuration
        seed (int): Seed the artifact was produced with
        version (str): Tool version that produced the artifact
    """
    config_hash: str
    seed: int
    version: str

    def to_dict(self) -> dict[str, Any]:
        return {"config_hash": self.config_hash, "seed": self.seed, "version": self.version}


@dataclass
class Report:
    """Evaluation report written by `evaluate`, `sweep` and `explain`.

    Attributes:
        metrics (dict): Detection metrics of the evaluated model
        ci (dict | None): Bootstrap confidence interval of the F1-score
        sweep_points (list[dict]): One entry per sweep setting
        cohens_d (float | None): Effect size against the reference point
        spearman_rho (float | None): Attention/hydraulic-path rank correlation
        ig_shares (dict[str, float] | None): Attribution share per feature group
        provenance (Provenance | None): Config hash, seed and version
    """
    metrics: dict[str, Any]
    ci: dict[str, Any] | None = None
    sweep_points: list[dict[str, Any]] = field(default_factory=list)
    cohens_d: float | None = None
    spearman_rho: float | None = None
    ig_shares: dict[str, float] | None = None
    provenance: Provenance | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "metrics": self.metrics,
            "ci": self.ci,
            "sweep_points": self.sweep_points,
            "cohens_d": self.cohens_d,
            "spearman_rho": self.spearman_rho,
            "ig_shares": self.ig_shares,
            "provenance": self.provenance.to_dict() if self.provenance else None,
        }
