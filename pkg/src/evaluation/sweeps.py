"""Robustness sweeps and the ablation harness.

Every sweep scores the same test series under one changed setting and compares
each point with a reference point (the unperturbed setting, or the full model
for ablations) by F1 drop and by Cohen's d over per-series F1-scores.
"""
import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field, replace
from typing import Any, Literal

import numpy as np

from evaluation.baseline import ResidualThresholdBaseline
from evaluation.benchmark import BenchmarkSplit
from evaluation.inference import SeriesScores, evaluate_scores, score_series
from evaluation.metrics import DEFAULT_SUSTAIN, DEFAULT_TAU, Metrics, f1_score, network_alarm
from evaluation.stats import DEFAULT_RESAMPLES, BootstrapCI, StatisticsError, bootstrap_ci, cohens_d
from gat_core import ModelConfig, PhysicsGat
from hydrosim import ScadaSeries, mask_sensors
from network.graph import NetworkGraph
from physics_features.features import FeatureSettings, FeatureTensor, FeatureToggles
from training import TrainConfig, train

logger = logging.getLogger(__name__)

SweepAxis = Literal["roughness_delta", "outage_fraction", "demand_error", "ablation_flag"]

ROUGHNESS_DELTAS = (-0.15, -0.10, -0.05, 0.0, 0.05, 0.10, 0.15)
OUTAGE_FRACTIONS = (0.0, 0.05, 0.10)
DEMAND_ERRORS = (-0.20, -0.10, 0.0, 0.10, 0.20)
OUTAGE_SEEDS = 5


@dataclass(frozen=True)
class AblationVariant:
    """Changes a variant applies to the full configuration.

    Attributes:
        disable (tuple[str, ...]): Feature ablation flags (see FeatureToggles.from_ablation)
        model (dict): ModelConfig overrides
        train (dict): TrainConfig overrides
    """
    disable: tuple[str, ...] = ()
    model: dict[str, Any] = field(default_factory=dict)
    train: dict[str, Any] = field(default_factory=dict)


ABLATION_VARIANTS: dict[str, AblationVariant] = {
    "full": AblationVariant(),
    "no_phi_mass": AblationVariant(disable=("phi_mass",)),
    "no_phi_energy": AblationVariant(disable=("phi_energy",)),
    "no_phi": AblationVariant(disable=("phi",)),
    "no_normalization": AblationVariant(disable=("normalization",)),
    "gcn": AblationVariant(model={"attention": "uniform"}),
    "no_bilstm": AblationVariant(model={"temporal": "mean"}),
    "micro_only": AblationVariant(model={"fusion": "micro"}),
    "equal_fusion": AblationVariant(model={"fusion": "equal"}),
    "micro_meso": AblationVariant(model={"fusion": "micro_meso"}),
    "micro_macro": AblationVariant(model={"fusion": "micro_macro"}),
    "no_physics_loss": AblationVariant(train={"lambda_p": 0.0}),
}


@dataclass
class SweepPoint:
    """Evaluation at one sweep setting.

    Attributes:
        setting (float | str): Perturbation level or ablation variant name
        metrics (Metrics): Model metrics pooled over every scored series
        ci (BootstrapCI | None): Bootstrap interval of the pooled F1
        series_f1 (list[float]): F1 of every scored series, the Cohen's d samples
        cohens_d (float | None): Effect size against the reference point
        comparator (Metrics | None): Residual-threshold baseline, or the zero-fill variant for outages
    """
    setting: float | str
    metrics: Metrics
    ci: BootstrapCI | None = None
    series_f1: list[float] = field(default_factory=list)
    cohens_d: float | None = None
    comparator: Metrics | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "setting": self.setting,
            "metrics": self.metrics.to_dict(),
            "ci": self.ci.to_dict() if self.ci else None,
            "series_f1": self.series_f1,
            "cohens_d": self.cohens_d,
            "comparator": self.comparator.to_dict() if self.comparator else None,
        }


@dataclass
class SweepResult:
    """All points of one sweep axis, sorted by setting."""
    axis: SweepAxis
    reference: float | str
    points: list[SweepPoint] = field(default_factory=list)
    spearman_rho: float | None = None

    @property
    def settings(self) -> list[float | str]:
        return [p.setting for p in self.points]

    def point(self, setting: float | str) -> SweepPoint:
        for p in self.points:
            if p.setting == setting:
                return p
        raise KeyError(f"No sweep point at setting {setting!r}")

    def f1_drop(self, setting: float | str) -> float:
        return self.point(self.reference).metrics.f1 - self.point(setting).metrics.f1

    def comparator_drop(self, setting: float | str) -> float | None:
        ref, pt = self.point(self.reference).comparator, self.point(setting).comparator
        if ref is None or pt is None:
            return None
        return ref.f1 - pt.f1

    @property
    def cohens_d(self) -> float | None:
        """Largest degradation effect (most negative d) over the non-reference points."""
        found = [p.cohens_d for p in self.points if p.setting != self.reference and p.cohens_d is not None]
        return min(found) if found else None

    def to_dict(self) -> dict[str, Any]:
        return {
            "axis": self.axis,
            "reference": self.reference,
            "points": [p.to_dict() for p in self.points],
            "cohens_d": self.cohens_d,
            "spearman_rho": self.spearman_rho,
        }


def f1_interval(
    scored: Sequence[SeriesScores],
    tau: float = DEFAULT_TAU,
    n_resamples: int = DEFAULT_RESAMPLES,
    seed: int = 0,
) -> BootstrapCI:
    """Bootstrap the pooled timestep F1; resamples without a positive step are skipped."""
    alarms = np.concatenate([network_alarm(s.final, tau)[s.first_scored:] for s in scored])
    truth = np.concatenate([s.labels.max(axis=1)[s.first_scored:] for s in scored])

    def metric(idx: np.ndarray) -> float | None:
        if not truth[idx].any():
            return None
        return f1_score(alarms[idx], truth[idx]).f1

    return bootstrap_ci(metric, alarms.size, n_resamples=n_resamples, seed=seed)


def evaluate_point(
    setting: float | str,
    scored: Sequence[SeriesScores],
    tau: float = DEFAULT_TAU,
    sustain_k: int = DEFAULT_SUSTAIN,
    n_resamples: int = DEFAULT_RESAMPLES,
    seed: int = 0,
    comparator: Metrics | None = None,
) -> SweepPoint:
    ci = None
    try:
        ci = f1_interval(scored, tau, n_resamples, seed) if n_resamples else None
    except StatisticsError as e:
        logger.warning("No confidence interval at setting %s: %s", setting, e)
    return SweepPoint(
        setting=setting,
        metrics=evaluate_scores(scored, tau, sustain_k),
        ci=ci,
        series_f1=[evaluate_scores([s], tau, sustain_k).f1 for s in scored],
        comparator=comparator,
    )


def _attach_effect_sizes(result: SweepResult) -> SweepResult:
    ref = result.point(result.reference)
    for p in result.points:
        try:
            p.cohens_d = cohens_d(p.series_f1, ref.series_f1)
        except StatisticsError as e:
            logger.debug("Cohen's d undefined at setting %s: %s", p.setting, e)
            p.cohens_d = None
    result.points.sort(key=lambda p: p.setting)
    return result


def _perturbation_sweep(
    axis: SweepAxis,
    levels: Sequence[float],
    tensors_at: Callable[[float], list[FeatureTensor]],
    model: PhysicsGat,
    baseline: ResidualThresholdBaseline | None,
    tau: float,
    sustain_k: int,
    n_resamples: int,
    seed: int,
) -> SweepResult:
    levels = sorted(set(levels))
    if 0.0 not in levels:
        raise ValueError(f"Sweep levels must include the unperturbed setting 0, got {levels}")
    result = SweepResult(axis=axis, reference=0.0)
    for level in levels:
        tensors = tensors_at(level)
        comparator = baseline.evaluate(tensors, sustain_k) if baseline else None
        point = evaluate_point(
            level, [score_series(model, t) for t in tensors], tau, sustain_k, n_resamples, seed, comparator
        )
        logger.info("%s=%+.2f: F1=%.3f", axis, level, point.metrics.f1)
        result.points.append(point)
    return _attach_effect_sizes(result)


def roughness_sweep(
    model: PhysicsGat,
    series: Sequence[ScadaSeries],
    g: NetworkGraph,
    settings: FeatureSettings,
    deltas: Sequence[float] = ROUGHNESS_DELTAS,
    baseline: ResidualThresholdBaseline | None = None,
    tau: float = DEFAULT_TAU,
    sustain_k: int = DEFAULT_SUSTAIN,
    n_resamples: int = DEFAULT_RESAMPLES,
    seed: int = 0,
) -> SweepResult:
    """Recompute features with every C_ij scaled by (1 + δ); the recorded data stay unchanged."""
    return _perturbation_sweep(
        "roughness_delta",
        deltas,
        lambda delta: [settings.assemble(s, g, roughness_delta=delta) for s in series],
        model, baseline, tau, sustain_k, n_resamples, seed,
    )


def demand_sweep(
    model: PhysicsGat,
    series: Sequence[ScadaSeries],
    g: NetworkGraph,
    settings: FeatureSettings,
    errors: Sequence[float] = DEMAND_ERRORS,
    baseline: ResidualThresholdBaseline | None = None,
    tau: float = DEFAULT_TAU,
    sustain_k: int = DEFAULT_SUSTAIN,
    n_resamples: int = DEFAULT_RESAMPLES,
    seed: int = 0,
) -> SweepResult:
    """Recompute features with the demand estimate scaled by (1 + error)."""
    return _perturbation_sweep(
        "demand_error",
        errors,
        lambda error: [settings.assemble(s, g, demand_error=error) for s in series],
        model, baseline, tau, sustain_k, n_resamples, seed,
    )


def outage_sweep(
    model: PhysicsGat,
    series: Sequence[ScadaSeries],
    g: NetworkGraph,
    settings: FeatureSettings,
    fractions: Sequence[float] = OUTAGE_FRACTIONS,
    n_seeds: int = OUTAGE_SEEDS,
    tau: float = DEFAULT_TAU,
    sustain_k: int = DEFAULT_SUSTAIN,
    n_resamples: int = DEFAULT_RESAMPLES,
    seed: int = 0,
) -> SweepResult:
    """Mask a fraction of pressure sensors under `n_seeds` masks and re-run interpolation and inference.

    The comparator of every point is the same model fed zero-filled instead of
    interpolated features for the unmeasured nodes.
    """
    fractions = sorted(set(fractions))
    if 0.0 not in fractions:
        raise ValueError(f"Outage fractions must include 0, got {fractions}")
    zero_fill = replace(settings, toggles=replace(settings.toggles, interpolation=False))
    result = SweepResult(axis="outage_fraction", reference=0.0)
    for fraction in fractions:
        masked = [mask_sensors(s, fraction, seed + k) for k in range(n_seeds) for s in series]
        scored = [score_series(model, settings.assemble(s, g)) for s in masked]
        zero_scored = [score_series(model, zero_fill.assemble(s, g)) for s in masked]
        point = evaluate_point(
            fraction, scored, tau, sustain_k, n_resamples, seed, evaluate_scores(zero_scored, tau, sustain_k)
        )
        logger.info("outage_fraction=%.2f: F1=%.3f (zero-fill %.3f)", fraction, point.metrics.f1,
                    point.comparator.f1 if point.comparator else float("nan"))
        result.points.append(point)
    return _attach_effect_sizes(result)


def disable_features(toggles: FeatureToggles, flags: Sequence[str]) -> FeatureToggles:
    off = FeatureToggles.from_ablation(flags)
    return FeatureToggles(**{name: getattr(toggles, name) and getattr(off, name) for name in toggles.to_dict()})


def ablation_run(
    split: BenchmarkSplit,
    settings: FeatureSettings,
    model_config: ModelConfig,
    train_cfg: TrainConfig,
    variants: Sequence[str] | None = None,
    n_resamples: int = DEFAULT_RESAMPLES,
    seed: int = 0,
) -> SweepResult:
    """Retrain every variant from the same seed and evaluate it on the test series.

    Raises:
        ValueError: If a variant name is unknown
    """
    names = sorted(set(variants or ABLATION_VARIANTS) | {"full"})
    unknown = [n for n in names if n not in ABLATION_VARIANTS]
    if unknown:
        raise ValueError(f"Unknown ablation variant(s): {', '.join(unknown)}. Use {', '.join(ABLATION_VARIANTS)}.")
    result = SweepResult(axis="ablation_flag", reference="full")
    for name in names:
        variant = ABLATION_VARIANTS[name]
        variant_settings = replace(settings, toggles=disable_features(settings.toggles, variant.disable))
        variant_model = ModelConfig.from_dict({**model_config.to_dict(), **variant.model})
        variant_train = TrainConfig.from_dict({**train_cfg.to_dict(), **variant.train})
        trained = train(
            split.features("train", variant_settings),
            split.features("val", variant_settings),
            split.g,
            variant_model,
            variant_train,
        )
        scored = [score_series(trained.model, t) for t in split.features("test", variant_settings)]
        point = evaluate_point(name, scored, train_cfg.tau, train_cfg.sustain_k, n_resamples, seed)
        logger.info("ablation %s: F1=%.3f", name, point.metrics.f1)
        result.points.append(point)
    return _attach_effect_sizes(result)
