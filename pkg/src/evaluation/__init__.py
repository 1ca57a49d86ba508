from evaluation.metrics import (
    DetectionDelays,
    Metrics,
    evaluate_alarms,
    f1_score,
    network_alarm,
    time_to_detection,
)
from evaluation.stats import BootstrapCI, StatisticsError, bootstrap_ci, cohens_d
from evaluation.baseline import ResidualThresholdBaseline, residual_statistic
from evaluation.inference import SeriesScores, detect, evaluate_model, evaluate_scores, score_series

__all__ = [
    "BootstrapCI",
    "DetectionDelays",
    "Metrics",
    "ResidualThresholdBaseline",
    "SeriesScores",
    "StatisticsError",
    "bootstrap_ci",
    "cohens_d",
    "detect",
    "evaluate_alarms",
    "evaluate_model",
    "evaluate_scores",
    "f1_score",
    "network_alarm",
    "residual_statistic",
    "score_series",
    "time_to_detection",
]
