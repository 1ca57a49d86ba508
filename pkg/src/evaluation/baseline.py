import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from evaluation.metrics import DEFAULT_SUSTAIN, Metrics, evaluate_alarms, time_to_detection
from physics_features.features import FeatureTensor

logger = logging.getLogger(__name__)

DEFAULT_FALSE_ALARM_RATE = 0.01


def residual_statistic(tensor: FeatureTensor) -> NDArray[np.float64]:
    """(T,) largest raw conservation residual per step, the same under every feature toggle.

    Raises:
        ValueError: If the tensor was not assembled from a recorded series
    """
    if tensor.raw_residual is None:
        raise ValueError("Feature tensor carries no raw residuals; assemble it from a recorded series")
    return np.asarray(tensor.raw_residual, dtype=float)


@dataclass
class ResidualThresholdBaseline:
    """Hard-threshold detector: alarm while the largest residual exceeds τ_b.

    Attributes:
        threshold (float): Calibrated alarm threshold τ_b
        false_alarm_rate (float): Share of clean calibration steps allowed above τ_b
    """
    threshold: float
    false_alarm_rate: float = DEFAULT_FALSE_ALARM_RATE

    @classmethod
    def calibrate(
        cls, tensors: Sequence[FeatureTensor], false_alarm_rate: float = DEFAULT_FALSE_ALARM_RATE
    ) -> "ResidualThresholdBaseline":
        """Set τ_b to the (1 − rate) quantile of the statistic over attack-free steps."""
        if not 0.0 < false_alarm_rate < 1.0:
            raise ValueError(f"False-alarm rate must lie in (0, 1), got {false_alarm_rate}")
        clean = [residual_statistic(t)[t.network_labels == 0] for t in tensors]
        values = np.concatenate(clean) if clean else np.empty(0)
        if values.size == 0:
            raise ValueError("No attack-free steps to calibrate the residual threshold on")
        threshold = float(np.quantile(values, 1.0 - false_alarm_rate))
        logger.info("Residual baseline calibrated: tau_b=%.4g on %d clean steps", threshold, values.size)
        return cls(threshold=threshold, false_alarm_rate=false_alarm_rate)

    def alarms(self, tensor: FeatureTensor) -> NDArray[np.int64]:
        return (residual_statistic(tensor) > self.threshold).astype(np.int64)

    def evaluate(self, tensors: Sequence[FeatureTensor], sustain_k: int = DEFAULT_SUSTAIN) -> Metrics:
        alarms, truth, delays = [], [], None
        for tensor in tensors:
            series_alarms = self.alarms(tensor)
            onsets = [a.start for a in tensor.attack_log if a.duration > 0]
            found = time_to_detection(series_alarms, onsets, sustain_k)
            delays = found if delays is None else delays + found
            alarms.append(series_alarms)
            truth.append(tensor.network_labels)
        if delays is None:
            raise ValueError("No feature tensors to evaluate the baseline on")
        return evaluate_alarms(np.concatenate(alarms), np.concatenate(truth), delays, self.threshold, sustain_k)
