from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numpy.typing import NDArray
from sklearn.metrics import precision_recall_fscore_support

DEFAULT_TAU = 0.5
DEFAULT_SUSTAIN = 2


@dataclass
class Metrics:
    """Network-level detection metrics.

    Attributes:
        f1 (float): F1-score over timesteps (0 when there is no true positive)
        precision (float): Precision over timesteps
        recall (float): Recall over timesteps
        ttd_hours (float | None): Mean time-to-detection of the detected attacks
        detected (int): Attacks with a sustained alarm after onset
        undetected (int): Attacks never detected
        tau (float): Alarm threshold on the fused scores
        sustain_k (int): Consecutive alarms counted as a detection
        n_steps (int): Scored timesteps
    """
    f1: float
    precision: float
    recall: float
    ttd_hours: float | None = None
    detected: int = 0
    undetected: int = 0
    tau: float = DEFAULT_TAU
    sustain_k: int = DEFAULT_SUSTAIN
    n_steps: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "f1": self.f1,
            "precision": self.precision,
            "recall": self.recall,
            "ttd_hours": self.ttd_hours,
            "detected": self.detected,
            "undetected": self.undetected,
            "tau": self.tau,
            "sustain_k": self.sustain_k,
            "n_steps": self.n_steps,
        }


@dataclass
class DetectionDelays:
    """Per-attack detection delays in hours; None marks an undetected attack."""
    delays: list[float | None] = field(default_factory=list)

    @property
    def detected(self) -> int:
        return sum(d is not None for d in self.delays)

    @property
    def undetected(self) -> int:
        return len(self.delays) - self.detected

    @property
    def mean_hours(self) -> float | None:
        found = [d for d in self.delays if d is not None]
        return float(np.mean(found)) if found else None

    def __add__(self, other: "DetectionDelays") -> "DetectionDelays":
        return DetectionDelays(self.delays + other.delays)


def network_alarm(final: NDArray[np.float64], tau: float = DEFAULT_TAU) -> NDArray[np.int64]:
    """alarm_t = 1 iff max_i final_t(v_i) > τ; rows without scores (NaN) never alarm."""
    final = np.asarray(final, dtype=float)
    peak = np.where(np.isnan(final), -np.inf, final).max(axis=1)
    return (peak > tau).astype(np.int64)


def f1_score(pred: Sequence[int] | NDArray[np.int64], truth: Sequence[int] | NDArray[np.int64]) -> Metrics:
    """Precision, recall and F1 of a binary alarm series against the ground truth."""
    pred = np.asarray(pred, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if pred.shape != truth.shape:
        raise ValueError(f"Prediction and truth lengths differ: {pred.shape} vs {truth.shape}")
    precision, recall, f1, _ = precision_recall_fscore_support(
        truth, pred, average="binary", pos_label=1, zero_division=0
    )
    return Metrics(f1=float(f1), precision=float(precision), recall=float(recall), n_steps=int(pred.size))


def time_to_detection(
    alarms: Sequence[int] | NDArray[np.int64],
    attack_onsets: Sequence[int],
    sustain_k: int = DEFAULT_SUSTAIN,
    step_hours: float = 1.0,
) -> DetectionDelays:
    """Hours from each onset to the first run of `sustain_k` consecutive alarms.

    A run must start at or after the onset and before the next onset (or the
    end of the series); attacks without such a run are undetected.
    """
    alarms = np.asarray(alarms, dtype=np.int64)
    n_steps = alarms.size
    onsets = sorted(int(t) for t in attack_onsets)
    for t in onsets:
        if not 0 <= t < n_steps:
            raise ValueError(f"Attack onset {t} outside the series of {n_steps} steps")
    if n_steps >= sustain_k:
        runs = np.lib.stride_tricks.sliding_window_view(alarms, sustain_k).all(axis=1)
    else:
        runs = np.zeros(0, dtype=bool)

    delays: list[float | None] = []
    for k, onset in enumerate(onsets):
        limit = min(onsets[k + 1] if k + 1 < len(onsets) else n_steps, runs.size)
        hits = np.flatnonzero(runs[onset:limit]) if onset < limit else np.empty(0, dtype=np.int64)
        delays.append(float(hits[0]) * step_hours if hits.size else None)
    return DetectionDelays(delays)


def evaluate_alarms(
    alarms: NDArray[np.int64],
    truth: NDArray[np.int64],
    delays: DetectionDelays,
    tau: float = DEFAULT_TAU,
    sustain_k: int = DEFAULT_SUSTAIN,
) -> Metrics:
    """Combine timestep F1 on the raw alarms with the sustained-alarm detection delays."""
    metrics = f1_score(alarms, truth)
    metrics.ttd_hours = delays.mean_hours
    metrics.detected = delays.detected
    metrics.undetected = delays.undetected
    metrics.tau = tau
    metrics.sustain_k = sustain_k
    return metrics
