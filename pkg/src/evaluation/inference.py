"""Sliding-window inference over a whole feature series."""
import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import pandas as pd
import torch
from numpy.typing import NDArray

from evaluation.metrics import (
    DEFAULT_SUSTAIN,
    DEFAULT_TAU,
    DetectionDelays,
    Metrics,
    evaluate_alarms,
    network_alarm,
    time_to_detection,
)
from gat_core import PhysicsGat, window_batch
from physics_features.features import FeatureTensor

logger = logging.getLogger(__name__)

DEFAULT_INFERENCE_BATCH = 256


@dataclass
class SeriesScores:
    """Scores of every step of one series; steps before w−1 hold NaN.

    Attributes:
        node_ids (tuple[str, ...]): Node order of the node axes
        times (pd.DatetimeIndex): Step timestamps
        micro (NDArray): (T, N) node scores
        meso (NDArray): (T, C) cluster scores
        macro (NDArray): (T,) network scores
        lam (NDArray): (T, 3) fusion weights
        final (NDArray): (T, N) fused scores
        attention (NDArray): (T, K, P) last-layer attention of the window's last frame
        assignment (NDArray): (N,) cluster of every node
        labels (NDArray): (T, N) ground-truth labels
        onsets (list[int]): Attack onsets of the series
        first_scored (int): First step with a full window (w − 1)
    """
    node_ids: tuple[str, ...]
    times: pd.DatetimeIndex
    micro: NDArray[np.float64]
    meso: NDArray[np.float64]
    macro: NDArray[np.float64]
    lam: NDArray[np.float64]
    final: NDArray[np.float64]
    attention: NDArray[np.float64]
    assignment: NDArray[np.int64]
    labels: NDArray[np.int64]
    onsets: list[int]
    first_scored: int

    @property
    def n_steps(self) -> int:
        return int(self.final.shape[0])

    @property
    def step_hours(self) -> float:
        if len(self.times) < 2:
            return 1.0
        return (self.times[1] - self.times[0]).total_seconds() / 3600.0

    def to_frame(self) -> pd.DataFrame:
        """Plot-ready long form: one row per (time, node)."""
        n_steps, n_nodes = self.final.shape
        frame = pd.DataFrame({
            "time": np.repeat(self.times.strftime("%Y-%m-%dT%H:%M:%S").to_numpy(), n_nodes),
            "node": np.tile(np.array(self.node_ids, dtype=object), n_steps),
            "micro": self.micro.reshape(-1),
            "meso_of_cluster": self.meso[:, self.assignment].reshape(-1),
            "macro": np.repeat(self.macro, n_nodes),
            "final": self.final.reshape(-1),
        })
        for k in range(3):
            frame[f"lambda{k + 1}"] = np.repeat(self.lam[:, k], n_nodes)
        frame["label"] = self.labels.reshape(-1)
        return frame


def attack_onsets(tensor: FeatureTensor) -> list[int]:
    return [a.start for a in tensor.attack_log if a.duration > 0]


def score_series(
    model: PhysicsGat, tensor: FeatureTensor, batch_size: int = DEFAULT_INFERENCE_BATCH
) -> SeriesScores:
    """Score every step t ≥ w−1 of a series from the window [t−w+1, t].

    Raises:
        ValueError: If the tensor's node order differs from the model's network
                    or the series is shorter than the window
    """
    if tensor.node_ids != model.graph.node_ids:
        raise ValueError("Feature tensor node order does not match the model's network")
    window = model.config.window
    if tensor.n_steps < window:
        raise ValueError(f"Series has {tensor.n_steps} steps, fewer than the model window w={window}")

    n_steps, n_nodes = tensor.n_steps, len(tensor.node_ids)
    n_clusters = model.fusion.n_clusters
    micro = np.full((n_steps, n_nodes), np.nan)
    final = np.full((n_steps, n_nodes), np.nan)
    meso = np.full((n_steps, n_clusters), np.nan)
    macro = np.full(n_steps, np.nan)
    lam = np.full((n_steps, 3), np.nan)
    attention = np.full((n_steps, model.config.heads, model.targets.numel()), np.nan)

    was_training = model.training
    model.eval()
    ends = list(range(window - 1, n_steps))
    with torch.no_grad():
        for start in range(0, len(ends), batch_size):
            chunk = ends[start:start + batch_size]
            out = model(window_batch(tensor.values, chunk, window))
            rows = np.asarray(chunk)
            micro[rows] = out.scores.micro.numpy()
            final[rows] = out.scores.final.numpy()
            meso[rows] = out.scores.meso.numpy()
            macro[rows] = out.scores.macro.numpy()
            lam[rows] = out.scores.lam.numpy()
            attention[rows] = out.attention[:, -1].numpy()
    model.train(was_training)

    return SeriesScores(
        node_ids=tensor.node_ids,
        times=tensor.times,
        micro=micro,
        meso=meso,
        macro=macro,
        lam=lam,
        final=final,
        attention=attention,
        assignment=model.fusion.assignment.numpy().copy(),
        labels=tensor.labels,
        onsets=attack_onsets(tensor),
        first_scored=window - 1,
    )


def detect(scores: SeriesScores, tau: float = DEFAULT_TAU) -> NDArray[np.int64]:
    """(T,) network alarms of a scored series."""
    return network_alarm(scores.final, tau)


def evaluate_scores(
    scored: Sequence[SeriesScores], tau: float = DEFAULT_TAU, sustain_k: int = DEFAULT_SUSTAIN
) -> Metrics:
    """F1 over the scored steps of every series, TTD pooled over every attack."""
    if not scored:
        raise ValueError("No scored series to evaluate")
    alarms, truth = [], []
    delays = DetectionDelays()
    for scores in scored:
        series_alarms = detect(scores, tau)
        delays = delays + time_to_detection(series_alarms, scores.onsets, sustain_k, scores.step_hours)
        alarms.append(series_alarms[scores.first_scored:])
        truth.append(scores.labels.max(axis=1)[scores.first_scored:])
    return evaluate_alarms(np.concatenate(alarms), np.concatenate(truth), delays, tau, sustain_k)


def evaluate_model(
    model: PhysicsGat,
    tensors: Sequence[FeatureTensor],
    tau: float = DEFAULT_TAU,
    sustain_k: int = DEFAULT_SUSTAIN,
) -> Metrics:
    return evaluate_scores([score_series(model, t) for t in tensors], tau, sustain_k)
