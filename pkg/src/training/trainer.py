import copy
import logging
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
import torch

from evaluation.inference import evaluate_model
from gat_core import ModelConfig, PhysicsGat
from multiscale import Clustering, louvain
from network.graph import NetworkGraph
from physics_features.features import FeatureTensor
from training.config import TrainConfig
from training.gradients import check_finite_gradients, verify_gradients
from training.losses import LossBreakdown, WindowBatch, composite_loss
from training.optim import adam_step, cosine_anneal, make_optimizer
from utils.io import write_csv

logger = logging.getLogger(__name__)

HISTORY_COLUMNS = ("epoch", "bce", "physics", "consist", "total", "eta", "val_f1", "val_ttd")


@dataclass
class TrainResult:
    """Best-validation model and the per-epoch history.

    Attributes:
        model (PhysicsGat): Model holding the best-validation parameters
        history (pd.DataFrame): One row per epoch with HISTORY_COLUMNS
        best_epoch (int): Epoch whose parameters were restored
        best_f1 (float): Validation F1 of that epoch
    """
    model: PhysicsGat
    history: pd.DataFrame
    best_epoch: int
    best_f1: float


def window_samples(tensors: Sequence[FeatureTensor], window: int) -> list[tuple[int, int]]:
    """(tensor index, window end) of every full window."""
    return [(k, t) for k, tensor in enumerate(tensors) for t in range(window - 1, tensor.n_steps)]


def build_batch(tensors: Sequence[FeatureTensor], samples: Sequence[tuple[int, int]], window: int) -> WindowBatch:
    x = np.stack([tensors[k].values[t - window + 1:t + 1] for k, t in samples])
    labels = np.stack([tensors[k].labels[t] for k, t in samples])
    return WindowBatch(x=torch.from_numpy(x), labels=torch.from_numpy(labels))


def _check_node_order(tensors: Sequence[FeatureTensor], g: NetworkGraph) -> None:
    for k, tensor in enumerate(tensors):
        if tensor.node_ids != g.node_ids:
            raise ValueError(f"Feature tensor {k} does not follow the network's node order")


def _mean_breakdown(parts: list[tuple[int, LossBreakdown]]) -> dict[str, float]:
    total = sum(n for n, _ in parts)
    return {
        key: sum(n * getattr(b, key) for n, b in parts) / total
        for key in ("bce", "physics", "consist", "total")
    }


def train(
    train_sets: Sequence[FeatureTensor],
    val_sets: Sequence[FeatureTensor],
    g: NetworkGraph,
    model_config: ModelConfig,
    cfg: TrainConfig,
    clustering: Clustering | None = None,
    history_path: str | Path | None = None,
) -> TrainResult:
    """Train a model on windows of the training tensors, selecting by validation F1.

    Mini-batches of `cfg.batch_size` windows are drawn in a seeded shuffle every
    epoch. Validation runs every `cfg.validate_every` epochs and after the last
    one; training stops early after `cfg.patience` validations without a
    strictly better F1, and the best parameters are restored on return.

    Raises:
        ValueError: If there is no full training window or node orders differ
        GradientError: If a gradient turns non-finite or fails the finite-difference check
    """
    window = model_config.window
    samples = window_samples(train_sets, window)
    if not samples:
        raise ValueError(f"Training set holds no window of w={window} steps")
    _check_node_order(train_sets, g)
    if not val_sets:
        logger.warning("No validation series given; validating on the training series")
        val_sets = train_sets
    _check_node_order(val_sets, g)

    clustering = clustering or louvain(g, seed=model_config.seed)
    model = PhysicsGat(model_config, g, clustering)
    model.scaler.fit(np.concatenate([t.values for t in train_sets]))
    model.train()
    edge_endpoints = torch.from_numpy(g.edge_endpoints)
    rng = np.random.default_rng(cfg.seed)

    if cfg.grad_mode == "check":
        check_samples = [samples[k] for k in rng.permutation(len(samples))[:cfg.batch_size]]
        verify_gradients(model, build_batch(train_sets, check_samples, window), edge_endpoints, cfg, seed=cfg.seed)

    optimizer = make_optimizer(model.parameters(), cfg)
    rows: list[dict[str, float | int | None]] = []
    best_state = copy.deepcopy(model.state_dict())
    best_f1, best_epoch, stale = -1.0, -1, 0

    for epoch in range(cfg.epochs):
        eta = cosine_anneal(epoch, cfg)
        order = rng.permutation(len(samples))
        parts: list[tuple[int, LossBreakdown]] = []
        for start in range(0, len(order), cfg.batch_size):
            batch = build_batch(train_sets, [samples[k] for k in order[start:start + cfg.batch_size]], window)
            optimizer.zero_grad()
            total, breakdown = composite_loss(model(batch.x), batch, edge_endpoints, cfg)
            total.backward()
            check_finite_gradients(model)
            adam_step(optimizer, eta)
            parts.append((batch.size, breakdown))

        row: dict[str, float | int | None] = {"epoch": epoch, **_mean_breakdown(parts), "eta": eta}
        row["val_f1"] = row["val_ttd"] = None
        if (epoch + 1) % cfg.validate_every == 0 or epoch == cfg.epochs - 1:
            metrics = evaluate_model(model, val_sets, cfg.tau, cfg.sustain_k)
            model.train()
            row["val_f1"], row["val_ttd"] = metrics.f1, metrics.ttd_hours
            if metrics.f1 > best_f1:
                best_f1, best_epoch, stale = metrics.f1, epoch, 0
                best_state = copy.deepcopy(model.state_dict())
            else:
                stale += 1
            logger.info(
                "Epoch %d: loss=%.4f val_f1=%.3f val_ttd=%s", epoch, row["total"], metrics.f1, metrics.ttd_hours
            )
        else:
            logger.debug("Epoch %d: loss=%.4f", epoch, row["total"])
        rows.append(row)
        if stale >= cfg.patience:
            logger.info("Early stop after epoch %d: no F1 improvement in %d validations", epoch, stale)
            break

    model.load_state_dict(best_state)
    model.eval()
    history = pd.DataFrame(rows, columns=list(HISTORY_COLUMNS))
    if history_path is not None:
        write_csv(history_path, history, index=False)
    logger.info("Training done: best epoch %d, validation F1 %.3f", best_epoch, best_f1)
    return TrainResult(model=model, history=history, best_epoch=best_epoch, best_f1=best_f1)
