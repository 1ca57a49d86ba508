"""Attention-path agreement, integrated-gradient attribution and per-attack explanation files."""
import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import networkx as nx
import numpy as np
import pandas as pd
import torch
from numpy.typing import NDArray
from scipy.stats import spearmanr

from evaluation.inference import SeriesScores, score_series
from evaluation.stats import StatisticsError
from gat_core import PhysicsGat
from hydrosim.series import AttackSpec
from network.graph import NetworkGraph
from physics_features.features import FEATURE_GROUPS, FEATURE_LAYOUT, FeatureTensor, dominant_violation
from utils.io import write_csv

logger = logging.getLogger(__name__)

DEFAULT_IG_STEPS = 50
DEFAULT_IG_SAMPLES = 24
IG_CHUNK = 64


@dataclass
class Explanation:
    """Explanation of one attack.

    Attributes:
        attack (AttackSpec): Explained attack
        attention (pd.DataFrame): Mean last-layer attention and path proximity per edge
        attribution (pd.DataFrame): Integrated-gradient attribution per feature
        shares (dict[str, float]): Attribution share per feature group in percent
        spearman_rho (float | None): Attention/path rank correlation of this attack
        files (list[Path]): CSV files written
    """
    attack: AttackSpec
    attention: pd.DataFrame
    attribution: pd.DataFrame
    shares: dict[str, float]
    spearman_rho: float | None
    files: list[Path] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "attack": self.attack.to_dict(),
            "ig_shares": self.shares,
            "spearman_rho": self.spearman_rho,
            "files": [str(f) for f in self.files],
        }


def attack_source(g: NetworkGraph, attack: AttackSpec) -> str:
    """Node an attack originates at: the target node, or the upstream end of a target edge."""
    return attack.target if attack.target in g.node_index else g.edge(attack.target).from_node


def attention_edge_frame(scores: SeriesScores, g: NetworkGraph, steps: Sequence[int]) -> pd.DataFrame:
    """Per edge: attention averaged over heads, both directions and `steps`.

    Self-attention and steps without scores are ignored.
    """
    targets, sources = g.attention_pairs
    rows = [t for t in steps if scores.first_scored <= t < scores.n_steps]
    if not rows:
        raise ValueError(f"No scored step among {list(steps)[:3]}...; scoring starts at t={scores.first_scored}")
    per_pair = scores.attention[rows].mean(axis=(0, 1))
    lookup = {(int(i), int(j)): p for p, (i, j) in enumerate(zip(targets, sources))}
    records = []
    for edge, (a, b) in zip(g.edges, g.edge_endpoints):
        both = [per_pair[lookup[(int(a), int(b))]], per_pair[lookup[(int(b), int(a))]]]
        records.append({"edge": edge.id, "from_node": edge.from_node, "to_node": edge.to_node,
                        "attention": float(np.mean(both))})
    return pd.DataFrame.from_records(records, columns=["edge", "from_node", "to_node", "attention"])


def path_proximity(g: NetworkGraph, source: str) -> pd.Series:
    """Edge ranking score by position on the shortest hydraulic paths from `source`.

    Edges of the shortest-path tree score −(hydraulic distance of their nearer
    end); every other edge ties last at −inf.
    """
    lengths, paths = nx.single_source_dijkstra(g.nx_graph, source, weight="length")
    on_path: set[frozenset[str]] = set()
    for path in paths.values():
        on_path.update(frozenset(pair) for pair in zip(path, path[1:]))
    scores = {
        e.id: -min(lengths[e.from_node], lengths[e.to_node])
        if frozenset((e.from_node, e.to_node)) in on_path else -math.inf
        for e in g.edges
    }
    return pd.Series(scores, name="proximity")


def spearman_rho(a: Sequence[float], b: Sequence[float]) -> float:
    """Spearman rank correlation with average ranks for ties.

    Raises:
        StatisticsError: With fewer than two items or a constant ranking
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size < 2 or a.size != b.size:
        raise StatisticsError(f"Spearman correlation needs two equal rankings of at least 2 items, got {a.size}")
    # -inf ties last
    a = np.where(np.isneginf(a), np.nanmin(a[np.isfinite(a)], initial=0.0) - 1.0, a)
    b = np.where(np.isneginf(b), np.nanmin(b[np.isfinite(b)], initial=0.0) - 1.0, b)
    rho = spearmanr(a, b).statistic
    if not np.isfinite(rho):
        raise StatisticsError("Spearman correlation is undefined for a constant ranking")
    return float(rho)


def attention_path_spearman(
    scores: SeriesScores, g: NetworkGraph, attacks: Sequence[AttackSpec]
) -> float:
    """Mean over attacks of ρ(edge attention during the attack, path proximity to its source).

    Raises:
        StatisticsError: If the network has fewer than two edges or no attack yields a defined ρ
    """
    if len(g.edges) < 2:
        raise StatisticsError("Attention/path correlation is undefined on a network with fewer than two edges")
    values = []
    for attack in attacks:
        try:
            edges = attention_edge_frame(scores, g, range(attack.start, attack.end))
        except ValueError:
            continue
        proximity = path_proximity(g, attack_source(g, attack)).reindex(edges["edge"])
        try:
            values.append(spearman_rho(edges["attention"].to_numpy(), proximity.to_numpy()))
        except StatisticsError as e:
            logger.debug("Skipping attack %s: %s", attack.id, e)
    if not values:
        raise StatisticsError("No attack produced a defined attention/path correlation")
    return float(np.mean(values))


def ig_baseline(tensors: Sequence[FeatureTensor]) -> NDArray[np.float64]:
    """(F,) per-feature mean over attack-free steps of the given tensors."""
    normal = [t.values[t.network_labels == 0] for t in tensors]
    flat = np.concatenate([v.reshape(-1, len(FEATURE_LAYOUT)) for v in normal])
    if flat.size == 0:
        raise ValueError("No attack-free steps to build the integrated-gradient baseline from")
    return flat.mean(axis=0)


def integrated_gradients(
    model: PhysicsGat,
    x: NDArray[np.float64],
    baseline: NDArray[np.float64],
    node: int,
    steps: int = DEFAULT_IG_STEPS,
) -> NDArray[np.float64]:
    """Attribution of the final score of `node` to every entry of the raw window `x`.

    IG = (x − x') · (1/steps) Σ_{m=1..steps} ∂score/∂x at x' + (m/steps)(x − x'),
    with `baseline` x' broadcast to the (w, N, F) shape of `x`.
    """
    if steps < 1:
        raise ValueError(f"Integrated gradients need at least one step, got {steps}")
    x_t = torch.as_tensor(np.asarray(x, dtype=float))
    base = torch.as_tensor(np.broadcast_to(np.asarray(baseline, dtype=float), x_t.shape).copy())
    delta = x_t - base
    alphas = torch.arange(1, steps + 1, dtype=torch.float64) / steps
    total = torch.zeros_like(x_t)
    was_training = model.training
    model.eval()
    for start in range(0, steps, IG_CHUNK):
        chunk = alphas[start:start + IG_CHUNK]
        path = (base + chunk[:, None, None, None] * delta).requires_grad_(True)
        score = model(path).scores.final[:, node].sum()
        (grad,) = torch.autograd.grad(score, path)
        total += grad.sum(dim=0)
    model.train(was_training)
    return (delta * total / steps).detach().numpy()


def group_shares(attribution: NDArray[np.float64]) -> dict[str, float]:
    """Percentage of total absolute attribution per feature group (last axis in FEATURE_LAYOUT order)."""
    per_feature = np.abs(np.asarray(attribution)).reshape(-1, len(FEATURE_LAYOUT)).sum(axis=0)
    total = per_feature.sum()
    return {
        group: float(100.0 * per_feature[list(columns)].sum() / total) if total > 0 else 0.0
        for group, columns in FEATURE_GROUPS.items()
    }


def find_attack(tensor: FeatureTensor, attack_id: str) -> AttackSpec:
    for attack in tensor.attack_log:
        if attack.id == attack_id:
            return attack
    known = ", ".join(a.id for a in tensor.attack_log) or "none"
    raise KeyError(f"Attack '{attack_id}' not found in the series (known: {known})")


def explain_attack(
    model: PhysicsGat,
    tensor: FeatureTensor,
    attack_id: str,
    out_dir: str | Path,
    baseline_tensors: Sequence[FeatureTensor] | None = None,
    steps: int = DEFAULT_IG_STEPS,
    max_samples: int = DEFAULT_IG_SAMPLES,
) -> Explanation:
    """Explain one attack and write its CSV files to `out_dir`.

    Files: attention_edges.csv, attribution.csv, dominant_violation.csv and
    scores.csv (the plot-ready score series).

    Raises:
        KeyError: If the series holds no attack with that id
        ValueError: If no step of the attack window is scored
    """
    g = model.graph
    attack = find_attack(tensor, attack_id)
    scores = score_series(model, tensor)
    window = [t for t in range(attack.start, attack.end) if t >= scores.first_scored]
    if not window:
        raise ValueError(f"Attack '{attack_id}' ends before the first scored step t={scores.first_scored}")
    out_dir = Path(out_dir)

    attention = attention_edge_frame(scores, g, window)
    attention["path_proximity"] = path_proximity(g, attack_source(g, attack)).reindex(attention["edge"]).to_numpy()
    try:
        rho: float | None = spearman_rho(attention["attention"].to_numpy(), attention["path_proximity"].to_numpy())
    except StatisticsError as e:
        logger.warning("No attention/path correlation for attack %s: %s", attack_id, e)
        rho = None

    baseline = ig_baseline(baseline_tensors or [tensor])
    w = model.config.window
    totals = np.zeros(len(FEATURE_LAYOUT))
    magnitudes = np.zeros(len(FEATURE_LAYOUT))
    for t in window[:max_samples]:
        labeled = np.flatnonzero(tensor.labels[t])
        candidates = labeled if labeled.size else np.arange(len(g.nodes))
        node = int(candidates[np.argmax(scores.final[t, candidates])])
        attr = integrated_gradients(model, tensor.values[t - w + 1:t + 1], baseline, node, steps)
        totals += attr.reshape(-1, len(FEATURE_LAYOUT)).sum(axis=0)
        magnitudes += np.abs(attr).reshape(-1, len(FEATURE_LAYOUT)).sum(axis=0)
    shares = group_shares(magnitudes)
    group_of = {f: g_name for g_name, cols in FEATURE_GROUPS.items() for f in (FEATURE_LAYOUT[c] for c in cols)}
    total_magnitude = magnitudes.sum()
    attribution = pd.DataFrame({
        "feature": list(FEATURE_LAYOUT),
        "group": [group_of[f] for f in FEATURE_LAYOUT],
        "attribution": totals,
        "abs_attribution": magnitudes,
        "share": 100.0 * magnitudes / total_magnitude if total_magnitude > 0 else np.zeros_like(magnitudes),
    })

    dominant = pd.DataFrame({t: dominant_violation(tensor, t) for t in window}).T
    dominant.index.name = "step"

    files = [out_dir / "attention_edges.csv", out_dir / "attribution.csv",
             out_dir / "dominant_violation.csv", out_dir / "scores.csv"]
    write_csv(files[0], attention, index=False)
    write_csv(files[1], attribution, index=False)
    write_csv(files[2], dominant)
    write_csv(files[3], scores.to_frame(), index=False)
    logger.info("Explained attack %s (%s on %s): rho=%s shares=%s", attack_id, attack.kind, attack.target, rho, shares)
    return Explanation(
        attack=attack, attention=attention, attribution=attribution, shares=shares, spearman_rho=rho, files=files
    )
