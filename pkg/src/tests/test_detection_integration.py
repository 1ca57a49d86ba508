"""
End-to-end detection checks on the 30-node benchmark and the separable toy set.

These tests train real models and time the spatial encoder, so they take
minutes rather than seconds.
"""
import time

import networkx as nx
import numpy as np
import pytest
import torch

from evaluation import ResidualThresholdBaseline, bootstrap_ci, evaluate_model, evaluate_scores, score_series
from evaluation.benchmark import build_split
from evaluation.explain import explain_attack
from evaluation.sweeps import ablation_run, outage_sweep, roughness_sweep
from gat_core import ModelConfig, PhysicsGat, SpatialEncoder
from hydrosim import generate_series
from multiscale import louvain
from physics_features import FeatureSettings, assemble_features
from tests.builders import toy_tensor
from training import TrainConfig, build_batch, finite_difference_check, train

pytestmark = pytest.mark.integration

BENCH_FEATURES = FeatureSettings(window=12)
BENCH_MODEL = ModelConfig(hidden=16, heads=4, layers=2, lstm_hidden=16, mlp_hidden=32, pool_dim=8, window=12, seed=3)
BENCH_TRAIN = TrainConfig(epochs=30, batch_size=32, eta0=5e-3, validate_every=5, patience=3, seed=3)


@pytest.fixture(scope="module")
def benchmark():
    split = build_split(seed=0)
    result = train(
        split.features("train", BENCH_FEATURES), split.features("val", BENCH_FEATURES), split.g, BENCH_MODEL,
        BENCH_TRAIN,
    )
    return split, result.model


class TestBenchmark:
    def test_full_model_detects_every_kind(self, benchmark):
        split, model = benchmark
        scored = [score_series(model, t) for t in split.features("test", BENCH_FEATURES)]
        metrics = evaluate_scores(scored, BENCH_TRAIN.tau, BENCH_TRAIN.sustain_k)
        assert metrics.f1 >= 0.90
        assert metrics.ttd_hours is not None
        assert metrics.ttd_hours <= 3.0

    def test_without_physics_features_scores_lower(self, benchmark):
        split, _ = benchmark
        result = ablation_run(split, BENCH_FEATURES, BENCH_MODEL, BENCH_TRAIN, variants=["no_phi"], n_resamples=0)
        assert result.f1_drop("no_phi") >= 0.02

    def test_roughness_error_hurts_less_than_the_residual_baseline(self, benchmark):
        split, model = benchmark
        baseline = ResidualThresholdBaseline.calibrate(split.features("val", BENCH_FEATURES))
        result = roughness_sweep(
            model, split.test, split.g, BENCH_FEATURES, deltas=(-0.15, 0.0, 0.15), baseline=baseline, n_resamples=0
        )
        for delta in (-0.15, 0.15):
            assert result.f1_drop(delta) <= 0.05
            assert result.f1_drop(delta) < result.comparator_drop(delta)

    def test_sensor_outage_is_bridged_by_interpolation(self, benchmark):
        split, model = benchmark
        result = outage_sweep(model, split.test, split.g, BENCH_FEATURES, fractions=(0.0, 0.10), n_seeds=3,
                              n_resamples=0)
        assert result.f1_drop(0.10) <= 0.03
        assert result.f1_drop(0.10) < result.comparator_drop(0.10)


def test_separable_set_is_learned_and_attributed_to_physics(pumped_loop, tmp_path):
    sets = [toy_tensor(pumped_loop, 80, [("J2", 20, 6), ("J4", 50, 6)], seed=k) for k in range(3)]
    config = ModelConfig(hidden=8, heads=2, layers=2, lstm_hidden=8, mlp_hidden=16, pool_dim=4, window=4, seed=0)
    cfg = TrainConfig(epochs=50, batch_size=16, eta0=1e-2, validate_every=5, patience=10)
    result = train(sets, sets, pumped_loop, config, cfg)
    assert result.best_f1 >= 0.95
    assert evaluate_model(result.model, sets, cfg.tau, cfg.sustain_k).f1 == pytest.approx(result.best_f1)

    explanation = explain_attack(result.model, sets[0], "toy0", tmp_path, baseline_tensors=sets)
    assert explanation.shares["phi_mass"] + explanation.shares["phi_energy"] > 80.0


def test_clean_benchmark_satisfies_conservation(benchmark_network):
    start = time.perf_counter()
    series = generate_series(benchmark_network, days=7, noise_std=0.0)
    tensor = assemble_features(series, benchmark_network)
    elapsed = time.perf_counter() - start
    assert not tensor.measured_mask.all()
    assert tensor.column("phi_mass").max() <= 1e-5
    assert tensor.column("phi_energy").max() <= 1e-4
    assert elapsed < 10.0


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_finite_differences_at_several_seeds(pumped_loop, seed):
    config = ModelConfig(hidden=8, heads=2, layers=2, lstm_hidden=4, mlp_hidden=6, pool_dim=4, window=4, seed=seed)
    model = PhysicsGat(config, pumped_loop, louvain(pumped_loop))
    tensor = toy_tensor(pumped_loop, 16, [("J3", 6, 5)], seed=seed)
    model.scaler.fit(tensor.values)
    batch = build_batch([tensor], [(0, t) for t in range(3, 16)], 4)
    errors = finite_difference_check(
        model, batch, torch.from_numpy(pumped_loop.edge_endpoints), TrainConfig(), entries_per_param=8, seed=seed
    )
    assert max(errors.values()) < 1e-4


def test_bootstrap_interval_covers_the_true_mean():
    rng = np.random.default_rng(123)
    p, n, trials = 0.8, 1000, 200
    covered = 0
    for trial in range(trials):
        data = (rng.random(n) < p).astype(float)
        ci = bootstrap_ci(lambda idx: float(data[idx].mean()), n, n_resamples=1000, seed=trial)
        covered += ci.lo <= p <= ci.hi
    assert covered / trials >= 0.93


def _regular_support(n_nodes: int, degree: int, seed: int) -> tuple[torch.Tensor, torch.Tensor, int]:
    g = nx.random_regular_graph(degree, n_nodes, seed=seed)
    pairs = sorted({(i, i) for i in g.nodes} | {(a, b) for a, b in g.edges} | {(b, a) for a, b in g.edges})
    targets, sources = zip(*pairs)
    return torch.tensor(targets), torch.tensor(sources), g.number_of_edges()


def _median_seconds(encoder: SpatialEncoder, x: torch.Tensor, targets: torch.Tensor, sources: torch.Tensor) -> float:
    timings = []
    with torch.no_grad():
        encoder(x, targets, sources)
        for _ in range(9):
            start = time.perf_counter()
            encoder(x, targets, sources)
            timings.append(time.perf_counter() - start)
    return float(np.median(timings))


def test_spatial_encoding_scales_with_edges():
    encoder = SpatialEncoder(8, 16, 4, 2)
    seconds, edges = [], []
    for n_nodes in (32, 128):
        targets, sources, n_edges = _regular_support(n_nodes, 4, seed=0)
        x = torch.randn(16, 8, n_nodes, 8, dtype=torch.float64, generator=torch.Generator().manual_seed(0))
        seconds.append(_median_seconds(encoder, x, targets, sources))
        edges.append(n_edges)
    assert seconds[1] / seconds[0] <= 1.5 * edges[1] / edges[0]
