import logging
import math
from unittest.mock import patch

import numpy as np
import pytest
import torch

from evaluation import Metrics
from gat_core import ModelConfig, PhysicsGat
from multiscale import louvain
from tests.builders import graph, junction, pipe, reservoir, toy_tensor
from training import (
    HISTORY_COLUMNS,
    GradientError,
    TrainConfig,
    WindowBatch,
    adam_step,
    bce_loss,
    build_batch,
    check_finite_gradients,
    composite_loss,
    consistency_loss,
    cosine_anneal,
    finite_difference_check,
    make_optimizer,
    physics_loss,
    train,
    verify_gradients,
    window_samples,
)

SMALL = ModelConfig(hidden=4, heads=2, layers=2, lstm_hidden=3, mlp_hidden=5, pool_dim=3, window=4, seed=7)
QUICK = TrainConfig(epochs=3, batch_size=8, validate_every=1, patience=5, eta0=1e-2)


@pytest.fixture
def loop_model(pumped_loop):
    return PhysicsGat(SMALL, pumped_loop, louvain(pumped_loop))


@pytest.fixture
def toy_sets(pumped_loop):
    train_sets = [toy_tensor(pumped_loop, 30, [("J2", 10, 6)], seed=1)]
    val_sets = [toy_tensor(pumped_loop, 30, [("J3", 15, 5)], seed=2)]
    return train_sets, val_sets


def frames(phi_mass: float, phi_energy: float) -> torch.Tensor:
    x = torch.zeros(1, 2, 1, 8, dtype=torch.float64)
    x[0, -1, 0, 6] = phi_mass
    x[0, -1, 0, 7] = phi_energy
    return x


class TestBceLoss:
    def test_midpoint_scores(self):
        labels = torch.tensor([[0, 1, 1], [1, 0, 0]])
        assert bce_loss(torch.full((2, 3), 0.5, dtype=torch.float64), labels).item() == pytest.approx(math.log(2))

    def test_single_positive(self):
        loss = bce_loss(torch.tensor([[0.25]], dtype=torch.float64), torch.tensor([[1]]))
        assert loss.item() == pytest.approx(-math.log(0.25))

    def test_perfect_prediction_is_tiny_and_finite(self):
        labels = torch.tensor([[0, 1]])
        loss = bce_loss(labels.to(torch.float64), labels)
        assert 0 < loss.item() <= 1e-6 * abs(math.log(1e-7))


class TestPhysicsLoss:
    def test_single_normal_sample_takes_the_larger_violation(self):
        assert physics_loss(frames(0.2, 0.05), torch.tensor([[0]])).item() == pytest.approx(0.2)

    def test_attacked_samples_contribute_nothing(self):
        assert physics_loss(frames(0.2, 0.05), torch.tensor([[1]])).item() == 0.0

    def test_only_last_frame_counts(self):
        x = frames(0.0, 0.0)
        x[0, 0, 0, 6] = 5.0
        assert physics_loss(x, torch.tensor([[0]])).item() == 0.0


class TestConsistencyLoss:
    def test_two_node_edge(self):
        final = torch.tensor([[0.9, 0.1]], dtype=torch.float64)
        assert consistency_loss(final, torch.tensor([[0, 1]])).item() == pytest.approx(0.64)

    def test_constant_scores(self):
        final = torch.full((3, 4), 0.3, dtype=torch.float64)
        assert consistency_loss(final, torch.tensor([[0, 1], [1, 2], [2, 3]])).item() == 0.0

    def test_edge_between_equal_scores_lowers_the_mean(self):
        final = torch.tensor([[0.9, 0.1, 0.1]], dtype=torch.float64)
        one = consistency_loss(final, torch.tensor([[0, 1]]))
        two = consistency_loss(final, torch.tensor([[0, 1], [1, 2]]))
        assert two.item() == pytest.approx(one.item() / 2)

    def test_no_edges(self):
        final = torch.tensor([[0.4]], dtype=torch.float64)
        assert consistency_loss(final, torch.empty(0, 2, dtype=torch.int64)).item() == 0.0


def test_composite_loss_decomposes_exactly(loop_model, pumped_loop):
    batch = build_batch([toy_tensor(pumped_loop, 10, [("J1", 5, 3)])], [(0, 5), (0, 7), (0, 9)], 4)
    total, breakdown = composite_loss(loop_model(batch.x), batch, torch.from_numpy(pumped_loop.edge_endpoints),
                                      TrainConfig())
    assert breakdown.total == breakdown.bce + 0.1 * breakdown.physics + 0.05 * breakdown.consist
    assert total.item() == breakdown.total
    assert set(breakdown.to_dict()) == {"bce", "physics", "consist", "total"}


class TestCosineAnneal:
    cfg = TrainConfig(epochs=10)

    def test_endpoints(self):
        assert cosine_anneal(0, self.cfg) == pytest.approx(1e-3)
        assert cosine_anneal(10, self.cfg) == pytest.approx(1e-5)
        assert cosine_anneal(5, self.cfg) == pytest.approx((1e-3 + 1e-5) / 2)

    def test_non_increasing(self):
        rates = [cosine_anneal(e, self.cfg) for e in range(11)]
        assert all(a >= b for a, b in zip(rates, rates[1:]))

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            cosine_anneal(11, self.cfg)


class TestAdamStep:
    def _param(self, value: float) -> torch.nn.Parameter:
        return torch.nn.Parameter(torch.tensor([value], dtype=torch.float64))

    def test_zero_gradient_leaves_parameters(self):
        param = self._param(1.5)
        optimizer = make_optimizer([param], TrainConfig())
        param.grad = torch.zeros_like(param)
        adam_step(optimizer, 1e-3)
        assert param.item() == 1.5

    def test_first_step_closed_form(self):
        param = self._param(1.0)
        optimizer = make_optimizer([param], TrainConfig())
        param.grad = torch.tensor([0.3], dtype=torch.float64)
        adam_step(optimizer, 1e-2)
        assert param.item() == pytest.approx(1.0 - 1e-2 * 0.3 / (0.3 + 1e-8), abs=1e-15)

    def test_two_steps_match_hand_trace(self):
        param = self._param(0.5)
        optimizer = make_optimizer([param], TrainConfig())
        theta, m, v = 0.5, 0.0, 0.0
        for step, (grad, eta) in enumerate([(0.2, 1e-3), (-0.1, 5e-4)], start=1):
            param.grad = torch.tensor([grad], dtype=torch.float64)
            adam_step(optimizer, eta)
            m = 0.9 * m + 0.1 * grad
            v = 0.999 * v + 0.001 * grad ** 2
            m_hat = m / (1 - 0.9 ** step)
            v_hat = v / (1 - 0.999 ** step)
            theta -= eta * m_hat / (math.sqrt(v_hat) + 1e-8)
        assert param.item() == pytest.approx(theta, abs=1e-12)

    def test_moment_shapes_mirror_parameters(self, loop_model):
        optimizer = make_optimizer(loop_model.parameters(), TrainConfig())
        for param in loop_model.parameters():
            param.grad = torch.ones_like(param)
        adam_step(optimizer, 1e-3)
        for param in loop_model.parameters():
            assert optimizer.state[param]["exp_avg"].shape == param.shape
            assert optimizer.state[param]["exp_avg_sq"].shape == param.shape


class TestGradients:
    def test_finite_differences_agree(self, pumped_loop):
        config = ModelConfig(hidden=8, heads=2, layers=2, lstm_hidden=4, mlp_hidden=6, pool_dim=4, window=4, seed=1)
        model = PhysicsGat(config, pumped_loop, louvain(pumped_loop))
        tensor = toy_tensor(pumped_loop, 12, [("J2", 6, 4)], seed=1)
        model.scaler.fit(tensor.values)
        batch = build_batch([tensor], [(0, t) for t in range(3, 12)], 4)
        errors = finite_difference_check(model, batch, torch.from_numpy(pumped_loop.edge_endpoints), TrainConfig())
        assert set(errors) == {"gat", "lstm", "mlp", "fusion"}
        assert max(errors.values()) < 1e-4
        assert all(p.grad is None or not p.grad.any() for p in model.parameters())

    def test_duplicated_batch_gives_identical_gradients(self, loop_model, pumped_loop):
        tensor = toy_tensor(pumped_loop, 8, [("J1", 4, 2)])
        edges = torch.from_numpy(pumped_loop.edge_endpoints)
        grads = []
        for samples in ([(0, 5), (0, 7)], [(0, 5), (0, 7), (0, 5), (0, 7)]):
            loop_model.zero_grad()
            batch = build_batch([tensor], samples, 4)
            composite_loss(loop_model(batch.x), batch, edges, TrainConfig())[0].backward()
            grads.append([p.grad.clone() for p in loop_model.parameters()])
        for a, b in zip(*grads):
            torch.testing.assert_close(a, b, atol=1e-14, rtol=1e-12)

    def test_physics_term_has_no_parameter_gradient(self, loop_model, pumped_loop):
        batch = build_batch([toy_tensor(pumped_loop, 8, [])], [(0, 6)], 4)
        loss = physics_loss(batch.x, batch.labels)
        assert not loss.requires_grad

    def test_non_finite_gradient_names_the_group(self, loop_model):
        for name, param in loop_model.named_parameters():
            param.grad = torch.zeros_like(param)
        loop_model.temporal.lstm.weight_hh_l0.grad[0, 0] = float("nan")
        with pytest.raises(GradientError) as exc_info:
            check_finite_gradients(loop_model)
        assert exc_info.value.group == "lstm"
        assert "lstm" in str(exc_info.value)

    def test_verify_rejects_above_tolerance(self, loop_model, pumped_loop):
        tensor = toy_tensor(pumped_loop, 8, [("J1", 4, 2)])
        batch = build_batch([tensor], [(0, 5), (0, 7)], 4)
        cfg = TrainConfig(fd_tolerance=0.0)
        with pytest.raises(GradientError):
            verify_gradients(loop_model, batch, torch.from_numpy(pumped_loop.edge_endpoints), cfg)


class TestBatches:
    def test_window_samples_cover_full_windows(self, pumped_loop):
        tensors = [toy_tensor(pumped_loop, 6, []), toy_tensor(pumped_loop, 5, [])]
        assert window_samples(tensors, 4) == [(0, 3), (0, 4), (0, 5), (1, 3), (1, 4)]

    def test_build_batch_takes_labels_at_the_window_end(self, pumped_loop):
        tensor = toy_tensor(pumped_loop, 10, [("J3", 6, 2)])
        batch = build_batch([tensor], [(0, 5), (0, 6)], 4)
        assert isinstance(batch, WindowBatch)
        assert batch.x.shape == (2, 4, 6, 8)
        np.testing.assert_array_equal(batch.x[1].numpy(), tensor.values[3:7])
        assert batch.labels[0].sum() == 0
        assert batch.labels[1, pumped_loop.node_index["J3"]] == 1


class TestTrain:
    def test_history_layout(self, pumped_loop, toy_sets):
        result = train(*toy_sets, pumped_loop, SMALL, QUICK)
        assert tuple(result.history.columns) == HISTORY_COLUMNS
        assert list(result.history["epoch"]) == [0, 1, 2]
        assert result.history["val_f1"].notna().all()
        np.testing.assert_allclose(
            result.history["total"],
            result.history["bce"] + 0.1 * result.history["physics"] + 0.05 * result.history["consist"],
            rtol=1e-12,
        )
        assert result.history["eta"].iloc[0] == pytest.approx(1e-2)
        assert not result.model.training

    def test_deterministic(self, pumped_loop, toy_sets):
        a = train(*toy_sets, pumped_loop, SMALL, QUICK).model.state_dict()
        b = train(*toy_sets, pumped_loop, SMALL, QUICK).model.state_dict()
        assert all(torch.equal(a[k], b[k]) for k in a)

    def test_zero_weights_reduce_to_bce(self, pumped_loop, toy_sets):
        cfg = TrainConfig(**{**QUICK.to_dict(), "lambda_p": 0.0, "lambda_c": 0.0})
        history = train(*toy_sets, pumped_loop, SMALL, cfg).history
        assert list(history["total"]) == list(history["bce"])

    def test_validates_on_schedule(self, pumped_loop, toy_sets):
        cfg = TrainConfig(**{**QUICK.to_dict(), "epochs": 7, "validate_every": 3, "patience": 10})
        history = train(*toy_sets, pumped_loop, SMALL, cfg).history
        assert list(history["val_f1"].notna()) == [False, False, True, False, False, True, True]

    def test_early_stop_restores_best_validation(self, pumped_loop, toy_sets):
        scores = iter([0.5, 0.7, 0.6, 0.7, 0.9])
        cfg = TrainConfig(**{**QUICK.to_dict(), "epochs": 10, "patience": 2})
        with patch("training.trainer.evaluate_model", side_effect=lambda *a: Metrics(next(scores), 0.0, 0.0)):
            result = train(*toy_sets, pumped_loop, SMALL, cfg)
        assert list(result.history["val_f1"]) == [0.5, 0.7, 0.6, 0.7]
        assert result.best_epoch == 1
        assert result.best_f1 == 0.7

    def test_writes_history(self, tmp_path, pumped_loop, toy_sets):
        path = tmp_path / "history.csv"
        train(*toy_sets, pumped_loop, SMALL, QUICK, history_path=path)
        assert path.read_text().splitlines()[0] == ",".join(HISTORY_COLUMNS)

    def test_validation_falls_back_to_training(self, pumped_loop, toy_sets, caplog):
        with caplog.at_level(logging.WARNING):
            result = train(toy_sets[0], [], pumped_loop, SMALL, QUICK)
        assert "validating on the training series" in caplog.text
        assert result.history["val_f1"].notna().all()

    def test_empty_training_set(self, pumped_loop):
        with pytest.raises(ValueError, match="no window"):
            train([toy_tensor(pumped_loop, 3, [])], [], pumped_loop, SMALL, QUICK)

    def test_node_order_mismatch(self, pumped_loop):
        other = graph([reservoir("R"), junction("A")], [pipe("RA", "R", "A")])
        with pytest.raises(ValueError, match="node order"):
            train([toy_tensor(other, 10, [])], [], pumped_loop, SMALL, QUICK)

    def test_gradient_check_mode_runs_before_training(self, pumped_loop, toy_sets):
        cfg = TrainConfig(**{**QUICK.to_dict(), "epochs": 1, "grad_mode": "check", "fd_tolerance": 0.0})
        with pytest.raises(GradientError):
            train(*toy_sets, pumped_loop, SMALL, cfg)


class TestTrainConfig:
    def test_learning_rate_order(self):
        with pytest.raises(ValueError):
            TrainConfig(eta0=1e-5, eta_min=1e-3)

    def test_batch_size(self):
        with pytest.raises(ValueError):
            TrainConfig(batch_size=0)

    def test_unknown_key(self):
        with pytest.raises(ValueError, match="bogus"):
            TrainConfig.from_dict({"bogus": 1})
