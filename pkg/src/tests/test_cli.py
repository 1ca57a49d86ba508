import json
import logging
from unittest.mock import patch

import pytest

from cli import run
from network import load_network
from physics_features import load_features


@pytest.fixture(autouse=True)
def restore_logging():
    root = logging.getLogger()
    handlers, level = root.handlers[:], root.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)


class TestNetCommands:
    def test_validate_good_file(self, example_dir, capsys):
        assert run(["net", "validate", str(example_dir / "networks" / "three_node.json")]) == 0
        assert "valid" in capsys.readouterr().out.lower()

    def test_validate_bad_file(self, example_dir, capsys):
        assert run(["net", "validate", str(example_dir / "networks" / "duplicate_id.json")]) == 1
        assert "duplicate node id 'J1'" in capsys.readouterr().out

    def test_synth(self, tmp_path):
        out = tmp_path / "bench.json"
        assert run(["net", "synth", "--out", str(out)]) == 0
        assert len(load_network(out).nodes) == 30


class TestExitCodes:
    def test_unknown_flag(self, capsys):
        assert run(["simulate", "--bogus"]) == 1
        assert "--bogus" in capsys.readouterr().err

    def test_unknown_command(self):
        assert run(["frobnicate"]) == 1

    def test_missing_features_file(self, tmp_path, example_dir, capsys):
        missing = tmp_path / "nope.csv"
        code = run([
            "train", "--features", str(missing), "--net", str(example_dir / "networks" / "pumped_loop.json"),
            "--out", str(tmp_path / "model.json"),
        ])
        assert code == 1
        assert str(missing) in capsys.readouterr().err

    def test_invalid_config_file(self, tmp_path, example_dir):
        config = tmp_path / "run.yaml"
        config.write_text("train:\n  epoch: 3\n", encoding="utf-8")
        args = ["--config", str(config), "net", "validate", str(example_dir / "networks" / "three_node.json")]
        assert run(args) == 1

    def test_unknown_sweep_axis(self):
        assert run(["sweep", "--axis", "pressure"]) == 1

    def test_internal_error(self, tmp_path, example_dir):
        with patch("cli.generate_series", side_effect=RuntimeError("boom")):
            code = run([
                "simulate", "--net", str(example_dir / "networks" / "pumped_loop.json"), "--out", str(tmp_path / "s"),
            ])
        assert code == 2
        assert not (tmp_path / "s").exists()

    def test_missing_required_path(self):
        assert run(["simulate", "--out", "somewhere"]) == 1


class TestPipelineStages:
    def test_simulate_attack_featurize(self, tmp_path, example_dir):
        net = example_dir / "networks" / "pumped_loop.json"
        clean, attacked, features = tmp_path / "clean", tmp_path / "attacked", tmp_path / "features.csv"
        assert run(["--seed", "4", "simulate", "--net", str(net), "--days", "7", "--noise", "0.005",
                    "--out", str(clean)]) == 0
        assert run(["attack", "--scenario", str(example_dir / "scenarios" / "case_study.yaml"),
                    "--in", str(clean), "--out", str(attacked)]) == 0
        assert run(["--seed", "4", "featurize", "--in", str(attacked), "--window", "6", "--ablate", "normalization",
                    "--out", str(features)]) == 0

        tensor = load_features(features)
        assert tensor.window == 6
        assert not tensor.toggles.normalization
        assert [a.id for a in tensor.attack_log] == ["pump-off", "theft", "offset", "replay"]
        meta = json.loads((tmp_path / "features.json").read_text(encoding="utf-8"))
        assert meta["provenance"]["seed"] == 4
        assert len(meta["provenance"]["config_hash"]) == 64

    def test_featurize_is_idempotent(self, tmp_path, example_dir):
        net = example_dir / "networks" / "pumped_loop.json"
        assert run(["simulate", "--net", str(net), "--days", "2", "--out", str(tmp_path / "s")]) == 0
        for name in ("a.csv", "b.csv"):
            assert run(["featurize", "--in", str(tmp_path / "s"), "--window", "4", "--out", str(tmp_path / name)]) == 0
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_featurize_unknown_ablation_flag(self, tmp_path, example_dir):
        net = example_dir / "networks" / "pumped_loop.json"
        assert run(["simulate", "--net", str(net), "--days", "1", "--out", str(tmp_path / "s")]) == 0
        assert run(["featurize", "--in", str(tmp_path / "s"), "--ablate", "phi_flow",
                    "--out", str(tmp_path / "f.csv")]) == 1
