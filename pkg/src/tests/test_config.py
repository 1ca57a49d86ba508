import json

import pytest

from utils.config import ConfigError, RunConfig, load_run_config, merge, read_config_file


def test_defaults_round_trip():
    assert RunConfig.from_dict(RunConfig().to_dict()) == RunConfig()


def test_example_config(example_dir):
    config = load_run_config(example_dir / "config" / "desk.yaml")
    assert config.seed == 11
    assert config.model.hidden == 8
    assert config.model.seed == 11
    assert config.train.seed == 11
    assert config.features.window == 12
    assert config.sweep.ablation_variants == ("no_phi", "gcn")


class TestPrecedence:
    def test_flags_override_file(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text("seed: 5\ntrain:\n  epochs: 3\n", encoding="utf-8")
        config = load_run_config(path, {"seed": 9, "threads": None})
        assert config.seed == 9
        assert config.train.epochs == 3
        assert (config.model.seed, config.train.seed) == (9, 9)
        assert config.threads is None

    def test_explicit_sub_seed_is_kept(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text("model:\n  seed: 2\n", encoding="utf-8")
        config = load_run_config(path, {"seed": 9})
        assert (config.model.seed, config.train.seed) == (2, 9)

    def test_defaults_without_file(self):
        assert load_run_config() == RunConfig()

    def test_json_file(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"features": {"toggles": {"phi_mass": False}}}), encoding="utf-8")
        config = load_run_config(path)
        assert not config.features.toggles.phi_mass
        assert config.features.toggles.phi_energy

    def test_merge_is_recursive(self):
        merged = merge({"a": {"x": 1, "y": 2}, "b": 1}, {"a": {"y": 3}, "b": None})
        assert merged == {"a": {"x": 1, "y": 3}, "b": 1}


class TestValidation:
    def test_unknown_key(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text("train:\n  epoch: 3\n", encoding="utf-8")
        with pytest.raises(ConfigError) as exc:
            read_config_file(path)
        assert "epoch" in str(exc.value)

    def test_wrong_type(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text("model:\n  attention: dense\n", encoding="utf-8")
        with pytest.raises(ConfigError, match="model.attention"):
            load_run_config(path)

    def test_invalid_yaml(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text("seed: [1, 2\n", encoding="utf-8")
        with pytest.raises(ConfigError):
            read_config_file(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError, match="run.yaml"):
            read_config_file(tmp_path / "run.yaml")

    def test_empty_file_means_defaults(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text("", encoding="utf-8")
        assert load_run_config(path) == RunConfig()


class TestProvenance:
    def test_hash_is_stable(self):
        assert RunConfig().config_hash() == RunConfig().config_hash()
        assert len(RunConfig().config_hash()) == 64

    def test_hash_follows_settings(self):
        base = RunConfig()
        assert load_run_config(overrides={"train": {"epochs": 4}}).config_hash() != base.config_hash()

    def test_log_level_does_not_change_hash(self):
        assert load_run_config(overrides={"log_level": "DEBUG"}).config_hash() == RunConfig().config_hash()

    def test_provenance_block(self):
        provenance = load_run_config(overrides={"seed": 3}).provenance()
        assert provenance.seed == 3
        assert provenance.version
        assert set(provenance.to_dict()) == {"config_hash", "seed", "version"}
