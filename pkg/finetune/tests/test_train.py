"""Training loop behavior at smoke scale."""

import json

import pytest

from meibotune.config import ConfigError, TrainConfig
from meibotune.train import TrainError, read_loss_trace, train


class TestTrainSmoke:
    def test_loss_decreases_over_twenty_steps(self, adapter_dir):
        trace = read_loss_trace(adapter_dir)
        assert len(trace) == 20
        assert trace[-1] < trace[0]

    def test_adapter_artifact_complete(self, adapter_dir):
        for name in ("model_state.pt", "vocab.json", "adapter_config.json", "loss_trace.json"):
            assert (adapter_dir / name).exists(), name

    def test_adapter_config_readable(self, adapter_dir):
        cfg = TrainConfig.from_dict(
            json.loads((adapter_dir / "adapter_config.json").read_text())
        )
        assert cfg.base_model == "local-tiny"
        assert cfg.qlora is True


class TestTrainValidation:
    def test_zero_steps_rejected(self, dataset_dir, tmp_path):
        cfg = TrainConfig(output_dir=str(tmp_path / "a"), max_seq_len=256)
        with pytest.raises(ConfigError, match="steps"):
            train(cfg, dataset_dir / "ds" / "train.jsonl", steps=0)

    def test_invalid_dataset_refused(self, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text(json.dumps({"id": "a", "text": "no markers at all"}) + "\n")
        cfg = TrainConfig(output_dir=str(tmp_path / "a"), max_seq_len=256)
        with pytest.raises(TrainError, match="failed validation"):
            train(cfg, bad, steps=2)

    def test_sequence_budget_must_cover_longest_example(self, dataset_dir, tmp_path):
        cfg = TrainConfig(output_dir=str(tmp_path / "a"), max_seq_len=8)
        with pytest.raises(ConfigError, match="max_seq_len"):
            train(cfg, dataset_dir / "ds" / "train.jsonl", steps=2)

    def test_negative_hyperparameters_rejected(self):
        with pytest.raises(ConfigError, match="learning_rate"):
            TrainConfig(output_dir="x", learning_rate=-1.0).validate()

    def test_config_yaml_round_trip(self, tmp_path):
        cfg = TrainConfig(output_dir="out", max_steps=20, max_seq_len=256)
        path = tmp_path / "cfg.yaml"
        import yaml

        path.write_text(yaml.safe_dump(cfg.to_dict()))
        again = TrainConfig.from_file(path)
        assert again == cfg

    def test_paper_recipe_defaults(self):
        cfg = TrainConfig(output_dir="x")
        assert cfg.batch_size_per_device == 4
        assert cfg.max_steps == 10000
        assert cfg.learning_rate == 2e-4
        assert cfg.max_seq_len == 512
        assert cfg.warmup_ratio == 0.03
        assert cfg.qlora is True
