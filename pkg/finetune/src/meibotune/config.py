"""Training configuration with the published recipe as defaults."""

import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml


class ConfigError(ValueError):
    pass


@dataclass
class TrainConfig:
    """Supervised fine-tuning settings.

    Defaults follow the reference recipe (batch 4 per device, up to 10000
    steps, constant 2e-4 learning rate, 512-token sequences, 0.03 warm-up,
    quantized low-rank adaptation on); smoke runs override them downward.
    ``base_model`` is either the built-in "local-tiny" randomly initialized
    GPT-2-style model (works fully offline) or a Hugging Face model id.
    """

    output_dir: str
    base_model: str = "local-tiny"
    batch_size_per_device: int = 4
    max_steps: int = 10000
    learning_rate: float = 2e-4
    max_seq_len: int = 512
    qlora: bool = True
    warmup_ratio: float = 0.03
    lora_rank: int = 8
    lora_alpha: int = 16
    seed: int = 0

    def validate(self) -> None:
        numeric = {
            "batch_size_per_device": self.batch_size_per_device,
            "max_steps": self.max_steps,
            "learning_rate": self.learning_rate,
            "max_seq_len": self.max_seq_len,
            "lora_rank": self.lora_rank,
            "lora_alpha": self.lora_alpha,
        }
        for name, value in numeric.items():
            if value <= 0:
                raise ConfigError(f"{name} must be positive, got {value}")
        if not 0 <= self.warmup_ratio < 1:
            raise ConfigError(f"warmup_ratio must be in [0, 1), got {self.warmup_ratio}")
        if not self.output_dir:
            raise ConfigError("output_dir is required")

    def to_dict(self) -> dict:
        return {
            "output_dir": self.output_dir,
            "base_model": self.base_model,
            "batch_size_per_device": self.batch_size_per_device,
            "max_steps": self.max_steps,
            "learning_rate": self.learning_rate,
            "max_seq_len": self.max_seq_len,
            "qlora": self.qlora,
            "warmup_ratio": self.warmup_ratio,
            "lora_rank": self.lora_rank,
            "lora_alpha": self.lora_alpha,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {k: d[k] for k in cls("x").to_dict() if k in d}
        cfg = cls(**known)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path) -> "TrainConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        text = path.read_text()
        if path.suffix.lower() in (".yaml", ".yml"):
            data = yaml.safe_load(text)
        else:
            data = json.loads(text)
        if not isinstance(data, dict):
            raise ConfigError(f"config {path} must be a mapping")
        return cls.from_dict(data)
