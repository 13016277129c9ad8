"""Tiny causal LM base plus hand-rolled low-rank adaptation.

The frozen base is either a locally initialized GPT-2-architecture model
(fully offline) or a Hugging Face checkpoint when a model id is given and
the hub is reachable. Adaptation adds trainable low-rank A@B deltas to the
attention and MLP projection layers; the optional quantization flag stores
the frozen base weights at int8 precision (per-column absmax), the
desk-scale stand-in for 4-bit quantized training.
"""

import json
import math
from pathlib import Path

import torch
from torch import nn
from transformers import GPT2Config, GPT2LMHeadModel
from transformers.pytorch_utils import Conv1D

LORA_TARGETS = ("attn.c_attn", "attn.c_proj", "mlp.c_fc", "mlp.c_proj")


class LoRAConv1D(nn.Module):
    """Frozen Conv1D (weight shape in x out) plus a trainable low-rank delta."""

    def __init__(self, base: Conv1D, rank: int, alpha: int):
        super().__init__()
        self.base = base
        in_features, out_features = base.weight.shape
        self.lora_a = nn.Parameter(torch.empty(in_features, rank))
        self.lora_b = nn.Parameter(torch.zeros(rank, out_features))
        nn.init.normal_(self.lora_a, std=1.0 / math.sqrt(rank))
        self.scale = alpha / rank

    def forward(self, x):
        return self.base(x) + (x @ self.lora_a @ self.lora_b) * self.scale


def quantize_int8_(module: Conv1D) -> None:
    """Replace weights with their int8 round trip (per-column absmax)."""
    with torch.no_grad():
        w = module.weight.data
        scale = w.abs().amax(dim=0).clamp(min=1e-8) / 127.0
        module.weight.data = (w / scale).round().clamp(-127, 127) * scale


def build_base_model(base_model: str, vocab_size: int, max_seq_len: int, seed: int):
    """Construct the frozen base. "local-tiny" needs no network."""
    if base_model == "local-tiny":
        torch.manual_seed(seed)
        config = GPT2Config(
            vocab_size=vocab_size,
            n_positions=max_seq_len,
            n_embd=128,
            n_layer=2,
            n_head=4,
            bos_token_id=1,
            eos_token_id=2,
            resid_pdrop=0.0,
            embd_pdrop=0.0,
            attn_pdrop=0.0,
        )
        return GPT2LMHeadModel(config)
    model = GPT2LMHeadModel.from_pretrained(base_model)
    if model.config.n_positions < max_seq_len:
        raise ValueError(
            f"base model supports {model.config.n_positions} positions, "
            f"config asks for {max_seq_len}"
        )
    return model


def inject_lora(model: GPT2LMHeadModel, rank: int, alpha: int, quantize: bool) -> list:
    """Freeze the base, optionally quantize it, and wrap the target layers.

    Returns the list of trainable parameters.
    """
    for param in model.parameters():
        param.requires_grad = False
    trainable = []
    for block in model.transformer.h:
        for path in LORA_TARGETS:
            owner_name, attr = path.split(".")
            owner = getattr(block, owner_name)
            layer = getattr(owner, attr)
            if quantize:
                quantize_int8_(layer)
            wrapped = LoRAConv1D(layer, rank, alpha)
            setattr(owner, attr, wrapped)
            trainable.extend([wrapped.lora_a, wrapped.lora_b])
    return trainable


def lora_state_dict(model: GPT2LMHeadModel) -> dict:
    return {
        name: tensor
        for name, tensor in model.state_dict().items()
        if "lora_a" in name or "lora_b" in name
    }


def save_adapter(model, tokenizer, cfg, loss_trace, out_dir) -> Path:
    """Persist everything predict() needs: base weights, deltas, vocab, config."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    torch.save(model.state_dict(), out_dir / "model_state.pt")
    tokenizer.save(out_dir / "vocab.json")
    (out_dir / "adapter_config.json").write_text(
        json.dumps(cfg.to_dict(), indent=2) + "\n"
    )
    (out_dir / "loss_trace.json").write_text(json.dumps(loss_trace) + "\n")
    return out_dir


def load_adapter(adapter_dir):
    """Rebuild the adapted model and tokenizer from a saved adapter directory."""
    from meibotune.config import TrainConfig
    from meibotune.tokenizer import WordTokenizer

    adapter_dir = Path(adapter_dir)
    cfg = TrainConfig.from_dict(
        json.loads((adapter_dir / "adapter_config.json").read_text())
    )
    tokenizer = WordTokenizer.load(adapter_dir / "vocab.json")
    model = build_base_model(cfg.base_model, len(tokenizer), cfg.max_seq_len, cfg.seed)
    inject_lora(model, cfg.lora_rank, cfg.lora_alpha, quantize=False)
    state = torch.load(adapter_dir / "model_state.pt", weights_only=True)
    model.load_state_dict(state)
    model.eval()
    return model, tokenizer, cfg
