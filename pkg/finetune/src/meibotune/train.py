"""Supervised fine-tuning: causal LM loss on the assistant span."""

import json
from pathlib import Path

import torch

from meibotune.config import ConfigError, TrainConfig
from meibotune.data import ASSISTANT_MARKER, load_examples, validate_dataset
from meibotune.model import build_base_model, inject_lora, save_adapter
from meibotune.tokenizer import WordTokenizer


class TrainError(RuntimeError):
    pass


def _encode_example(tokenizer: WordTokenizer, text: str, max_seq_len: int):
    """Token ids plus labels; question tokens are masked out of the loss.

    The raw text is one causal sequence; only tokens after the
    "###Assistant:" marker (the answer span, plus EOS) carry loss.
    """
    ids = tokenizer.encode(text, add_bos=True, add_eos=True)
    tokens = text.split()
    try:
        marker_pos = tokens.index(ASSISTANT_MARKER)
    except ValueError:
        marker_pos = max(len(tokens) - 1, 0)
    answer_start = marker_pos + 2  # bos offset + first token after the marker
    labels = list(ids)
    for i in range(min(answer_start, len(labels))):
        labels[i] = -100
    return ids[:max_seq_len], labels[:max_seq_len]


def _batches(encoded, batch_size: int, pad_id: int, generator: torch.Generator):
    """Endless shuffled batches, padded to the longest sequence per batch."""
    n = len(encoded)
    while True:
        order = torch.randperm(n, generator=generator).tolist()
        for start in range(0, n, batch_size):
            chunk = [encoded[i] for i in order[start:start + batch_size]]
            width = max(len(ids) for ids, _ in chunk)
            input_ids = torch.full((len(chunk), width), pad_id, dtype=torch.long)
            attention = torch.zeros((len(chunk), width), dtype=torch.long)
            labels = torch.full((len(chunk), width), -100, dtype=torch.long)
            for row, (ids, labs) in enumerate(chunk):
                input_ids[row, :len(ids)] = torch.tensor(ids, dtype=torch.long)
                attention[row, :len(ids)] = 1
                labels[row, :len(labs)] = torch.tensor(labs, dtype=torch.long)
            yield input_ids, attention, labels


def train(cfg: TrainConfig, train_jsonl, steps: int | None = None) -> Path:
    """Run supervised fine-tuning and save the adapter artifact.

    ``steps`` overrides cfg.max_steps (smoke runs use <= 20). The dataset
    must pass validate_dataset first; training refuses to start otherwise.
    Returns the adapter directory. The saved loss trace holds one entry per
    step.
    """
    cfg.validate()
    if steps is None:
        steps = cfg.max_steps
    if steps <= 0:
        raise ConfigError(f"steps must be positive, got {steps}")

    stats = validate_dataset(train_jsonl)
    if not stats.ok:
        first = stats.failures[0]
        raise TrainError(
            f"dataset failed validation ({len(stats.failures)} bad line(s); "
            f"first: line {first[0]}: {first[1]})"
        )
    examples = load_examples(train_jsonl)

    tokenizer = WordTokenizer.build(example.text for example in examples)
    encoded = [
        _encode_example(tokenizer, example.text, cfg.max_seq_len)
        for example in examples
    ]
    longest = max(len(example.text.split()) for example in examples) + 2  # bos/eos
    if cfg.max_seq_len < longest:
        raise ConfigError(
            f"max_seq_len {cfg.max_seq_len} is shorter than the longest "
            f"example ({longest} tokens)"
        )

    model = build_base_model(cfg.base_model, len(tokenizer), cfg.max_seq_len, cfg.seed)
    trainable = inject_lora(model, cfg.lora_rank, cfg.lora_alpha, quantize=cfg.qlora)
    model.train()

    optimizer = torch.optim.AdamW(trainable, lr=cfg.learning_rate)
    warmup_steps = int(cfg.warmup_ratio * steps)
    generator = torch.Generator().manual_seed(cfg.seed)
    torch.manual_seed(cfg.seed)

    loss_trace = []
    batches = _batches(encoded, cfg.batch_size_per_device, tokenizer.pad_id, generator)
    try:
        for step in range(1, steps + 1):
            input_ids, attention, labels = next(batches)
            # constant schedule with linear warm-up
            if warmup_steps and step <= warmup_steps:
                lr = cfg.learning_rate * step / warmup_steps
            else:
                lr = cfg.learning_rate
            for group in optimizer.param_groups:
                group["lr"] = lr
            out = model(input_ids=input_ids, attention_mask=attention, labels=labels)
            optimizer.zero_grad()
            out.loss.backward()
            optimizer.step()
            loss_trace.append(float(out.loss.detach()))
    except torch.cuda.OutOfMemoryError as exc:
        raise TrainError(
            "out of memory during training; reduce max_seq_len or "
            "batch_size_per_device"
        ) from exc

    model.eval()
    return save_adapter(model, tokenizer, cfg, loss_trace, cfg.output_dir)


def read_loss_trace(adapter_dir) -> list:
    return json.loads((Path(adapter_dir) / "loss_trace.json").read_text())
