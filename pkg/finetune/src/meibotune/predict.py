"""Batch inference: greedy decoding into the predictions JSONL contract."""

import json
from pathlib import Path

import torch

from meibotune.data import HUMAN_MARKER, load_questions
from meibotune.model import load_adapter


@torch.no_grad()
def _greedy_answer(model, tokenizer, prompt: str, max_seq_len: int,
                   max_new_tokens: int) -> str:
    ids = tokenizer.encode(prompt, add_bos=True, add_eos=False)
    ids = ids[-(max_seq_len - max_new_tokens):]
    generated = []
    for _ in range(max_new_tokens):
        input_ids = torch.tensor([ids], dtype=torch.long)
        logits = model(input_ids=input_ids).logits[0, -1]
        next_id = int(logits.argmax())
        if next_id == tokenizer.eos_id:
            break
        ids.append(next_id)
        if len(ids) >= max_seq_len:
            break
        generated.append(next_id)
    text = tokenizer.decode(generated)
    # a tiny model can start a new turn; keep only the first one
    if HUMAN_MARKER in text:
        text = text.split(HUMAN_MARKER, 1)[0].strip()
    return text


def predict(adapter_dir, questions_jsonl, out_jsonl, max_new_tokens: int = 96) -> Path:
    """Answer every question line and emit {"id", "raw_answer"} JSONL."""
    model, tokenizer, cfg = load_adapter(adapter_dir)
    questions = load_questions(questions_jsonl)
    out_jsonl = Path(out_jsonl)
    out_jsonl.parent.mkdir(parents=True, exist_ok=True)
    with out_jsonl.open("w", encoding="utf-8") as fh:
        for question in questions:
            answer = _greedy_answer(
                model, tokenizer, question.text, cfg.max_seq_len, max_new_tokens
            )
            fh.write(
                json.dumps({"id": question.id, "raw_answer": answer}, ensure_ascii=False)
                + "\n"
            )
    return out_jsonl
