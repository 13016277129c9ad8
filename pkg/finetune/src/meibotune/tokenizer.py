"""Word-level tokenizer built from the training corpus.

Offline-friendly: no downloaded vocabulary. Whitespace tokenization keeps
report texts around 100-150 tokens, well under the default 512-token
sequence budget.
"""

import json
from pathlib import Path

PAD, BOS, EOS, UNK = "<pad>", "<bos>", "<eos>", "<unk>"
SPECIALS = (PAD, BOS, EOS, UNK)


class WordTokenizer:
    def __init__(self, vocab: dict):
        self.vocab = dict(vocab)
        self.inverse = {i: t for t, i in self.vocab.items()}

    @classmethod
    def build(cls, texts) -> "WordTokenizer":
        vocab = {tok: i for i, tok in enumerate(SPECIALS)}
        for text in texts:
            for token in text.split():
                if token not in vocab:
                    vocab[token] = len(vocab)
        return cls(vocab)

    def __len__(self) -> int:
        return len(self.vocab)

    @property
    def pad_id(self) -> int:
        return self.vocab[PAD]

    @property
    def bos_id(self) -> int:
        return self.vocab[BOS]

    @property
    def eos_id(self) -> int:
        return self.vocab[EOS]

    def encode(self, text: str, add_bos: bool = True, add_eos: bool = False) -> list:
        unk = self.vocab[UNK]
        ids = [self.vocab.get(token, unk) for token in text.split()]
        if add_bos:
            ids.insert(0, self.vocab[BOS])
        if add_eos:
            ids.append(self.vocab[EOS])
        return ids

    def decode(self, ids) -> str:
        tokens = []
        for i in ids:
            token = self.inverse.get(int(i), UNK)
            if token in (PAD, BOS):
                continue
            if token == EOS:
                break
            tokens.append(token)
        return " ".join(tokens)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.vocab, ensure_ascii=False))

    @classmethod
    def load(cls, path) -> "WordTokenizer":
        return cls(json.loads(Path(path).read_text()))
