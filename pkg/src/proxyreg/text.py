"""Tokenization, vocabulary and a deterministic stand-in word embedder."""

from __future__ import annotations

import hashlib
import string
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ContractError

PAD, UNK, SOS, EOS = 0, 1, 2, 3
RESERVED = ("<pad>", "<unk>", "<sos>", "<eos>")


def tokenize(s: str) -> list[str]:
    """Lowercase, split on whitespace, strip ASCII punctuation at token edges."""
    tokens = (t.strip(string.punctuation) for t in s.lower().split())
    return [t for t in tokens if t]


@dataclass(frozen=True)
class Vocab:
    tokens: tuple[str, ...]
    min_count: int = 1
    index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if tuple(self.tokens[:4]) != RESERVED:
            raise ContractError("vocabulary must start with the reserved tokens")
        if len(set(self.tokens)) != len(self.tokens):
            raise ContractError("duplicate tokens in vocabulary")
        object.__setattr__(self, "index", {t: i for i, t in enumerate(self.tokens)})

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def id(self, token: str) -> int:
        return self.index.get(token, UNK)

    def to_json(self) -> dict:
        return {"tokens": list(self.tokens), "min_count": self.min_count}

    @classmethod
    def from_json(cls, doc: dict) -> "Vocab":
        return cls(tuple(doc["tokens"]), int(doc["min_count"]))


def build_vocab(corpus, min_count: int = 1) -> Vocab:
    """Tokens seen at least ``min_count`` times, in first-appearance order."""
    if min_count < 1:
        raise ConfigError("min_count must be >= 1")
    corpus = list(corpus)
    if not corpus:
        raise ConfigError("cannot build a vocabulary from an empty corpus")
    counts = Counter(tok for toks in corpus for tok in toks)
    kept, seen = [], set(RESERVED)
    for toks in corpus:
        for tok in toks:
            if tok not in seen and counts[tok] >= min_count:
                kept.append(tok)
                seen.add(tok)
    return Vocab(RESERVED + tuple(kept), min_count)


def encode(vocab: Vocab, tokens) -> list[int]:
    return [SOS] + [vocab.id(t) for t in tokens] + [EOS]


def decode(vocab: Vocab, seq) -> list[str]:
    """Token strings of a sequence with the sentinels and padding removed."""
    out = []
    for i in seq:
        i = int(i)
        if i == EOS:
            break
        if i in (SOS, PAD):
            continue
        if not 0 <= i < len(vocab):
            raise ContractError(f"token id {i} outside vocabulary of size {len(vocab)}")
        out.append(vocab.tokens[i])
    return out


def hashed_row(token: str, seed: int, dim: int) -> np.ndarray:
    """Uniform(-0.1, 0.1) vector that depends only on (token, seed, dim)."""
    digest = hashlib.sha256(f"{seed}\x00{dim}\x00{token}".encode()).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
    return rng.uniform(-0.1, 0.1, size=dim)


@dataclass
class EmbedderTable:
    weights: np.ndarray
    trainable: bool = False

    @classmethod
    def frozen_hashed(cls, vocab: Vocab, dim: int, seed: int = 0) -> "EmbedderTable":
        rows = np.stack([hashed_row(tok, seed, dim) for tok in vocab.tokens])
        return cls(rows, trainable=False)

    @property
    def dim(self) -> int:
        return self.weights.shape[1]


def embed(table, seq):
    """Row lookup. ``table`` may be an EmbedderTable, an array or a graph node."""
    from .numerics import getitem, value_of

    weights = table.weights if isinstance(table, EmbedderTable) else table
    ids = np.asarray(seq, dtype=np.int64)
    n_rows = value_of(weights).shape[0]
    if ids.size and (ids.min() < 0 or ids.max() >= n_rows):
        raise ContractError(f"token id out of range for a table with {n_rows} rows")
    return getitem(weights, ids)
