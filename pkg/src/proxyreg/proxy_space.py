"""Stage 1: learn a caption embedding space where captions of the same clip
cluster around a shared centroid, then export one centroid per clip.

Embeddings of a batch are arranged as an (N, M, D) array: N clips, M captions
each. Similarity rows are ordered clip-major, row ``n * M + m``.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import numerics as nx
from .data import atomic_write, dumps
from .encoder_net import EncoderConfig, caption_embed_batch, init_caption_encoder
from .errors import ConfigError, DataError, DomainError, NumericalError
from .text import EmbedderTable, Vocab, build_vocab, encode, tokenize

log = logging.getLogger(__name__)

CENTROID_FORMAT = "centroids/1"
LOSS_VARIANTS = ("exclusive", "inclusive")


@dataclass(frozen=True)
class ProxyConfig:
    lr: float = 0.01
    epochs: int = 500
    n_audios: int = 64
    m_captions: int = 3
    scale_init: float = 10.0
    bias_init: float = -5.0
    min_scale: float = 1e-4
    loss_variant: str = "exclusive"
    word_dim: int = 16
    hidden_dim: int = 32
    embed_dim: int = 32
    bidirectional: bool = False
    min_count: int = 1
    embed_seed: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.loss_variant not in LOSS_VARIANTS:
            raise ConfigError(f"loss_variant must be one of {LOSS_VARIANTS}")
        if self.m_captions < 2:
            raise ConfigError("m_captions must be >= 2 for leave-one-out centroids")
        if self.n_audios < 1 or self.epochs < 0 or not self.lr > 0:
            raise ConfigError("n_audios >= 1, epochs >= 0 and lr > 0 are required")
        if not self.scale_init > 0:
            raise ConfigError("scale_init must be positive")

    @property
    def encoder(self) -> EncoderConfig:
        return EncoderConfig(self.word_dim, self.hidden_dim, self.embed_dim, self.bidirectional)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(asdict(self), sort_keys=True).encode()).hexdigest()


@dataclass(frozen=True)
class BatchSpec:
    record_indices: tuple[int, ...]
    audio_ids: tuple[str, ...]
    caption_indices: tuple[tuple[int, ...], ...]


def sample_batch(records, n: int, m: int, rng) -> BatchSpec:
    """N distinct clips drawn uniformly, M distinct captions drawn per clip."""
    if m < 1 or n < 1:
        raise ConfigError("batch sizes must be positive")
    for rec in records:
        if len(rec.captions) < m:
            raise DataError(f"audio {rec.audio_id!r} has {len(rec.captions)} captions, need {m}")
    if len(records) < n:
        raise DataError(f"batch needs {n} audios, dataset has {len(records)}")
    picks = rng.choice(len(records), size=n, replace=False)
    caps = tuple(tuple(int(j) for j in rng.choice(len(records[i].captions), size=m, replace=False))
                 for i in picks)
    return BatchSpec(tuple(int(i) for i in picks),
                     tuple(records[i].audio_id for i in picks), caps)


def centroid_full(E, k: int):
    """Mean of all M embeddings of clip ``k``."""
    return nx.mean(nx.getitem(E, k), axis=0)


def centroid_loo(E, n: int, m: int):
    """Mean of clip ``n``'s embeddings excluding caption ``m``."""
    ev = nx.value_of(E)
    big_m = ev.shape[1]
    if big_m < 2:
        raise DomainError("leave-one-out centroid needs M >= 2")
    keep = [j for j in range(big_m) if j != m]
    return nx.mean(nx.getitem(E, (n, keep)), axis=0)


def positive_mask(n: int, m: int) -> np.ndarray:
    """(N*M, N) boolean mask of each row's own-clip column."""
    mask = np.zeros((n * m, n), dtype=bool)
    mask[np.arange(n * m), np.arange(n * m) // m] = True
    return mask


def similarity_matrix(E, scale, bias):
    """S[n*M + m, k] = scale * cos(e_nm, c_k) + bias.

    c_k is the full centroid of clip k, except in the clip's own column where
    the leave-one-out centroid of e_nm is used.
    """
    ev = nx.value_of(E)
    if ev.ndim != 3:
        raise DomainError(f"embeddings must be (N, M, D), got {ev.shape}")
    n, m, d = ev.shape
    if m < 2:
        raise DomainError("similarity matrix needs M >= 2 captions per clip")
    if not float(nx.value_of(scale)) > 0:
        raise DomainError("similarity scale must be positive")
    full = nx.mean(E, axis=1)                                     # (N, D)
    loo = nx.scale(nx.sub(nx.scale(nx.reshape(full, (n, 1, d)), m), E), 1.0 / (m - 1))
    rows = nx.reshape(nx.l2_normalize(E), (n * m, d))
    cos_all = nx.matmul(rows, nx.transpose(nx.l2_normalize(full)))   # (N*M, N)
    cos_pos = nx.reshape(nx.cosine(E, loo), (n * m, 1))
    mask = positive_mask(n, m).astype(np.float64)
    cos = nx.add(nx.mul(cos_all, 1.0 - mask), nx.mul(cos_pos, mask))
    return nx.add(nx.mul(cos, scale), bias)


def ge2e_loss(S, variant: str = "exclusive"):
    """Mean over rows of  -S[row, own] + log sum_k exp(S[row, k]).

    ``exclusive`` drops the own-clip column from the log-sum-exp; ``inclusive``
    keeps it, which makes every row loss non-negative.
    """
    if variant not in LOSS_VARIANTS:
        raise ConfigError(f"unknown loss variant {variant!r}")
    sv = nx.value_of(S)
    rows, n = sv.shape
    if rows % n:
        raise DomainError(f"similarity matrix of shape {sv.shape} is not (N*M, N)")
    if variant == "exclusive" and n < 2:
        raise DomainError("exclusive loss needs N >= 2 clips")
    pos = positive_mask(n, rows // n)
    positive = nx.sum(nx.mul(S, pos.astype(np.float64)), axis=1)
    lse = nx.logsumexp(S, axis=1, mask=~pos if variant == "exclusive" else None)
    return nx.mean(nx.sub(lse, positive))


@dataclass
class ProxyModel:
    config: ProxyConfig
    vocab: Vocab
    table: EmbedderTable
    params: dict[str, np.ndarray] = field(repr=False)
    rng_state: dict | None = field(default=None, repr=False)

    @property
    def encoder_params(self) -> dict[str, np.ndarray]:
        return {k: v for k, v in self.params.items() if k not in ("scale", "bias")}

    def embed_captions(self, captions) -> np.ndarray:
        """Proxy embeddings of raw caption strings -> (len(captions), D_e)."""
        seqs = [encode(self.vocab, tokenize(c)) for c in captions]
        return caption_embed_batch(seqs, self.table, self.encoder_params, self.config.bidirectional)


def init_proxy_model(records, cfg: ProxyConfig, vocab: Vocab | None = None) -> ProxyModel:
    if vocab is None:
        vocab = build_vocab([tokenize(c) for r in records for c in r.captions], cfg.min_count)
    table = EmbedderTable.frozen_hashed(vocab, cfg.word_dim, cfg.embed_seed)
    rng = np.random.default_rng(cfg.seed)
    params = init_caption_encoder(cfg.encoder, rng)
    params["scale"] = np.array(cfg.scale_init)
    params["bias"] = np.array(cfg.bias_init)
    return ProxyModel(cfg, vocab, table, params)


def batch_loss(model: ProxyModel, seqs_by_record, batch: BatchSpec, params):
    """Loss of one batch; ``params`` may be arrays or graph nodes."""
    cfg = model.config
    seqs = [seqs_by_record[i][j] for i, caps in zip(batch.record_indices, batch.caption_indices)
            for j in caps]
    n, m = len(batch.record_indices), len(batch.caption_indices[0])
    enc = {k: v for k, v in params.items() if k not in ("scale", "bias")}
    emb = caption_embed_batch(seqs, model.table, enc, cfg.bidirectional)
    E = nx.reshape(emb, (n, m, nx.value_of(emb).shape[-1]))
    S = similarity_matrix(E, params["scale"], params["bias"])
    return ge2e_loss(S, cfg.loss_variant)


def train_proxy(records, cfg: ProxyConfig, vocab: Vocab | None = None,
                model: ProxyModel | None = None):
    """Train the caption encoder; returns ``(model, per-epoch mean losses)``.

    Each epoch draws ceil(#clips / N) independent batches. When the dataset has
    fewer than N clips every batch uses all of them.
    """
    if model is None:
        model = init_proxy_model(records, cfg, vocab)
    n = cfg.n_audios
    if len(records) < n:
        log.warning("dataset has %d audios, fewer than N=%d; using N=%d", len(records), n, len(records))
        n = len(records)
    if cfg.loss_variant == "exclusive" and n < 2:
        raise DataError("exclusive loss needs at least 2 audios")
    seqs_by_record = [[encode(model.vocab, tokenize(c)) for c in r.captions] for r in records]
    batches_per_epoch = math.ceil(len(records) / n)
    rng = np.random.default_rng([cfg.seed, 1])
    params = dict(model.params)
    state = nx.AdamState()
    history = []
    for epoch in range(cfg.epochs):
        losses = []
        for step in range(batches_per_epoch):
            batch = sample_batch(records, n, cfg.m_captions, rng)
            graph = nx.Graph()
            bound = graph.bind(params)
            try:
                loss = batch_loss(model, seqs_by_record, batch, bound)
            except NumericalError as exc:
                raise NumericalError(f"stage-1 epoch {epoch} step {step}: {exc}") from None
            grads = nx.backward(graph, loss)
            params, state = nx.adam_step(params, grads, state, cfg.lr)
            params["scale"] = np.maximum(params["scale"], cfg.min_scale)
            losses.append(float(loss.value))
        history.append(float(np.mean(losses)))
        log.debug("stage-1 epoch %d loss %.6f", epoch, history[-1])
    model = ProxyModel(cfg, model.vocab, model.table, params, rng.bit_generator.state)
    return model, history


@dataclass
class CentroidStore:
    dim: int
    entries: dict[str, np.ndarray]
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        for audio_id, vec in self.entries.items():
            if np.shape(vec) != (self.dim,):
                raise DataError(f"centroid for {audio_id!r} has shape {np.shape(vec)}, expected ({self.dim},)")

    def __getitem__(self, audio_id: str) -> np.ndarray:
        try:
            return self.entries[audio_id]
        except KeyError:
            raise DataError(f"no centroid for audio {audio_id!r}") from None

    def __contains__(self, audio_id: str) -> bool:
        return audio_id in self.entries

    def to_json(self) -> dict:
        return {
            "format": CENTROID_FORMAT,
            "dim": self.dim,
            "provenance": self.provenance,
            "entries": [{"audio_id": k, "values": self.entries[k].tolist()} for k in sorted(self.entries)],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "CentroidStore":
        if doc.get("format") != CENTROID_FORMAT:
            raise DataError(f"unsupported centroid format {doc.get('format')!r}")
        dim = int(doc["dim"])
        entries = {}
        for item in doc["entries"]:
            if item["audio_id"] in entries:
                raise DataError(f"duplicate centroid for {item['audio_id']!r}")
            entries[item["audio_id"]] = np.asarray(item["values"], dtype=np.float64)
        return cls(dim, entries, dict(doc.get("provenance", {})))

    def save(self, path) -> None:
        atomic_write(path, dumps(self.to_json(), indent=1) + "\n")

    @classmethod
    def load(cls, path) -> "CentroidStore":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise DataError(f"centroid file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: {exc}") from None
        return cls.from_json(doc)


def export_centroids(records, model: ProxyModel) -> CentroidStore:
    """Full-mean centroid of every clip's caption embeddings."""
    entries = {}
    for rec in records:
        if not rec.captions:
            raise DataError(f"audio {rec.audio_id!r} has no captions")
        entries[rec.audio_id] = np.mean(model.embed_captions(rec.captions), axis=0)
    cfg = model.config
    return CentroidStore(cfg.embed_dim, entries, {"seed": cfg.seed, "config_sha256": cfg.digest()})
