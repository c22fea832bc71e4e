"""Stage 2: encoder / attention-GRU decoder captioner trained with label-smoothed
cross-entropy plus a proxy-constraint term that pulls the pooled decoder
output of each clip toward its stage-1 centroid.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import numerics as nx
from .encoder_net import gru_forward, init_gru, pad_batch, sub_params
from .errors import ConfigError, DataError, DimensionError, DomainError, NumericalError
from .text import EOS, PAD, SOS, Vocab, build_vocab, encode, tokenize

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Stage2Config:
    lam: float = 0.5
    smoothing: float = 0.1
    tf_start: float = 1.0
    tf_end: float = 0.7
    lr: float = 5e-4
    epochs: int = 25
    batch_size: int = 16
    latent_dim: int = 32
    word_dim: int = 16
    hidden_dim: int = 32
    attn_dim: int = 32
    n_time_masks: int = 2
    n_freq_masks: int = 2
    max_time_w: int | None = None
    max_freq_w: int | None = None
    proxy_branch: bool = True
    max_len: int = 20
    min_count: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.lam < 0:
            raise ConfigError("lambda must be >= 0")
        if not 0 <= self.smoothing < 1:
            raise ConfigError("label smoothing must lie in [0, 1)")
        if not 0 <= self.tf_end <= self.tf_start <= 1:
            raise ConfigError("teacher-forcing schedule needs 0 <= end <= start <= 1")
        if not self.lr > 0 or self.epochs < 0 or self.batch_size < 1:
            raise ConfigError("lr > 0, epochs >= 0 and batch_size >= 1 are required")

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(asdict(self), sort_keys=True).encode()).hexdigest()


def tf_prob(cfg: Stage2Config, epoch: int) -> float:
    """Teacher-forcing probability, linear from start (epoch 0) to end (last epoch)."""
    if cfg.epochs <= 1:
        return cfg.tf_start
    return cfg.tf_start + (cfg.tf_end - cfg.tf_start) * (epoch / (cfg.epochs - 1))


# -- augmentation and audio encoder ---------------------------------------------

def spec_augment(x, rng, n_time_masks: int = 2, max_time_w: int | None = None,
                 n_freq_masks: int = 2, max_freq_w: int | None = None) -> np.ndarray:
    """Copy of ``x`` (T, F) with random contiguous time and frequency bands zeroed.

    Band widths are drawn uniformly from 0..max width; the defaults are
    ceil(T/8) and ceil(F/8).
    """
    x = np.array(x, dtype=np.float64)
    t, f = x.shape
    max_time_w = math.ceil(t / 8) if max_time_w is None else max_time_w
    max_freq_w = math.ceil(f / 8) if max_freq_w is None else max_freq_w
    if max_time_w > t or max_freq_w > f or min(max_time_w, max_freq_w) < 0:
        raise ConfigError(f"mask widths ({max_time_w}, {max_freq_w}) exceed feature shape {x.shape}")
    for _ in range(n_time_masks):
        w = int(rng.integers(0, max_time_w + 1))
        start = int(rng.integers(0, t - w + 1))
        x[start:start + w, :] = 0.0
    for _ in range(n_freq_masks):
        w = int(rng.integers(0, max_freq_w + 1))
        start = int(rng.integers(0, f - w + 1))
        x[:, start:start + w] = 0.0
    return x


def pool_matrix(t: int) -> np.ndarray:
    """(ceil(t/2), t) matrix averaging consecutive frame pairs; an odd tail stands alone."""
    out = np.zeros((math.ceil(t / 2), t))
    for i in range(out.shape[0]):
        cols = slice(2 * i, min(2 * i + 2, t))
        out[i, cols] = 1.0 / (cols.stop - cols.start)
    return out


def audio_encode(x, params):
    """(T, F) features -> (ceil(T/4), F') latent via two linear/tanh/stride-2 blocks."""
    xv = nx.value_of(x)
    w1 = nx.value_of(params["enc.W1"])
    if xv.ndim != 2 or xv.shape[1] != w1.shape[0]:
        raise DimensionError(f"encoder expects (T, {w1.shape[0]}) features, got {xv.shape}")
    z = nx.tanh(nx.add(nx.matmul(x, params["enc.W1"]), params["enc.b1"]))
    z = nx.matmul(pool_matrix(xv.shape[0]), z)
    z = nx.tanh(nx.add(nx.matmul(z, params["enc.W2"]), params["enc.b2"]))
    return nx.matmul(pool_matrix(nx.value_of(z).shape[0]), z)


def encode_batch(features, params):
    """Encode clips separately and zero-pad to a (B, T'max, F') stack plus mask."""
    zs = [audio_encode(x, params) for x in features]
    lengths = [nx.value_of(z).shape[0] for z in zs]
    t_max, width = max(lengths), nx.value_of(zs[0]).shape[1]
    padded = [z if n == t_max else nx.concat([z, np.zeros((t_max - n, width))], axis=0)
              for z, n in zip(zs, lengths)]
    mask = np.arange(t_max)[None, :] < np.asarray(lengths)[:, None]
    return nx.stack(padded, axis=0), mask


# -- decoder ----------------------------------------------------------------

def attention(s_prev, Z, params, mask=None, z_proj=None):
    """Additive attention: score_t = v . tanh(W_s s + W_z z_t); returns (context, weights).

    Works on a single state (D_h,) with Z (T', F') or a batch (B, D_h) with
    Z (B, T', F'); ``mask`` flags valid rows of Z.
    """
    zv = nx.value_of(Z)
    sv = nx.value_of(s_prev)
    if zv.shape[-1] != nx.value_of(params["att.W_z"]).shape[0]:
        raise DimensionError(f"attention expects latent width {nx.value_of(params['att.W_z']).shape[0]}")
    if sv.shape[-1] != nx.value_of(params["att.W_s"]).shape[0]:
        raise DimensionError(f"attention expects state width {nx.value_of(params['att.W_s']).shape[0]}")
    if z_proj is None:
        z_proj = nx.matmul(Z, params["att.W_z"])
    q = nx.matmul(s_prev, params["att.W_s"])
    q = nx.reshape(q, nx.value_of(q).shape[:-1] + (1, -1))
    scores = nx.matmul(nx.tanh(nx.add(z_proj, q)), params["att.v"])
    weights = nx.softmax(scores, axis=-1, mask=mask)
    w = nx.reshape(weights, nx.value_of(weights).shape[:-1] + (1, -1))
    context = nx.matmul(w, Z)
    return nx.reshape(context, zv.shape[:-2] + zv.shape[-1:]), weights


def init_state(Z, params, mask=None):
    """Initial decoder state from the (masked) time-average of Z."""
    if mask is None:
        pooled = nx.mean(Z, axis=-2)
    else:
        m = np.asarray(mask, dtype=np.float64)
        pooled = nx.mul(nx.sum(nx.mul(Z, m[..., None]), axis=-2), 1.0 / m.sum(axis=-1, keepdims=True))
    return nx.tanh(nx.add(nx.matmul(pooled, params["dec.init.W"]), params["dec.init.b"]))


def decoder_step(tokens, s_prev, Z, params, mask=None, z_proj=None):
    """Feed ``tokens`` -> (new state, output row in D_e, vocabulary logits, attention weights)."""
    emb = nx.getitem(params["dec.embed"], np.asarray(tokens))
    context, weights = attention(s_prev, Z, params, mask, z_proj)
    s = gru_forward(nx.concat([emb, context], axis=-1), s_prev, sub_params(params, "gru."))
    h = nx.add(nx.matmul(s, params["dec.out.W"]), params["dec.out.b"])
    logits = nx.add(nx.matmul(h, params["dec.vocab.W"]), params["dec.vocab.b"])
    return s, h, logits, weights


@dataclass
class DecoderTrace:
    H: object            # (B, L-1, D_e)
    logits: object       # (B, L-1, V)
    inputs: np.ndarray   # token fed at each step
    teacher: np.ndarray  # True where the ground-truth token was fed
    targets: np.ndarray  # token to predict at each step (PAD beyond the caption)
    mask: np.ndarray     # valid (non-pad) steps
    weights: list = field(default_factory=list, repr=False)


def rollout_batch(captions, Z, params, tf_prob: float, rng, z_mask=None) -> DecoderTrace:
    """Run the decoder over a batch of target captions under scheduled sampling.

    At every step after <sos> each row independently feeds the ground-truth
    previous token with probability ``tf_prob`` and otherwise the argmax of its
    own previous logits.
    """
    if not 0.0 <= tf_prob <= 1.0:
        raise ConfigError(f"tf_prob must lie in [0, 1], got {tf_prob}")
    ids, lengths = pad_batch(captions)
    if np.any(lengths < 2):
        raise DomainError("target captions need at least <sos> and <eos>")
    batch, steps = ids.shape[0], ids.shape[1] - 1
    teacher = rng.random((batch, steps)) < tf_prob
    teacher[:, 0] = True
    z_proj = nx.matmul(Z, params["att.W_z"])
    s = init_state(Z, params, z_mask)
    inputs = np.zeros((batch, steps), dtype=np.int64)
    hs, logits, weights = [], [], []
    prev = None
    for t in range(steps):
        tok = ids[:, t] if prev is None else np.where(teacher[:, t], ids[:, t], prev)
        inputs[:, t] = tok
        s, h, logit, w = decoder_step(tok, s, Z, params, z_mask, z_proj)
        prev = np.argmax(nx.value_of(logit), axis=-1)
        hs.append(h)
        logits.append(logit)
        weights.append(nx.value_of(w))
    targets = ids[:, 1:]
    mask = np.arange(steps)[None, :] < (lengths - 1)[:, None]
    return DecoderTrace(nx.stack(hs, axis=1), nx.stack(logits, axis=1), inputs, teacher,
                        targets, mask, weights)


def rollout(caption, Z, params, tf_prob: float, rng) -> DecoderTrace:
    """Single-caption rollout over one (T', F') latent."""
    zv = nx.value_of(Z)
    trace = rollout_batch([caption], nx.reshape(Z, (1,) + zv.shape), params, tf_prob, rng)
    return DecoderTrace(nx.getitem(trace.H, 0), nx.getitem(trace.logits, 0), trace.inputs[0],
                        trace.teacher[0], trace.targets[0], trace.mask[0],
                        [w[0] for w in trace.weights])


def greedy_decode(Z, params, max_len: int) -> list[int]:
    """Argmax decoding from <sos> until <eos> or ``max_len`` generated tokens.

    A sequence cut off by ``max_len`` gets a closing <eos> appended.
    """
    if max_len < 1:
        raise ConfigError("max_len must be >= 1")
    Z = nx.value_of(Z)
    z_proj = Z @ nx.value_of(params["att.W_z"])
    s = init_state(Z, params)
    seq = [SOS]
    for _ in range(max_len):
        s, _, logit, _ = decoder_step(seq[-1], s, Z, params, None, z_proj)
        tok = int(np.argmax(logit))
        seq.append(tok)
        if tok == EOS:
            return seq
    return seq + [EOS]


# -- losses -----------------------------------------------------------------

def ce_loss(logits, targets, smoothing: float = 0.0):
    """Label-smoothed cross-entropy averaged over the non-pad steps of each caption.

    The target distribution is (1 - eps) * onehot + eps / V. Batched input
    (B, L, V) returns the mean of the per-caption losses.
    """
    lv = nx.value_of(logits)
    targets = np.asarray(targets)
    if lv.shape[:-1] != targets.shape:
        raise DimensionError(f"logits {lv.shape} do not match targets {targets.shape}")
    v = lv.shape[-1]
    mask = targets != PAD
    counts = mask.sum(axis=-1)
    if np.any(counts == 0):
        raise DomainError("target sequence has no non-pad steps")
    onehot = np.zeros(lv.shape)
    np.put_along_axis(onehot, targets[..., None], 1.0, -1)
    q = (1.0 - smoothing) * onehot + smoothing / v
    logp = nx.sub(logits, nx.logsumexp(logits, axis=-1, keepdims=True))
    per_step = nx.scale(nx.sum(nx.mul(logp, q), axis=-1), -1.0)
    per_caption = nx.mul(nx.sum(nx.mul(per_step, mask.astype(np.float64)), axis=-1), 1.0 / counts)
    return nx.mean(per_caption) if targets.ndim > 1 else per_caption


def pc_loss(H, d, mask=None):
    """1 - cos(mean(H) + max(H), d); batched input returns the batch mean."""
    hv, dv = nx.value_of(H), nx.value_of(d)
    if hv.shape[-1] != dv.shape[-1]:
        raise ConfigError(f"decoder output width {hv.shape[-1]} must equal the centroid dimension {dv.shape[-1]}")
    e_hat = nx.mean_max_pool(H, axis=-2, mask=mask)
    per = nx.sub(1.0, nx.cosine(e_hat, d))
    return nx.mean(per) if hv.ndim > 2 else per


@dataclass
class LossBreakdown:
    ce: object
    pc: object
    total: object

    def as_floats(self) -> "LossBreakdown":
        return LossBreakdown(float(nx.value_of(self.ce)), float(nx.value_of(self.pc)),
                             float(nx.value_of(self.total)))


def combined_loss(ce, pc, lam: float) -> LossBreakdown:
    """total = ce + lam * pc; with lam == 0 the total is ce itself."""
    if lam < 0:
        raise ConfigError("lambda must be >= 0")
    total = ce if lam == 0 else nx.add(ce, nx.scale(pc, lam))
    return LossBreakdown(ce, pc, total)


# -- model and training ---------------------------------------------------------

def init_captioner(vocab_size: int, mel_bins: int, embed_dim: int, cfg: Stage2Config, rng) -> dict:
    def u(k, shape):
        return rng.uniform(-k, k, size=shape)

    f, d_w, d_h, a = cfg.latent_dim, cfg.word_dim, cfg.hidden_dim, cfg.attn_dim
    p = {
        "enc.W1": u(1 / math.sqrt(mel_bins), (mel_bins, f)),
        "enc.b1": np.zeros(f),
        "enc.W2": u(1 / math.sqrt(f), (f, f)),
        "enc.b2": np.zeros(f),
        "dec.embed": u(0.1, (vocab_size, d_w)),
        "dec.init.W": u(1 / math.sqrt(f), (f, d_h)),
        "dec.init.b": np.zeros(d_h),
        "att.W_s": u(1 / math.sqrt(d_h), (d_h, a)),
        "att.W_z": u(1 / math.sqrt(f), (f, a)),
        "att.v": u(1 / math.sqrt(a), (a,)),
    }
    p.update({f"gru.{k}": v for k, v in init_gru(rng, d_w + f, d_h).items()})
    p.update({
        "dec.out.W": u(1 / math.sqrt(d_h), (d_h, embed_dim)),
        "dec.out.b": np.zeros(embed_dim),
        "dec.vocab.W": u(1 / math.sqrt(embed_dim), (embed_dim, vocab_size)),
        "dec.vocab.b": np.zeros(vocab_size),
    })
    return p


@dataclass
class CaptionModel:
    config: Stage2Config
    vocab: Vocab
    params: dict[str, np.ndarray] = field(repr=False)
    rng_state: dict | None = field(default=None, repr=False)
    epoch: int = 0

    @property
    def embed_dim(self) -> int:
        return self.params["dec.out.W"].shape[1]

    def caption(self, features, max_len: int | None = None) -> list[int]:
        z = audio_encode(features, self.params)
        return greedy_decode(z, self.params, max_len or self.config.max_len)


@dataclass
class TrainHistory:
    epochs: list[LossBreakdown] = field(default_factory=list)
    steps: list[LossBreakdown] = field(default_factory=list)
    tf_probs: list[float] = field(default_factory=list)


def batch_objective(params, features, captions, centroids, cfg: Stage2Config, tf: float, rng):
    """Forward one batch; returns (LossBreakdown of nodes/arrays, trace)."""
    Z, z_mask = encode_batch(features, params)
    trace = rollout_batch(captions, Z, params, tf, rng, z_mask)
    ce = ce_loss(trace.logits, trace.targets, cfg.smoothing)
    pc = pc_loss(trace.H, np.stack(centroids), trace.mask) if cfg.proxy_branch else 0.0
    return combined_loss(ce, pc, cfg.lam if cfg.proxy_branch else 0.0), trace


def train_captioner(records, centroids, cfg: Stage2Config, vocab: Vocab | None = None,
                    on_epoch_end: Callable[[int, CaptionModel], None] | None = None):
    """Train the captioner; returns ``(model, TrainHistory)``.

    Each epoch visits every clip once in shuffled order, with one caption drawn
    uniformly per clip as the target and SpecAugment applied to its features.
    """
    missing = [r.audio_id for r in records if r.audio_id not in centroids]
    if missing:
        raise DataError(f"no centroid for audio ids: {', '.join(missing)}")
    if vocab is None:
        vocab = build_vocab([tokenize(c) for r in records for c in r.captions], cfg.min_count)
    mel_bins = records[0].features.shape[1]
    if any(r.features.shape[1] != mel_bins for r in records):
        raise DataError("all clips must share the same number of mel bins")
    init_rng = np.random.default_rng(cfg.seed)
    params = init_captioner(len(vocab), mel_bins, centroids.dim, cfg, init_rng)
    rng = np.random.default_rng([cfg.seed, 2])
    state = nx.AdamState()
    history = TrainHistory()
    for epoch in range(cfg.epochs):
        tf = tf_prob(cfg, epoch)
        order = rng.permutation(len(records))
        epoch_losses = []
        for start in range(0, len(order), cfg.batch_size):
            recs = [records[i] for i in order[start:start + cfg.batch_size]]
            feats = [spec_augment(r.features, rng, cfg.n_time_masks, cfg.max_time_w,
                                  cfg.n_freq_masks, cfg.max_freq_w) for r in recs]
            caps = [encode(vocab, tokenize(r.captions[int(rng.integers(len(r.captions)))])) for r in recs]
            graph = nx.Graph()
            bound = graph.bind(params)
            try:
                losses, _ = batch_objective(bound, feats, caps, [centroids[r.audio_id] for r in recs],
                                            cfg, tf, rng)
            except NumericalError as exc:
                raise NumericalError(f"stage-2 epoch {epoch} batch {start // cfg.batch_size}: {exc}") from None
            grads = nx.backward(graph, losses.total)
            params, state = nx.adam_step(params, grads, state, cfg.lr)
            step = losses.as_floats()
            history.steps.append(step)
            epoch_losses.append(step)
        history.epochs.append(LossBreakdown(*(float(np.mean([getattr(s, k) for s in epoch_losses]))
                                              for k in ("ce", "pc", "total"))))
        history.tf_probs.append(tf)
        log.debug("stage-2 epoch %d tf=%.3f %s", epoch, tf, history.epochs[-1])
        if on_epoch_end is not None:
            on_epoch_end(epoch, CaptionModel(cfg, vocab, params, rng.bit_generator.state, epoch + 1))
    return CaptionModel(cfg, vocab, params, rng.bit_generator.state, cfg.epochs), history
