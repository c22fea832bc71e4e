"""Caption embedding network (LSTM, per-step projection, mean+max pooling) and
the GRU cell used by the captioning decoder.

Parameters live in flat ``dict[str, ndarray]`` maps so that the same functions
run eagerly on arrays or on a graph after ``Graph.bind``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics as nx
from .errors import DimensionError, DomainError
from .text import PAD

LSTM_GATES = ("i", "f", "g", "o")
GRU_GATES = ("z", "r", "n")


@dataclass(frozen=True)
class EncoderConfig:
    word_dim: int = 16
    hidden_dim: int = 32
    embed_dim: int = 32
    bidirectional: bool = False

    def __post_init__(self):
        if min(self.word_dim, self.hidden_dim, self.embed_dim) < 1:
            raise DomainError("encoder dimensions must be >= 1")


def _uniform(rng, k, shape):
    return rng.uniform(-k, k, size=shape)


def init_lstm(rng, d_in: int, d_h: int, prefix: str = "") -> dict[str, np.ndarray]:
    """Gate weights act on [x_t, h_{t-1}]; forget bias starts at 1."""
    k = 1.0 / np.sqrt(d_h)
    p = {}
    for gate in LSTM_GATES:
        p[f"{prefix}W_{gate}"] = _uniform(rng, k, (d_in + d_h, d_h))
        p[f"{prefix}b_{gate}"] = np.ones(d_h) if gate == "f" else _uniform(rng, k, (d_h,))
    return p


def init_gru(rng, d_in: int, d_h: int, prefix: str = "") -> dict[str, np.ndarray]:
    k = 1.0 / np.sqrt(d_h)
    p = {}
    for gate in GRU_GATES:
        p[f"{prefix}W_{gate}"] = _uniform(rng, k, (d_in + d_h, d_h))
        p[f"{prefix}b_{gate}"] = _uniform(rng, k, (d_h,))
    return p


def sub_params(params, prefix: str) -> dict:
    n = len(prefix)
    return {k[n:]: v for k, v in params.items() if k.startswith(prefix)}


def _lstm_dims(p):
    w = nx.value_of(p["W_i"])
    d_h = w.shape[1]
    return w.shape[0] - d_h, d_h


def lstm_cell(x_t, h, c, p):
    xh = nx.concat([x_t, h], axis=-1)
    i = nx.sigmoid(nx.add(nx.matmul(xh, p["W_i"]), p["b_i"]))
    f = nx.sigmoid(nx.add(nx.matmul(xh, p["W_f"]), p["b_f"]))
    g = nx.tanh(nx.add(nx.matmul(xh, p["W_g"]), p["b_g"]))
    o = nx.sigmoid(nx.add(nx.matmul(xh, p["W_o"]), p["b_o"]))
    c = nx.add(nx.mul(f, c), nx.mul(i, g))
    h = nx.mul(o, nx.tanh(c))
    return h, c


def _run_lstm(x, p, h0, c0):
    """x: (B, L, D_in) -> (B, L, D_h), forward in time."""
    d_in, d_h = _lstm_dims(p)
    xv = nx.value_of(x)
    if xv.shape[-1] != d_in:
        raise DimensionError(f"LSTM expects input width {d_in}, got {xv.shape[-1]}")
    batch, length = xv.shape[0], xv.shape[1]
    if length < 1:
        raise DomainError("LSTM needs at least one time step")
    h = np.zeros((batch, d_h)) if h0 is None else h0
    c = np.zeros((batch, d_h)) if c0 is None else c0
    outs = []
    for t in range(length):
        h, c = lstm_cell(nx.getitem(x, (slice(None), t)), h, c, p)
        outs.append(h)
    return nx.stack(outs, axis=1)


def lstm_forward_batch(x, lengths, params, bidirectional: bool = False):
    """Run an LSTM over right-padded sequences.

    ``x`` is (B, L, D_in), ``lengths`` the valid length of each row. Outputs
    at padded positions are unspecified. When ``bidirectional`` the reverse
    pass uses the ``rev.``-prefixed weights over each sequence reversed within
    its own length, and its outputs are realigned to the original positions
    before concatenation.
    """
    fwd = {g: params[g] for g in params if not g.startswith("rev.")}
    out = _run_lstm(x, fwd, None, None)
    if not bidirectional:
        return out
    lengths = np.asarray(lengths)
    batch, length = nx.value_of(x).shape[:2]
    t = np.arange(length)[None, :]
    rev_t = np.where(t < lengths[:, None], lengths[:, None] - 1 - t, t)
    b_idx = np.broadcast_to(np.arange(batch)[:, None], rev_t.shape)
    x_rev = nx.getitem(x, (b_idx, rev_t))
    out_rev = _run_lstm(x_rev, sub_params(params, "rev."), None, None)
    return nx.concat([out, nx.getitem(out_rev, (b_idx, rev_t))], axis=-1)


def lstm_forward(x, params, h0=None, c0=None, bidirectional: bool = False):
    """LSTM over one (L, D_in) sequence; returns (L, D_h) or (L, 2*D_h).

    Initial states default to zero.
    """
    xv = nx.value_of(x)
    if xv.ndim != 2:
        raise DimensionError(f"expected an (L, D_in) sequence, got shape {xv.shape}")
    if xv.shape[0] < 1:
        raise DomainError("LSTM needs at least one time step")
    xb = nx.reshape(x, (1,) + xv.shape)
    h0b = None if h0 is None else nx.reshape(h0, (1, -1))
    c0b = None if c0 is None else nx.reshape(c0, (1, -1))
    fwd = {g: params[g] for g in params if not g.startswith("rev.")}
    out = _run_lstm(xb, fwd, h0b, c0b)
    if bidirectional:
        rev = nx.getitem(xb, (slice(None), slice(None, None, -1)))
        out_rev = _run_lstm(rev, sub_params(params, "rev."), None, None)
        out_rev = nx.getitem(out_rev, (slice(None), slice(None, None, -1)))
        out = nx.concat([out, out_rev], axis=-1)
    return nx.getitem(out, 0)


def gru_forward(x_t, h_prev, p):
    """One GRU step: h' = (1 - z) * n + z * h_prev."""
    w = nx.value_of(p["W_z"])
    d_h = w.shape[1]
    d_in = w.shape[0] - d_h
    if nx.value_of(x_t).shape[-1] != d_in or nx.value_of(h_prev).shape[-1] != d_h:
        raise DimensionError(f"GRU expects input width {d_in} and state width {d_h}")
    xh = nx.concat([x_t, h_prev], axis=-1)
    z = nx.sigmoid(nx.add(nx.matmul(xh, p["W_z"]), p["b_z"]))
    r = nx.sigmoid(nx.add(nx.matmul(xh, p["W_r"]), p["b_r"]))
    xrh = nx.concat([x_t, nx.mul(r, h_prev)], axis=-1)
    n = nx.tanh(nx.add(nx.matmul(xrh, p["W_n"]), p["b_n"]))
    return nx.add(nx.mul(nx.sub(1.0, z), n), nx.mul(z, h_prev))


def init_caption_encoder(cfg: EncoderConfig, rng) -> dict[str, np.ndarray]:
    params = {f"lstm.{k}": v for k, v in init_lstm(rng, cfg.word_dim, cfg.hidden_dim).items()}
    if cfg.bidirectional:
        params.update({f"lstm.rev.{k}": v
                       for k, v in init_lstm(rng, cfg.word_dim, cfg.hidden_dim).items()})
    d_out = cfg.hidden_dim * (2 if cfg.bidirectional else 1)
    k = 1.0 / np.sqrt(d_out)
    params["proj.W"] = _uniform(rng, k, (d_out, cfg.embed_dim))
    params["proj.b"] = _uniform(rng, k, (cfg.embed_dim,))
    return params


def pad_batch(seqs) -> tuple[np.ndarray, np.ndarray]:
    lengths = np.array([len(s) for s in seqs])
    ids = np.full((len(seqs), lengths.max()), PAD, dtype=np.int64)
    for row, s in enumerate(seqs):
        ids[row, : len(s)] = s
    return ids, lengths


def caption_embed_batch(seqs, table, params, bidirectional: bool = False):
    """Proxy embeddings for a list of token sequences -> (B, D_e)."""
    from .text import embed

    ids, lengths = pad_batch(seqs)
    x = embed(table, ids)
    h = lstm_forward_batch(x, lengths, sub_params(params, "lstm."), bidirectional)
    g = nx.add(nx.matmul(h, params["proj.W"]), params["proj.b"])
    mask = np.arange(ids.shape[1])[None, :] < lengths[:, None]
    return nx.mean_max_pool(g, axis=1, mask=mask)


def caption_embed(seq, table, params, bidirectional: bool = False):
    """Proxy embedding of one caption: pooled per-step projections of the LSTM."""
    from .text import embed

    x = embed(table, seq)
    h = lstm_forward(x, sub_params(params, "lstm."), bidirectional=bidirectional)
    g = nx.add(nx.matmul(h, params["proj.W"]), params["proj.b"])
    return nx.mean_max_pool(g, axis=0)
