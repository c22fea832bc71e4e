"""Tiny captioner instances shared by the captioner and acceptance tests (V=12, D<=8, T<=6)."""

import numpy as np

from proxyreg.captioner import Stage2Config, init_captioner
from proxyreg.text import EOS, SOS

V, MEL, D_E, T = 12, 5, 8, 6
TINY_CFG = Stage2Config(latent_dim=6, word_dim=4, hidden_dim=7, attn_dim=5, lr=0.01, epochs=2, batch_size=2)


def tiny_params(seed):
    return init_captioner(V, MEL, D_E, TINY_CFG, np.random.default_rng(seed))


def tiny_batch(seed, batch=2):
    """Features, encoded captions and centroids for a small random batch."""
    rng = np.random.default_rng(1000 + seed)
    feats = [rng.normal(size=(int(rng.integers(3, T + 1)), MEL)) for _ in range(batch)]
    caps = [[SOS] + [int(t) for t in rng.integers(4, V, size=int(rng.integers(1, 4)))] + [EOS]
            for _ in range(batch)]
    cents = [rng.normal(size=D_E) for _ in range(batch)]
    return feats, caps, cents
