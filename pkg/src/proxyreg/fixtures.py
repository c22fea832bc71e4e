"""Synthetic clip/caption corpus with controlled caption disparity.

Each topic owns synonym lists for its sound source, action, manner and
setting. Captions are filled from a shared set of templates, so captions of
one clip differ in wording but share topic vocabulary. Features are a per-topic
T x F signature (temporal envelope times spectral profile) plus gaussian noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import CaptionRecord
from .errors import ConfigError

TOPICS = [
    {"source": ["dog", "puppy", "hound"], "action": ["barks", "yelps", "howls"],
     "manner": ["loudly", "repeatedly", "angrily"], "place": ["in a yard", "near a fence", "outside a house"]},
    {"source": ["rain", "drizzle", "downpour"], "action": ["falls", "patters", "drums"],
     "manner": ["steadily", "softly", "heavily"], "place": ["on a roof", "on a window", "on leaves"]},
    {"source": ["engine", "motor", "truck"], "action": ["rumbles", "idles", "revs"],
     "manner": ["noisily", "roughly", "continuously"], "place": ["in a garage", "on a street", "by a road"]},
    {"source": ["bird", "sparrow", "songbird"], "action": ["chirps", "sings", "tweets"],
     "manner": ["cheerfully", "sweetly", "brightly"], "place": ["in a tree", "at dawn", "in a garden"]},
    {"source": ["crowd", "audience", "people"], "action": ["cheers", "claps", "chatters"],
     "manner": ["excitedly", "wildly", "happily"], "place": ["in a stadium", "in a hall", "at a concert"]},
    {"source": ["stream", "creek", "brook"], "action": ["flows", "gurgles", "trickles"],
     "manner": ["gently", "calmly", "quietly"], "place": ["over rocks", "through a forest", "down a hill"]},
    {"source": ["bell", "chime", "gong"], "action": ["rings", "tolls", "clangs"],
     "manner": ["slowly", "clearly", "rhythmically"], "place": ["in a church", "in a tower", "at noon"]},
    {"source": ["keyboard", "typewriter", "keys"], "action": ["clicks", "clacks", "taps"],
     "manner": ["rapidly", "busily", "constantly"], "place": ["in an office", "on a desk", "at night"]},
    {"source": ["wind", "breeze", "gust"], "action": ["blows", "whistles", "howls"],
     "manner": ["fiercely", "strongly", "softly"], "place": ["through trees", "across a field", "past a window"]},
    {"source": ["train", "locomotive", "railcar"], "action": ["passes", "rattles", "clatters"],
     "manner": ["quickly", "loudly", "slowly"], "place": ["on tracks", "through a station", "over a bridge"]},
]

TEMPLATES = [
    "a {source} {action} {manner}",
    "the {source} {action} {place}",
    "a {source} {action} {manner} {place}",
    "{place} a {source} {action}",
    "someone hears a {source} that {action} {manner}",
    "the sound of a {source} which {action} {place}",
]


@dataclass(frozen=True)
class FixtureSpec:
    topics: int = 8
    audios_per_topic: int = 4
    captions_per_audio: int = 3
    frames: int = 40
    mel_bins: int = 16
    noise: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if not 2 <= self.topics <= len(TOPICS):
            raise ConfigError(f"topics must be in 2..{len(TOPICS)}")
        if self.captions_per_audio < 2:
            raise ConfigError("captions_per_audio must be >= 2")
        if self.audios_per_topic < 1 or self.frames < 1 or self.mel_bins < 1:
            raise ConfigError("audios_per_topic, frames and mel_bins must be >= 1")
        if self.noise < 0:
            raise ConfigError("noise must be >= 0")


def topic_signature(topic: int, frames: int, mel_bins: int, rng) -> np.ndarray:
    t = np.linspace(0.0, 1.0, frames)
    f = np.arange(mel_bins)
    centre = rng.uniform(0, mel_bins - 1)
    width = rng.uniform(1.0, max(1.0, mel_bins / 4))
    profile = np.exp(-0.5 * ((f - centre) / width) ** 2)
    envelope = 0.5 + 0.5 * np.sin(2 * np.pi * (topic + 1) * t + rng.uniform(0, 2 * np.pi))
    return 2.0 * np.outer(envelope, profile)


def _caption(topic: dict, rng) -> str:
    template = TEMPLATES[rng.integers(len(TEMPLATES))]
    return template.format(**{slot: words[rng.integers(len(words))] for slot, words in topic.items()})


def generate_fixture(spec: FixtureSpec = FixtureSpec()) -> list[CaptionRecord]:
    rng = np.random.default_rng(spec.seed)
    records = []
    for k in range(spec.topics):
        signature = topic_signature(k, spec.frames, spec.mel_bins, rng)
        for j in range(spec.audios_per_topic):
            captions: list[str] = []
            while len(captions) < spec.captions_per_audio:
                c = _caption(TOPICS[k], rng)
                if c not in captions:
                    captions.append(c)
            feats = signature + rng.normal(0.0, spec.noise, size=signature.shape)
            records.append(CaptionRecord(f"t{k:02d}_a{j:03d}", tuple(captions), feats))
    return records


def topic_of(audio_id: str) -> int:
    return int(audio_id[1:3])
