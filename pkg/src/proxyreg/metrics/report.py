"""Metric report assembly and its CSV form."""

from __future__ import annotations

from dataclasses import dataclass, fields

from ..data import atomic_write
from ..errors import DataError
from .ngram import bleu, cider, rouge_l

METRIC_ORDER = ("bleu1", "bleu2", "bleu3", "bleu4", "rougeL", "cider")


@dataclass(frozen=True)
class MetricReport:
    bleu1: float
    bleu2: float
    bleu3: float
    bleu4: float
    rougeL: float
    cider: float

    def items(self):
        return [(f.name, getattr(self, f.name)) for f in fields(self)]

    def to_csv(self) -> str:
        return "metric,value\n" + "".join(f"{k},{v:.6f}\n" for k, v in self.items())

    def save(self, path) -> None:
        atomic_write(path, self.to_csv())


def evaluate(predictions: dict, references: dict, cider_scaled: bool = False) -> MetricReport:
    """Score ``{audio_id: tokens}`` against ``{audio_id: [tokens, ...]}``.

    Items are visited in sorted id order so the sums are reproducible.
    """
    missing = sorted(set(references) - set(predictions))
    extra = sorted(set(predictions) - set(references))
    if missing or extra:
        parts = []
        if missing:
            parts.append(f"no prediction for {', '.join(missing)}")
        if extra:
            parts.append(f"no references for {', '.join(extra)}")
        raise DataError("; ".join(parts))
    ids = sorted(references)
    cands = [list(predictions[i]) for i in ids]
    refs = [[list(r) for r in references[i]] for i in ids]
    b = bleu(cands, refs, 4)
    return MetricReport(*b, rouge_l(cands, refs), cider(cands, refs, scaled=cider_scaled))
