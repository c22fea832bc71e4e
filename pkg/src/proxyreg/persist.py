"""Checkpoint, prediction and run-manifest files.

Every document carries a ``format`` tag and loaders refuse tags they do not
know.
"""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

from .captioner import CaptionModel, Stage2Config
from .data import atomic_write, dumps, sha256_file, tensor_from_json, tensor_to_json
from .errors import DataError
from .proxy_space import ProxyConfig, ProxyModel
from .text import EmbedderTable, Vocab

CKPT_FORMAT = "ckpt/1"
PREDICTIONS_FORMAT = "predictions/1"
MANIFEST_FORMAT = "manifest/1"


def _read_json(path, what: str) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise DataError(f"{what} not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: {exc}") from None


def checkpoint_to_json(model, epoch: int, history=None) -> dict:
    kind = "proxy" if isinstance(model, ProxyModel) else "captioner"
    doc = {
        "format": CKPT_FORMAT,
        "kind": kind,
        "config": asdict(model.config),
        "vocab": model.vocab.to_json(),
        "params": {k: tensor_to_json(model.params[k]) for k in sorted(model.params)},
        "rng_state": model.rng_state,
        "epoch": epoch,
    }
    if kind == "proxy":
        doc["embedder"] = {"mode": "frozen-hashed", "seed": model.config.embed_seed,
                           "dim": model.config.word_dim}
    if history is not None:
        doc["history"] = history
    return doc


def save_checkpoint(path, model, epoch: int, history=None) -> None:
    atomic_write(path, dumps(checkpoint_to_json(model, epoch, history), indent=1) + "\n")


def load_checkpoint(path, kind: str | None = None):
    """Return a ProxyModel or CaptionModel; ``kind`` restricts which is accepted."""
    doc = _read_json(path, "checkpoint")
    if doc.get("format") != CKPT_FORMAT:
        raise DataError(f"{path}: unsupported checkpoint format {doc.get('format')!r}")
    if kind is not None and doc.get("kind") != kind:
        raise DataError(f"{path}: expected a {kind} checkpoint, found {doc.get('kind')!r}")
    vocab = Vocab.from_json(doc["vocab"])
    params = {k: tensor_from_json(v) for k, v in doc["params"].items()}
    if doc["kind"] == "proxy":
        cfg = ProxyConfig(**doc["config"])
        table = EmbedderTable.frozen_hashed(vocab, cfg.word_dim, cfg.embed_seed)
        return ProxyModel(cfg, vocab, table, params, doc.get("rng_state"))
    if doc["kind"] == "captioner":
        cfg = Stage2Config(**doc["config"])
        return CaptionModel(cfg, vocab, params, doc.get("rng_state"), int(doc.get("epoch", 0)))
    raise DataError(f"{path}: unknown checkpoint kind {doc.get('kind')!r}")


def save_predictions(path, predictions: dict, checkpoint_path) -> None:
    doc = {
        "format": PREDICTIONS_FORMAT,
        "checkpoint_sha256": sha256_file(checkpoint_path),
        "entries": [{"audio_id": k, "tokens": list(predictions[k]), "text": " ".join(predictions[k])}
                    for k in sorted(predictions)],
    }
    atomic_write(path, dumps(doc, indent=1) + "\n")


def load_predictions(path) -> tuple[dict, str]:
    doc = _read_json(path, "predictions file")
    if doc.get("format") != PREDICTIONS_FORMAT:
        raise DataError(f"{path}: unsupported predictions format {doc.get('format')!r}")
    preds = {e["audio_id"]: [str(t) for t in e["tokens"]] for e in doc["entries"]}
    return preds, doc["checkpoint_sha256"]


def manifest_path(out) -> Path:
    out = Path(out)
    return out.with_name(out.name + ".manifest.json")


def write_manifest(out, command: str, seed: int, config: dict, inputs: dict) -> None:
    """Record the command, seed, config and input/output hashes next to ``out``."""
    doc = {
        "format": MANIFEST_FORMAT,
        "command": command,
        "seed": seed,
        "config": config,
        "inputs": {name: {"path": str(p), "sha256": sha256_file(p)} for name, p in sorted(inputs.items())},
        "output": {"path": str(out), "sha256": sha256_file(out)},
    }
    atomic_write(manifest_path(out), dumps(doc, indent=1) + "\n")
