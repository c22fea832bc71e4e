"""Dataset records, the JSON-lines dataset file, and shared serialization.

All floats are written with 17 significant digits so that every file
round-trips bit-exactly; writes go to a temporary file and are renamed into
place.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class CaptionRecord:
    audio_id: str
    captions: tuple[str, ...]
    features: np.ndarray  # (T, F)

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim != 2 or min(feats.shape) < 1:
            raise DataError(f"{self.audio_id}: features must be a non-empty T x F matrix")
        if not np.all(np.isfinite(feats)):
            raise DataError(f"{self.audio_id}: non-finite feature values")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "captions", tuple(self.captions))


def fmt_float(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise DataError(f"cannot serialize non-finite value {x}")
    return format(x, ".17g")


def dumps(obj, indent: int | None = None, _level: int = 0) -> str:
    """JSON text with floats at 17 significant digits; dict key order preserved."""
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (bool, np.bool_)) or obj is None:
        return json.dumps(bool(obj) if obj is not None else None)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    pad = "" if indent is None else "\n" + " " * (indent * (_level + 1))
    end = "" if indent is None else "\n" + " " * (indent * _level)
    sep = ","
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        colon = ":" if indent is None else ": "
        items = [f"{pad}{json.dumps(str(k))}{colon}{dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{" + sep.join(items) + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        # numeric arrays stay on one line
        if all(isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool) for v in obj):
            return "[" + ",".join(dumps(v) for v in obj) + "]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[" + sep.join(items) + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def tensor_to_json(arr: np.ndarray) -> dict:
    arr = np.asarray(arr, dtype=np.float64)
    return {"shape": list(arr.shape), "values": arr.ravel().tolist()}


def tensor_from_json(doc: dict) -> np.ndarray:
    shape = tuple(int(s) for s in doc["shape"])
    values = np.asarray(doc["values"], dtype=np.float64)
    if values.size != int(np.prod(shape)):
        raise DataError(f"tensor with shape {shape} has {values.size} values")
    return values.reshape(shape)


def record_to_json(rec: CaptionRecord) -> dict:
    t, f = rec.features.shape
    return {"audio_id": rec.audio_id, "captions": list(rec.captions),
            "features": {"T": t, "F": f, "values": rec.features.ravel().tolist()}}


def record_from_json(doc: dict) -> CaptionRecord:
    try:
        audio_id = str(doc["audio_id"])
        feats = doc["features"]
        t, f = int(feats["T"]), int(feats["F"])
        values = np.asarray(feats["values"], dtype=np.float64)
        captions = [str(c) for c in doc["captions"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed dataset line: {exc}") from None
    if values.size != t * f:
        raise DataError(f"{audio_id}: expected {t * f} feature values, got {values.size}")
    return CaptionRecord(audio_id, tuple(captions), values.reshape(t, f))


def save_dataset(records, path) -> None:
    atomic_write(path, "".join(dumps(record_to_json(r)) + "\n" for r in records))


def load_dataset(path) -> list[CaptionRecord]:
    records, seen = [], set()
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except FileNotFoundError:
        raise DataError(f"dataset file not found: {path}") from None
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from None
        rec = record_from_json(doc)
        if rec.audio_id in seen:
            raise DataError(f"{path}:{lineno}: duplicate audio_id {rec.audio_id!r}")
        seen.add(rec.audio_id)
        records.append(rec)
    if not records:
        raise DataError(f"dataset {path} is empty")
    return records
