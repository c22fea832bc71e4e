"""Flat dotted-key configuration with named profiles.

Keys are ``seed``, ``fixture.<field>``, ``stage1.<field>`` and
``stage2.<field>`` where each field belongs to FixtureSpec, ProxyConfig or
Stage2Config. A config file is a flat JSON object; it may name a base
``profile`` whose values it overrides.
"""

from __future__ import annotations

import json
from dataclasses import fields
from pathlib import Path

from .captioner import Stage2Config
from .errors import ConfigError
from .fixtures import FixtureSpec
from .proxy_space import ProxyConfig

SECTIONS = {"fixture": FixtureSpec, "stage1": ProxyConfig, "stage2": Stage2Config}


def _defaults() -> dict:
    flat = {"seed": 0}
    for section, cls in SECTIONS.items():
        for f in fields(cls):
            if f.name != "seed":
                flat[f"{section}.{f.name}"] = f.default
    return flat


# Values cited for the full-scale setup: stage-1 batch 64 x 3, lr 0.01, 500
# epochs, (a, b) = (10, -5), LSTM 1024 -> 512; stage-2 lr 5e-4, 25 epochs,
# lambda 0.5, teacher forcing 1.0 -> 0.7.
CITED = {
    "stage1.lr": 0.01, "stage1.epochs": 500, "stage1.n_audios": 64, "stage1.m_captions": 3,
    "stage1.scale_init": 10.0, "stage1.bias_init": -5.0,
    "stage1.hidden_dim": 1024, "stage1.embed_dim": 512,
    "stage2.lr": 5e-4, "stage2.epochs": 25, "stage2.lam": 0.5,
    "stage2.tf_start": 1.0, "stage2.tf_end": 0.7,
}

DESK = {
    **CITED,
    "seed": 7,
    "stage1.hidden_dim": 32, "stage1.embed_dim": 32, "stage1.epochs": 200,
    "stage2.lr": 0.01,
}

PROFILES = {"default": {**_defaults(), **CITED}, "desk": {**_defaults(), **DESK}}


def _coerce(key: str, value, template):
    if template is None or value is None:
        return value
    if isinstance(template, bool):
        if isinstance(value, str):
            if value.lower() in ("1", "true", "yes", "on"):
                return True
            if value.lower() in ("0", "false", "no", "off"):
                return False
            raise ConfigError(f"{key}: expected a boolean, got {value!r}")
        return bool(value)
    try:
        if isinstance(template, int):
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        if isinstance(template, float):
            return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected {type(template).__name__}, got {value!r}") from None
    return str(value)


def merge(base: dict, overrides: dict) -> dict:
    out = dict(base)
    for key, value in overrides.items():
        if key not in base:
            raise ConfigError(f"unknown config key {key!r}")
        template = PROFILES["default"][key]
        if template is None and isinstance(value, str) and value.lower() == "none":
            value = None
        elif template is None and value is not None:
            value = _coerce(key, value, 0)
        out[key] = _coerce(key, value, template)
    return out


def load_config(source: str | None = "default", overrides: dict | None = None) -> dict:
    """Resolve a profile name or JSON file path, then apply ``overrides``."""
    source = source or "default"
    if source in PROFILES:
        flat = dict(PROFILES[source])
    else:
        try:
            doc = json.loads(Path(source).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {source} (profiles: {', '.join(PROFILES)})") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{source}: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError(f"{source}: expected a flat JSON object")
        base = doc.pop("profile", "default")
        if base not in PROFILES:
            raise ConfigError(f"{source}: unknown profile {base!r}")
        flat = merge(PROFILES[base], doc)
    return merge(flat, overrides or {})


def section(flat: dict, name: str):
    """Build the dataclass of one section; the global seed fills its ``seed``."""
    cls = SECTIONS[name]
    kwargs = {k.split(".", 1)[1]: v for k, v in flat.items() if k.startswith(name + ".")}
    kwargs["seed"] = int(flat["seed"])
    return cls(**kwargs)
