"""Finite-difference gradient oracle."""

from __future__ import annotations

from typing import Callable, Mapping

import numpy as np

from ..errors import ConfigError


def finite_diff_grad(f: Callable, theta, h: float = 1e-5):
    """Central-difference gradient of a scalar function.

    ``theta`` is either one array or a mapping of named arrays; ``f`` is called
    with the same structure and must return a float. The result mirrors the
    structure of ``theta``.
    """
    if not h > 0:
        raise ConfigError("finite-difference step must be positive")
    if isinstance(theta, Mapping):
        base = {k: np.array(v, dtype=np.float64) for k, v in theta.items()}
        out = {}
        for name, arr in base.items():
            grad = np.zeros_like(arr)
            flat = arr.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                f_plus = float(f(base))
                flat[i] = orig - h
                f_minus = float(f(base))
                flat[i] = orig
                grad.reshape(-1)[i] = (f_plus - f_minus) / (2.0 * h)
            out[name] = grad
        return out
    arr = np.array(theta, dtype=np.float64)
    return finite_diff_grad(lambda d: f(d["x"]), {"x": arr}, h)["x"]


def relative_error(analytic, numeric, floor: float = 1e-8) -> float:
    """max |a - n| / max(max |a|, max |n|, floor), pooled over all entries."""
    if isinstance(analytic, Mapping):
        a = np.concatenate([np.ravel(analytic[k]) for k in sorted(analytic)])
        n = np.concatenate([np.ravel(numeric[k]) for k in sorted(analytic)])
    else:
        a, n = np.ravel(analytic), np.ravel(numeric)
    scale = np.max([np.max(np.abs(a), initial=0.0), np.max(np.abs(n), initial=0.0), floor])
    return float(np.max(np.abs(a - n), initial=0.0) / scale)
