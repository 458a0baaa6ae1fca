"""Input validation helpers shared by the public API."""
from __future__ import annotations

import math
import numbers

import numpy as np

from .errors import InvalidParameterError


def check_positive(value, name):
    if not isinstance(value, numbers.Real) or not math.isfinite(value) or value <= 0:
        raise InvalidParameterError(f"{name} must be a positive finite real, got {value!r}")
    return float(value)


def check_positive_int(value, name):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value <= 0:
        raise InvalidParameterError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def check_open_interval(value, lo, hi, name):
    if not isinstance(value, numbers.Real) or not (lo < value < hi):
        raise InvalidParameterError(f"{name} must lie in ({lo}, {hi}), got {value!r}")
    return float(value)


def check_grid(grid, name="grid", *, lo=None, hi=None, allow_empty=False):
    """Return ``grid`` as a 1-D float array, strictly increasing and finite."""
    arr = np.asarray(grid, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise InvalidParameterError(f"{name} must be one-dimensional")
    if arr.size == 0 and not allow_empty:
        raise InvalidParameterError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise InvalidParameterError(f"{name} contains non-finite values")
    if arr.size > 1 and not np.all(np.diff(arr) > 0):
        raise InvalidParameterError(f"{name} must be strictly increasing without duplicates")
    if lo is not None and arr.size and arr[0] < lo:
        raise InvalidParameterError(f"{name} starts below {lo}")
    if hi is not None and arr.size and arr[-1] > hi:
        raise InvalidParameterError(f"{name} ends above {hi}")
    return arr


def uniform_grid(T, steps):
    """``steps + 1`` equispaced nodes on [0, T] with exact endpoints."""
    steps = check_positive_int(steps, "steps")
    return np.arange(steps + 1, dtype=float) * (float(T) / steps)


def same_grid(g1, g2, rtol=1e-12):
    g1 = np.asarray(g1, dtype=float)
    g2 = np.asarray(g2, dtype=float)
    if g1.shape != g2.shape:
        return False
    scale = max(1.0, float(np.max(np.abs(g1))) if g1.size else 1.0)
    return bool(np.all(np.abs(g1 - g2) <= rtol * scale))
