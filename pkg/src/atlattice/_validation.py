"""Small input checks shared by the estimator and the command line."""

from __future__ import annotations

import math
import numbers

import numpy as np
from sklearn.utils import check_array


def check_positive(value, name, allow_zero=False) -> float:
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise TypeError(f"{name} must be a real number, got {type(value).__name__}")
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value}")
    if value < 0 or (value == 0 and not allow_zero):
        bound = ">= 0" if allow_zero else "> 0"
        raise ValueError(f"{name} must be {bound}, got {value}")
    return value


def check_int(value, name, minimum=1) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_signal(X) -> np.ndarray:
    """Accept a 1D signal or a 2D image; returns a finite float array."""
    X = np.asarray(X)
    if X.ndim == 1:
        return check_array(X.reshape(1, -1), dtype=float, ensure_min_features=2).ravel()
    if X.ndim == 2:
        return check_array(X, dtype=float, ensure_min_samples=1, ensure_min_features=1)
    raise ValueError(f"expected a 1D signal or a 2D image, got an array with ndim={X.ndim}")


def check_unit_vector(nu, name="nu") -> np.ndarray:
    nu = np.asarray(nu, dtype=float).reshape(-1)
    if nu.shape != (2,) or not np.all(np.isfinite(nu)):
        raise ValueError(f"{name} must be a finite 2-vector")
    if abs(np.linalg.norm(nu) - 1.0) > 1e-9:
        raise ValueError(f"{name} must have unit length")
    return nu


def parse_float_list(text, name) -> list:
    """``"1, 2.5,4"`` -> ``[1.0, 2.5, 4.0]``; an empty string gives ``[]``."""
    if isinstance(text, (list, tuple)):
        return [float(t) for t in text]
    text = str(text).strip()
    if not text:
        return []
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise ValueError(f"{name}: cannot parse {text!r} as a comma-separated list") from exc
