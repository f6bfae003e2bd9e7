"""Argument checks shared by the estimators."""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.utils.validation import check_array

from .errors import DomainError


def check_alpha(alpha) -> float:
    if isinstance(alpha, bool) or not isinstance(alpha, numbers.Real) or not 0 < alpha < 1:
        raise DomainError(f"alpha must be a real number in (0, 1), got {alpha!r}")
    return float(alpha)


def check_positive_int(value, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < 1:
        raise DomainError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def check_1d(values, name: str = "values") -> np.ndarray:
    """Return a finite float vector; a single-column 2-D input is flattened."""
    arr = check_array(values, ensure_2d=False, dtype=float, ensure_all_finite=True,
                      input_name=name)
    if arr.ndim == 2 and arr.shape[1] == 1:
        arr = arr[:, 0]
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    return arr


def check_running_variable(X) -> np.ndarray:
    """Accept the running variable as ``(n,)`` or ``(n, 1)``."""
    return check_1d(X, "X")


def check_pair(target, predictor) -> tuple[np.ndarray, np.ndarray]:
    y = check_1d(target, "target")
    x = check_1d(predictor, "predictor")
    if y.shape != x.shape:
        raise ValueError(f"target and predictor must be aligned, got lengths {len(y)} and {len(x)}")
    return y, x
