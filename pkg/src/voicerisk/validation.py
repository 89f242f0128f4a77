"""Input validation helpers used by the estimator-style classes."""

import hashlib

import numpy as np

from .errors import DimMismatchError, NonFiniteValueError


def as_float_array(x, name="array"):
    """Coerce to a 1-D float64 array and reject non-finite values."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise DimMismatchError(f"{name} must be 1-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValueError(f"{name} contains non-finite values")
    return arr


def check_matrix(X, n_features=None, name="X"):
    """Coerce to a 2-D float64 matrix, optionally enforcing the column count."""
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise DimMismatchError(f"{name} must be 2-D, got shape {arr.shape}")
    if n_features is not None and arr.shape[1] != n_features:
        raise DimMismatchError(
            f"{name} has {arr.shape[1]} columns, expected {n_features}"
        )
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValueError(f"{name} contains non-finite values")
    return arr


def check_same_length(name_a, a, name_b, b):
    if len(a) != len(b):
        raise DimMismatchError(
            f"{name_a} has length {len(a)} but {name_b} has length {len(b)}"
        )


def stable_digest(*parts) -> str:
    """SHA-256 digest over arrays and strings, stable across processes."""
    h = hashlib.sha256()
    for part in parts:
        if isinstance(part, np.ndarray):
            arr = np.ascontiguousarray(part)
            h.update(str(arr.dtype).encode())
            h.update(str(arr.shape).encode())
            h.update(arr.tobytes())
        else:
            h.update(repr(part).encode())
    return h.hexdigest()
