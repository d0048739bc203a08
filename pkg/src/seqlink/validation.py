"""Input validation helpers shared by the functional API and the estimators."""

from __future__ import annotations

import numpy as np

__all__ = [
    "check_count_matrix",
    "check_positive_vector",
    "check_simplex",
]


def check_positive_vector(x, name: str = "parameter") -> np.ndarray:
    """Validate a strictly positive 1-D (or row-wise 2-D) float array."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim not in (1, 2):
        raise ValueError(f"{name} must be 1-D or 2-D, got ndim={arr.ndim}")
    if arr.size == 0:
        raise ValueError(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise ValueError(f"{name} must be strictly positive and finite")
    return arr


def check_simplex(p, name: str = "distribution", atol: float = 1e-6) -> np.ndarray:
    """Validate a probability vector: non-negative entries summing to 1."""
    arr = np.asarray(p, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got ndim={arr.ndim}")
    if arr.size == 0:
        raise ValueError(f"{name} must be non-empty")
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be non-negative and finite")
    total = float(arr.sum())
    if abs(total - 1.0) > atol:
        raise ValueError(f"{name} must sum to 1 (got {total!r})")
    return arr


def check_count_matrix(X, name: str = "X") -> np.ndarray:
    """Validate a dense or sparse matrix of non-negative event counts.

    Returns a dense ``float64`` array; sparse inputs are densified (the
    estimators target corpora that comfortably fit in memory).
    """
    if hasattr(X, "toarray"):
        arr = np.asarray(X.toarray(), dtype=np.float64)
    else:
        arr = np.asarray(X, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 2-D count matrix, got ndim={arr.ndim}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError(f"{name} must be non-empty")
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must contain non-negative finite counts")
    return arr
