"""Small input-validation helpers shared across modules."""

from __future__ import annotations

import numpy as np


def as_vector(x, size: int, name: str) -> np.ndarray:
    """Return ``x`` as a float vector of length ``size`` or raise ValueError."""
    v = np.asarray(x, dtype=float)
    if v.shape != (size,):
        raise ValueError(f"{name} must be a length-{size} vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} must be finite")
    return v


def as_matrix(x, shape: tuple[int, int], name: str) -> np.ndarray:
    """Return ``x`` as a float matrix of the given shape or raise ValueError."""
    m = np.asarray(x, dtype=float)
    if m.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} must be finite")
    return m


def require_positive(value: float, name: str) -> float:
    value = float(value)
    if not np.isfinite(value) or value <= 0.0:
        raise ValueError(f"{name} must be positive, got {value}")
    return value


def require_rotation(r: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """Check that ``r`` is a proper rotation matrix (orthonormal, det +1)."""
    r = as_matrix(r, (3, 3), "rotation")
    if np.max(np.abs(r.T @ r - np.eye(3))) > tol:
        raise ValueError("rotation matrix is not orthonormal")
    if np.linalg.det(r) < 0.0:
        raise ValueError("rotation matrix has negative determinant")
    return r
