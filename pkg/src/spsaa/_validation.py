"""Input validation helpers for the estimator API."""
from __future__ import annotations

import numpy as np

__all__ = ["check_scenario_matrix", "check_vector", "check_positive"]


def check_scenario_matrix(X, expected_dim: int | None = None) -> np.ndarray:
    """Validate a scenario sample: finite 2-D float array with N >= 1 rows."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2:
        raise ValueError(f"scenario matrix must be 2-D, got shape {X.shape}")
    if X.shape[0] < 1:
        raise ValueError("scenario matrix must contain at least one row")
    if not np.all(np.isfinite(X)):
        raise ValueError("scenario matrix contains non-finite entries")
    if expected_dim is not None and X.shape[1] != expected_dim:
        raise ValueError(
            f"scenario matrix has {X.shape[1]} columns, expected {expected_dim}"
        )
    return X


def check_vector(x, dim: int, name: str = "x") -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (dim,):
        raise ValueError(f"{name} must be a length-{dim} vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite entries")
    return x


def check_positive(value, name: str) -> float:
    value = float(value)
    if not value > 0:
        raise ValueError(f"{name} must be > 0, got {value}")
    return value
