"""Input validation helpers shared by the estimators and builders."""
import numbers

import numpy as np
from sklearn.utils import check_array

from .exceptions import ShapeError


def check_points(X, dim):
    """Return ``X`` as a float (n, dim) array.

    A 1D array is read as n scalar points when ``dim == 1`` and as a single
    point otherwise.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 0:
        X = X.reshape(1, 1)
    elif X.ndim == 1:
        X = X.reshape(-1, 1) if dim == 1 else X.reshape(1, -1)
    X = check_array(X, dtype=np.float64, ensure_2d=True)
    if X.shape[1] != dim:
        raise ShapeError(f"expected {dim} input columns, got {X.shape[1]}")
    return X


def check_eps(eps, name="eps", upper=0.5):
    if not isinstance(eps, numbers.Real) or not (0.0 < float(eps) < upper):
        raise ValueError(f"{name} must lie in (0, {upper}), got {eps!r}")
    return float(eps)


def check_positive_int(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ValueError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_finite_matrix(a, name):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ShapeError(f"{name} must be 2D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a
