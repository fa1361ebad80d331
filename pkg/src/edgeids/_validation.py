"""Input validation helpers shared by the estimators."""

import numbers

import numpy as np


def check_features(X, *, n_features=None, allow_nan=False, dtype=np.float64):
    """Coerce ``X`` to a 2-D float array and check its width."""
    X = np.asarray(X, dtype=dtype)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2:
        raise ValueError(f"expected 2-D feature array, got {X.ndim}-D")
    if not allow_nan and not np.all(np.isfinite(X)):
        raise ValueError("input contains NaN or infinity")
    if n_features is not None and X.shape[1] != n_features:
        raise ValueError(f"X has {X.shape[1]} features, expected {n_features}")
    return X


def check_labels(y, n_rows):
    y = np.asarray(y)
    if y.ndim != 1 or y.shape[0] != n_rows:
        raise ValueError("y must be 1-D with one label per row")
    return y


def check_seed(seed) -> int:
    if seed is None:
        return 0
    if isinstance(seed, numbers.Integral):
        return int(seed)
    raise TypeError(f"seed must be an int, got {type(seed).__name__}")


def check_fraction(name, value, *, low_open=True):
    v = float(value)
    if not (0.0 < v <= 1.0 if low_open else 0.0 <= v <= 1.0):
        raise ValueError(f"{name} must lie in (0, 1], got {value}")
    return v


def check_positive_int(name, value, minimum=1):
    if not isinstance(value, numbers.Integral) or value < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)
