import math

import numpy as np


def round_half_up(x):
    # 1e-9 absorbs binary error in products such as 0.1 * N * p
    return int(math.floor(x + 0.5 + 1e-9))


def check_balances(X, name="X"):
    """Validate an (r, 2) array of nonnegative finite category counts."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1 and X.size == 2:
        X = X.reshape(1, 2)
    if X.ndim != 2 or X.shape[1] != 2:
        raise ValueError(f"{name} must have shape (r, 2), got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains non-finite values")
    if np.any(X < 0):
        raise ValueError(f"{name} contains negative counts")
    return X


def check_responses(y, r, name="y"):
    y = np.asarray(y, dtype=float).ravel()
    if y.shape[0] != r:
        raise ValueError(f"{name} has {y.shape[0]} entries, expected {r}")
    if not np.all(np.isfinite(y)):
        raise ValueError(f"{name} contains non-finite values")
    return y


def check_positive_int(value, name, minimum=1):
    if isinstance(value, bool) or int(value) != value or value < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def check_proportion(p, name="p"):
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {p}")
    return p
