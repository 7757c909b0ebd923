import numpy as np
from sklearn.utils.validation import check_array


def check_syndromes(X, m=None):
    """Validate a 2-d array of syndrome bits."""
    X = check_array(X, dtype=np.uint8, ensure_min_samples=1)
    if X.size and X.max() > 1:
        raise ValueError("syndromes must be binary")
    if m is not None and X.shape[1] != m:
        raise ValueError(f"expected syndromes of length {m}, got {X.shape[1]}")
    return X


def check_errors(y, n=None):
    """Validate a 2-d array of GF(4) error vectors (codes 0..3)."""
    y = check_array(y, dtype=np.uint8, ensure_min_samples=1)
    if y.size and y.max() > 3:
        raise ValueError("error vectors must hold GF(4) codes 0..3")
    if n is not None and y.shape[1] != n:
        raise ValueError(f"expected error vectors of length {n}, got {y.shape[1]}")
    return y
