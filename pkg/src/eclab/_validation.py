"""Input validation helpers shared by the estimators and functional API."""

import numpy as np
import pandas as pd
from sklearn.utils.validation import check_array

from .exceptions import DataError, ValidationError


def as_labels(labels, n, kind):
    if labels is None:
        return tuple(f"{kind}{i}" for i in range(n))
    labels = tuple(str(x) for x in labels)
    if len(labels) != n:
        raise ValidationError(f"{len(labels)} {kind} labels for {n} entries")
    if len(set(labels)) != n:
        raise ValidationError(f"duplicate {kind} labels")
    return labels


def split_frame(X):
    """Return (array, row labels, column labels) for an ndarray or DataFrame."""
    if isinstance(X, pd.DataFrame):
        return X.to_numpy(), list(X.index), list(X.columns)
    rows = getattr(X, "countries", None)
    cols = getattr(X, "activities", None)
    values = getattr(X, "values", X)
    return values, rows, cols


def check_counts(X):
    """2-D finite nonnegative float array."""
    X = check_array(X, dtype=np.float64, ensure_all_finite=True, copy=False)
    if (X < 0).any():
        raise DataError("counts must be nonnegative")
    return X


def check_positive_margins(X):
    if (X.sum(axis=1) <= 0).any() or (X.sum(axis=0) <= 0).any():
        raise DataError("count matrix has an all-zero row or column")
    return X


def check_binary(M):
    """2-D array with entries in {0, 1}, returned as int64."""
    M = check_array(M, dtype=None, ensure_all_finite=True)
    if not np.isin(M, (0, 1)).all():
        raise DataError("specialization matrix must be binary")
    return M.astype(np.int64)


def check_vector(v, n=None, name="vector"):
    v = np.asarray(v, dtype=np.float64).ravel()
    if n is not None and v.shape[0] != n:
        raise ValidationError(f"{name} has length {v.shape[0]}, expected {n}")
    if not np.all(np.isfinite(v)):
        raise DataError(f"{name} has non-finite entries")
    return v


def standardize(v):
    """Center and scale by the population standard deviation."""
    v = np.asarray(v, dtype=np.float64)
    sd = v.std()
    return (v - v.mean()) / sd
