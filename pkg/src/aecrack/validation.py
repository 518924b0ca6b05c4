"""Input validation helpers shared by the estimators and functional API."""

import numpy as np

from .errors import EmptySignalError, UnlabeledDataError


def check_waveform(samples, name="samples"):
    """Coerce to a finite, non-empty 1-D float64 array."""
    arr = np.asarray(samples, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {arr.shape}")
    if arr.size == 0:
        raise EmptySignalError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_gamma_batch(X, n_rows=None, n_ed=None, name="X"):
    """Validate a batch of descriptor matrices, shape (n_events, rows, n_ed)."""
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim != 3:
        raise ValueError(f"{name} must be 3-D (events, rows, length), got shape {arr.shape}")
    if arr.shape[0] == 0:
        raise ValueError(f"{name} contains no events")
    if n_rows is not None and arr.shape[1] != n_rows:
        raise ValueError(f"{name} has {arr.shape[1]} rows, expected {n_rows}")
    if n_ed is not None and arr.shape[2] != n_ed:
        raise ValueError(f"{name} has length {arr.shape[2]}, expected {n_ed}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_labels(y, n_events=None, n_classes=3):
    """Validate integer class labels in [0, n_classes)."""
    arr = np.asarray(y)
    if arr.ndim != 1:
        raise ValueError(f"labels must be 1-D, got shape {arr.shape}")
    if n_events is not None and arr.shape[0] != n_events:
        raise ValueError(f"got {arr.shape[0]} labels for {n_events} events")
    if arr.size and (arr.dtype.kind not in "iu" or arr.min() < 0 or arr.max() >= n_classes):
        raise UnlabeledDataError(f"labels must be integers in [0, {n_classes})")
    return arr.astype(np.int64)


def check_fitted(estimator, attribute):
    if not hasattr(estimator, attribute):
        raise RuntimeError(
            f"{type(estimator).__name__} is not fitted; call fit() before this method"
        )
