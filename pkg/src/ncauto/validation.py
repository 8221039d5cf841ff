"""Input validation helpers shared by the evaluators and the estimator wrappers."""

import numpy as np


class DimensionMismatchError(ValueError):
    """Operands have incompatible variable counts or matrix sizes."""


def check_matrix(M, name="matrix", square=False):
    """Return ``M`` as a finite 2-D complex128 array.

    Raises ``DimensionMismatchError`` for non 2-D input (or non-square input
    when ``square`` is set) and ``ValueError`` for NaN/Inf entries.
    """
    arr = np.asarray(M, dtype=np.complex128)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise DimensionMismatchError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if square and arr.shape[0] != arr.shape[1]:
        raise DimensionMismatchError(f"{name} must be square, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf entries")
    return arr


def check_nc_array(X, n_vars=None, allow_single=True):
    """Validate a batch of nc-points stored as an array.

    Accepts shape ``(n_samples, d, n, n)`` or, when ``allow_single`` is true,
    a single point of shape ``(d, n, n)`` which is promoted to a batch of one.
    Returns ``(batch, was_single)``.
    """
    arr = np.asarray(X, dtype=np.complex128)
    single = False
    if arr.ndim == 3 and allow_single:
        arr = arr[None]
        single = True
    if arr.ndim != 4:
        raise DimensionMismatchError(
            f"expected nc-points of shape (n_samples, d, n, n), got {np.shape(X)}"
        )
    if arr.shape[2] != arr.shape[3] or arr.shape[2] == 0 or arr.shape[1] == 0:
        raise DimensionMismatchError(f"nc-point matrices must be square and non-empty, got {arr.shape[1:]}")
    if n_vars is not None and arr.shape[1] != n_vars:
        raise DimensionMismatchError(f"expected {n_vars} variables, got {arr.shape[1]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("nc-point entries must be finite")
    return arr, single


def check_positive_int(value, name):
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    return int(value)
