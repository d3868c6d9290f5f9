"""Input-validation helpers shared by the estimators and I/O layers."""

import numpy as np

from .errors import NonFiniteSampleError, NonMonotonicFrequencyError, ValidationError


def as_float_array(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    return arr.ravel()


def as_complex_array(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=complex)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    return arr.ravel()


def check_finite(arr: np.ndarray, name: str) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise NonFiniteSampleError(f"{name} contains non-finite values")
    return arr


def check_strictly_increasing(arr: np.ndarray, name: str) -> np.ndarray:
    if arr.size >= 2 and not np.all(np.diff(arr) > 0):
        raise NonMonotonicFrequencyError(f"{name} must be strictly increasing")
    return arr


def check_positive(value, name: str):
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteSampleError(f"{name} must be finite")
    if not np.all(arr > 0):
        raise ValidationError(f"{name} must be positive")
    return value


def check_non_negative(value, name: str):
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteSampleError(f"{name} must be finite")
    if not np.all(arr >= 0):
        raise ValidationError(f"{name} must be non-negative")
    return value


def check_same_length(name_a: str, a: np.ndarray, name_b: str, b: np.ndarray):
    if len(a) != len(b):
        raise ValidationError(
            f"{name_a} and {name_b} must have equal length, got {len(a)} and {len(b)}"
        )
