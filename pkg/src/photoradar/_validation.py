"""Small input-validation helpers shared by the public API."""

from __future__ import annotations

import math

import numpy as np


class NyquistError(ValueError):
    """Sample rate too low for the frequencies a signal would contain."""


class NoPeakError(ValueError):
    """No spectral peak could be located in the requested band."""


def check_positive(value, name: str, allow_inf: bool = False) -> float:
    value = float(value)
    if math.isnan(value) or value <= 0 or (math.isinf(value) and not allow_inf):
        raise ValueError(f"{name} must be positive and finite, got {value!r}")
    return value


def check_nonnegative(value, name: str) -> float:
    value = float(value)
    if not math.isfinite(value) or value < 0:
        raise ValueError(f"{name} must be finite and >= 0, got {value!r}")
    return value


def check_finite(value, name: str):
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr if arr.ndim else float(arr)


def check_interval(interval, name: str) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in interval)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{name} must be a (low, high) pair") from exc
    if math.isnan(lo) or math.isnan(hi) or not lo < hi:
        raise ValueError(f"{name} must satisfy low < high, got ({lo}, {hi})")
    return lo, hi


def check_nyquist(sample_rate: float, max_frequency: float, what: str = "signal") -> None:
    if not sample_rate > 2.0 * max_frequency:
        raise NyquistError(
            f"sample rate {sample_rate:.6g} Hz cannot represent {what} up to "
            f"{max_frequency:.6g} Hz (needs > {2 * max_frequency:.6g} Hz)"
        )


def as_samples(x, name: str = "samples", allow_complex: bool = False) -> np.ndarray:
    arr = np.asarray(x)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-D array")
    if np.iscomplexobj(arr):
        if not allow_complex:
            raise ValueError(f"{name} must be real-valued")
        arr = arr.astype(complex, copy=False)
    else:
        arr = arr.astype(float, copy=False)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr
