"""Input validation helpers shared across the package."""

from __future__ import annotations

import numpy as np

from .errors import NonFiniteValue, ShapeMismatch, WidthMismatch

MOTION_DIM = 70
ACOUSTIC_DIM = 45


def as_f64(x, name="array"):
    """Coerce to a C-contiguous float64 ndarray."""
    try:
        arr = np.ascontiguousarray(x, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ShapeMismatch(f"{name}: cannot interpret as a float array ({exc})")
    return arr


def check_finite(arr, name="array"):
    if not np.all(np.isfinite(arr)):
        bad = np.argwhere(~np.isfinite(arr))
        loc = tuple(int(i) for i in bad[0])
        raise NonFiniteValue(f"{name}: non-finite value at index {loc}")
    return arr


def check_2d(arr, name="array"):
    if arr.ndim != 2:
        raise ShapeMismatch(f"{name}: expected 2-D, got shape {arr.shape}")
    return arr


def check_motion_frames(x, name="frames"):
    """Validate a (T, 70) coefficient matrix; returns float64 copy."""
    arr = check_2d(as_f64(x, name), name)
    if arr.shape[1] != MOTION_DIM:
        raise WidthMismatch(
            f"{name}: expected width {MOTION_DIM}, got {arr.shape[1]}"
        )
    return check_finite(arr, name)


def check_acoustic_frames(x, name="acoustic"):
    """Validate a (T, 45) acoustic feature matrix; returns float64 copy."""
    arr = check_2d(as_f64(x, name), name)
    if arr.shape[1] != ACOUSTIC_DIM:
        raise WidthMismatch(
            f"{name}: expected width {ACOUSTIC_DIM}, got {arr.shape[1]}"
        )
    return check_finite(arr, name)


def check_same_length(a, b, name_a="a", name_b="b"):
    if a.shape[0] != b.shape[0]:
        raise ShapeMismatch(
            f"{name_a} has {a.shape[0]} frames but {name_b} has {b.shape[0]}"
        )
