"""Input validation helpers shared across the package."""
from __future__ import annotations

import numpy as np


def as_bool_mask(m, name: str = "mask") -> np.ndarray:
    """Coerce input to a 2D boolean mask (nonzero means foreground)."""
    arr = np.asarray(m)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must have positive dimensions, got {arr.shape}")
    if arr.dtype != np.bool_:
        arr = arr != 0
    return arr


def as_gray_image(img, name: str = "image") -> np.ndarray:
    """Coerce input to a 2D uint8 intensity image."""
    arr = np.asarray(img)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 2D grayscale array, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must have positive dimensions, got {arr.shape}")
    if arr.dtype != np.uint8:
        if not np.issubdtype(arr.dtype, np.integer):
            raise ValueError(f"{name} must hold integer intensities, got dtype {arr.dtype}")
        if arr.min() < 0 or arr.max() > 255:
            raise ValueError(f"{name} intensities must lie in [0, 255]")
        arr = arr.astype(np.uint8)
    return arr


def check_same_shape(a: np.ndarray, b: np.ndarray, what: str = "inputs") -> None:
    if a.shape != b.shape:
        raise ValueError(f"{what} must share dimensions, got {a.shape} vs {b.shape}")


def require_nonempty(m: np.ndarray, op: str) -> None:
    if not m.any():
        raise ValueError(f"{op} is undefined for an empty mask")
