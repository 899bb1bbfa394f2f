"""Mask shape descriptors used to predict segmentation quality.

Nine features summarize any binary segmentation mask: boundary regularity,
compactness, location, and image coverage.  The column order below is part
of the trained-model file contract and must not change without bumping
SCHEMA_VERSION.
"""
from __future__ import annotations

import math

import numpy as np

from . import masks
from .validation import as_bool_mask

SCHEMA_VERSION = "mask-v1"

FEATURE_NAMES = (
    "boundary_dist_mean",
    "boundary_dist_std",
    "extent",
    "solidity",
    "shape_factor",
    "centroid_x_norm",
    "centroid_y_norm",
    "fg_fraction",
    "bbox_fraction",
)

N_FEATURES = len(FEATURE_NAMES)
_FG_FRACTION_IDX = FEATURE_NAMES.index("fg_fraction")


def extract_features(m) -> np.ndarray:
    """Compute the 9-element feature vector for a mask.

    An empty mask yields the degenerate all-zero vector instead of raising,
    so candidate pipelines never abort on degenerate generator output.

    Translation-invariant quantities (everything except the normalized
    centroid) are computed on the bounding-box crop, which makes them
    bit-identical under any translation that keeps the mask in frame.
    """
    m = as_bool_mask(m)
    h, w = m.shape
    area = int(m.sum())
    if area == 0:
        return np.zeros(N_FEATURES, dtype=np.float64)

    box = masks.bounding_box(m)
    crop = m[box.y0:box.y1, box.x0:box.x1]

    bpix = masks.boundary_pixels(crop)
    ccx, ccy = masks.centroid(crop)
    dists = np.hypot(bpix[:, 1] + 0.5 - ccx, bpix[:, 0] + 0.5 - ccy)
    boundary_mean = float(dists.mean())
    boundary_std = float(dists.std())

    hull_area = int(masks.convex_hull_mask(crop).sum())
    perimeter = masks.perimeter_estimate(crop)

    cx, cy = masks.centroid(m)

    return np.array([
        boundary_mean,
        boundary_std,
        area / box.area,
        area / hull_area,
        4.0 * math.pi * area / (perimeter * perimeter),
        cx / w,
        cy / h,
        area / (w * h),
        box.area / (w * h),
    ], dtype=np.float64)


def is_degenerate(features: np.ndarray) -> bool:
    """True for the all-zero vector produced by an empty mask."""
    return float(features[_FG_FRACTION_IDX]) == 0.0


def feature_matrix(mask_list) -> np.ndarray:
    """Stack feature vectors for a list of masks into an (n, 9) array."""
    if not mask_list:
        return np.zeros((0, N_FEATURES), dtype=np.float64)
    return np.stack([extract_features(m) for m in mask_list])
