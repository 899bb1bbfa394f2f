"""Automatic coarse-segmentation candidate generators.

Seven built-in generators run in a fixed registry order; externally computed
proposal masks can be appended via file import.  Every emitted candidate is
post-processed (holes filled, largest component kept), so downstream code
can rely on single-blob, hole-free masks.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import masks
from .validation import as_bool_mask, as_gray_image

REGISTRY_IDS = (
    "otsu",
    "otsu-complement",
    "adaptive",
    "adaptive-complement",
    "hough-3",
    "hough-5",
    "hough-10",
)

HOUGH_RADII = (3, 5, 10)


@dataclass
class CandidateSet:
    """Ordered per-image candidate masks; order is the argmax tie-break authority."""

    image_id: str
    candidates: list[tuple[str, np.ndarray]] = field(default_factory=list)

    def __post_init__(self):
        ids = [gid for gid, _ in self.candidates]
        if len(ids) != len(set(ids)):
            raise ValueError(f"duplicate generator ids in candidate set for {self.image_id}")

    def __len__(self) -> int:
        return len(self.candidates)

    def generator_ids(self) -> list[str]:
        return [gid for gid, _ in self.candidates]

    def mask_for(self, generator_id: str) -> np.ndarray:
        for gid, m in self.candidates:
            if gid == generator_id:
                return m
        raise KeyError(generator_id)


def otsu_threshold(img) -> int:
    """Threshold maximizing between-class variance (foreground = brighter side).

    The maximization runs in exact integer arithmetic, so the chosen
    threshold provably equals the exhaustive 256-threshold argmax with
    ties broken toward the lowest threshold.  A constant image thresholds
    at its own value, which makes the foreground empty.
    """
    img = as_gray_image(img)
    if img.min() == img.max():
        return int(img.flat[0])
    hist = np.bincount(img.ravel(), minlength=256)
    counts = [int(c) for c in hist]
    n = sum(counts)
    total = sum(v * c for v, c in enumerate(counts))

    best_t = 0
    best_num = -1  # compare num/den fractions exactly via cross-multiplication
    best_den = 1
    w0 = 0
    s0 = 0
    for t in range(256):
        w0 += counts[t]
        s0 += t * counts[t]
        w1 = n - w0
        if w0 == 0 or w1 == 0:
            num, den = 0, 1
        else:
            diff = s0 * w1 - (total - s0) * w0
            num, den = diff * diff, w0 * w1
        if num * best_den > best_num * den:
            best_t, best_num, best_den = t, num, den
    return best_t


def otsu_mask(img) -> np.ndarray:
    img = as_gray_image(img)
    return img > otsu_threshold(img)


def adaptive_window(height: int, width: int) -> int:
    """Window side: largest odd integer <= min(w, h) / 8, floored at 3."""
    side = min(height, width) // 8
    if side % 2 == 0:
        side -= 1
    return max(side, 3)


def adaptive_threshold(img) -> np.ndarray:
    """Pixel is foreground iff it strictly exceeds its local window mean.

    The window mean uses replicate borders; the comparison is done on
    integer sums (v * win^2 > window_sum) to avoid any float rounding.
    """
    img = as_gray_image(img)
    h, w = img.shape
    win = adaptive_window(h, w)
    half = win // 2
    padded = np.pad(img.astype(np.int64), half, mode="edge")
    ii = np.zeros((padded.shape[0] + 1, padded.shape[1] + 1), dtype=np.int64)
    ii[1:, 1:] = padded.cumsum(axis=0).cumsum(axis=1)
    sums = ii[win:, win:] - ii[:-win, win:] - ii[win:, :-win] + ii[:-win, :-win]
    return img.astype(np.int64) * (win * win) > sums


def circle_offsets(radius: int) -> np.ndarray:
    """Midpoint-circle (Bresenham) offsets for the given radius, as (dy, dx) pairs."""
    if radius < 1:
        raise ValueError("radius must be >= 1")
    pts = set()
    x, y = 0, radius
    d = 1 - radius
    while x <= y:
        for px, py in ((x, y), (y, x)):
            pts.add((py, px))
            pts.add((py, -px))
            pts.add((-py, px))
            pts.add((-py, -px))
        if d < 0:
            d += 2 * x + 3
        else:
            d += 2 * (x - y) + 5
            y -= 1
        x += 1
    return np.array(sorted(pts), dtype=np.int64)


def hough_circles(img, radius: int) -> np.ndarray:
    """Locate the strongest circle of a fixed radius and return it as a filled disk.

    Sobel-magnitude edges above the 90th percentile vote for all centers at
    exactly `radius` distance; the accumulator argmax (ties to the smallest
    row-major valid center) wins.  Centers are restricted to positions where
    the full disk fits inside the image.
    """
    img = as_gray_image(img)
    h, w = img.shape
    if radius < 1:
        raise ValueError("radius must be >= 1")
    if h < 2 * radius + 1 or w < 2 * radius + 1:
        raise ValueError(f"image {w}x{h} too small for hough radius {radius}")

    f = img.astype(np.float64)
    gy = ndimage.sobel(f, axis=0, mode="nearest")
    gx = ndimage.sobel(f, axis=1, mode="nearest")
    mag = np.hypot(gx, gy)
    edges = mag > np.percentile(mag, 90)

    acc = np.zeros((h, w), dtype=np.int64)
    ey, ex = np.nonzero(edges)
    if len(ey):
        offs = circle_offsets(radius)
        for dy, dx in offs:
            cy = ey - dy
            cx = ex - dx
            ok = (cy >= radius) & (cy <= h - 1 - radius) & (cx >= radius) & (cx <= w - 1 - radius)
            np.add.at(acc, (cy[ok], cx[ok]), 1)

    valid = acc[radius:h - radius, radius:w - radius]
    flat_idx = int(np.argmax(valid))  # first occurrence = smallest row-major tie
    cy = radius + flat_idx // valid.shape[1]
    cx = radius + flat_idx % valid.shape[1]

    yy, xx = np.mgrid[0:h, 0:w]
    return (yy - cy) ** 2 + (xx - cx) ** 2 <= radius * radius


def postprocess(m) -> np.ndarray:
    """Fill holes, then keep only the largest object."""
    return masks.largest_component(masks.fill_holes(as_bool_mask(m)))


def generate_candidates(img, image_id: str = "", imports=()) -> CandidateSet:
    """Run the built-in generator registry and append imported masks.

    Registry order: otsu, otsu-complement, adaptive, adaptive-complement,
    hough-3, hough-5, hough-10.  Every mask (built-in or imported) is
    post-processed.  Images too small for a hough radius contribute an empty
    candidate for that slot so the set always has the full registry.
    `imports` is a sequence of (generator_id, mask) pairs matching the image
    dimensions.
    """
    img = as_gray_image(img)
    h, w = img.shape
    ot = otsu_mask(img)
    ad = adaptive_threshold(img)
    raw: list[tuple[str, np.ndarray]] = [
        ("otsu", ot),
        ("otsu-complement", ~ot),
        ("adaptive", ad),
        ("adaptive-complement", ~ad),
    ]
    for r in HOUGH_RADII:
        if h >= 2 * r + 1 and w >= 2 * r + 1:
            raw.append((f"hough-{r}", hough_circles(img, r)))
        else:
            raw.append((f"hough-{r}", np.zeros((h, w), dtype=bool)))

    out = [(gid, postprocess(m)) for gid, m in raw]
    for gid, m in imports:
        m = as_bool_mask(m, f"import {gid}")
        if m.shape != img.shape:
            raise ValueError(f"imported mask {gid} has shape {m.shape}, image is {img.shape}")
        out.append((str(gid), postprocess(m)))
    return CandidateSet(image_id=image_id, candidates=out)


def load_imports(import_dir, image_id: str, expected_shape) -> list[tuple[str, np.ndarray]]:
    """Load `<image_id>.<slot>.png` masks from a directory, slots in lexicographic order.

    Raises with the offending file name on unreadable or mis-sized masks.
    """
    root = Path(import_dir)
    found = sorted(root.glob(f"{image_id}.*.png"))
    imports = []
    for path in found:
        slot = path.name[len(image_id) + 1:-len(".png")]
        try:
            m = masks.load_mask(path)
        except Exception as exc:
            raise ValueError(f"unreadable import mask {path}: {exc}") from exc
        if m.shape != tuple(expected_shape):
            raise ValueError(
                f"import mask {path} has shape {m.shape}, expected {tuple(expected_shape)}")
        imports.append((f"import-{slot}", m))
    return imports
