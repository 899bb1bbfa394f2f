"""Dataset ingestion and deterministic synthetic corpus generation.

A dataset on disk is `root/images/<id>.png` plus `root/gt/<id>.png`.  The
synthetic generator stands in for real benchmarks at desk scale: each image
holds one primary blob (ellipse, star polygon, or annulus) over a noisy
background, with optional small distractor blobs, and an exact ground-truth
mask.  Everything is a pure function of (seed, index), so regenerating a
corpus reproduces it byte for byte.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import masks
from .polygons import rasterize_polygon

_TAG_CORPUS = 4

DEFAULT_SIZE = 96

# golden-ratio low-discrepancy walk over target foreground fractions; keeps
# any reasonably sized corpus spanning small through large objects
_FRAC_LO = 0.035
_FRAC_HI = 0.47
_GOLDEN = 0.6180339887498949


@dataclass(frozen=True)
class ManifestEntry:
    image_id: str
    image_path: Path
    gt_path: Path


@dataclass(frozen=True)
class DatasetManifest:
    root: Path
    entries: tuple[ManifestEntry, ...]
    modality: str = ""

    def __post_init__(self):
        ids = [e.image_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate image ids in manifest")

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def ids(self) -> list[str]:
        return [e.image_id for e in self.entries]

    def entry_for(self, image_id: str) -> ManifestEntry:
        for e in self.entries:
            if e.image_id == image_id:
                return e
        raise KeyError(image_id)

    def load_image(self, image_id: str) -> np.ndarray:
        return masks.load_gray(self.entry_for(image_id).image_path)

    def load_gt(self, image_id: str) -> np.ndarray:
        return masks.load_mask(self.entry_for(image_id).gt_path)


def ingest(root, modality: str = "") -> DatasetManifest:
    """Scan and validate an images/ + gt/ directory pair.

    All problems (missing counterpart, size mismatch, empty ground truth)
    are collected and reported together, naming each offending id.
    """
    root = Path(root)
    img_dir = root / "images"
    gt_dir = root / "gt"
    if not img_dir.is_dir() or not gt_dir.is_dir():
        raise ValueError(f"{root} must contain images/ and gt/ directories")
    image_files = {p.stem: p for p in sorted(img_dir.glob("*.png"))}
    gt_files = {p.stem: p for p in sorted(gt_dir.glob("*.png"))}

    problems = []
    entries = []
    for image_id in sorted(set(image_files) | set(gt_files)):
        if image_id not in gt_files:
            problems.append(f"{image_id}: missing gt/{image_id}.png")
            continue
        if image_id not in image_files:
            problems.append(f"{image_id}: missing images/{image_id}.png")
            continue
        img = masks.load_gray(image_files[image_id])
        gt = masks.load_mask(gt_files[image_id])
        if img.shape != gt.shape:
            problems.append(
                f"{image_id}: image {img.shape} vs gt {gt.shape} size mismatch")
            continue
        if not gt.any():
            problems.append(f"{image_id}: empty ground truth")
            continue
        entries.append(ManifestEntry(image_id, image_files[image_id],
                                     gt_files[image_id]))
    if problems:
        raise ValueError("invalid dataset:\n  " + "\n  ".join(problems))
    if not entries:
        raise ValueError(f"no image/gt pairs found under {root}")
    return DatasetManifest(root=root, entries=tuple(entries), modality=modality)


# --- shape rasterizers (pixel-center inclusion) ----------------------------

def ellipse_mask(height: int, width: int, cy: float, cx: float,
                 a: float, b: float, theta: float) -> np.ndarray:
    """Filled rotated ellipse with semi-axes (a, b), tested at pixel centers."""
    yy, xx = np.mgrid[0:height, 0:width]
    px = xx + 0.5 - cx
    py = yy + 0.5 - cy
    ct, st = np.cos(theta), np.sin(theta)
    u = px * ct + py * st
    v = -px * st + py * ct
    return (u / a) ** 2 + (v / b) ** 2 <= 1.0


def annulus_mask(height: int, width: int, cy: float, cx: float,
                 r_out: float, r_in: float) -> np.ndarray:
    yy, xx = np.mgrid[0:height, 0:width]
    d2 = (xx + 0.5 - cx) ** 2 + (yy + 0.5 - cy) ** 2
    return (d2 <= r_out ** 2) & (d2 > r_in ** 2)


def star_polygon_mask(height: int, width: int, cy: float, cx: float,
                      radius: float, n_vertices: int,
                      radii_scale: np.ndarray, phase: float) -> np.ndarray:
    angles = phase + 2.0 * np.pi * np.arange(n_vertices) / n_vertices
    verts = [(cx + radius * s * np.cos(t), cy + radius * s * np.sin(t))
             for t, s in zip(angles, radii_scale)]
    verts = [(min(max(x, 0.0), float(width)), min(max(y, 0.0), float(height)))
             for x, y in verts]
    return rasterize_polygon(verts, width, height)


def synth_image(rng: np.random.Generator, height: int, width: int,
                target_frac: float) -> tuple[np.ndarray, np.ndarray]:
    """One synthetic image: primary blob + distractors + Gaussian noise.

    Returns (uint8 grayscale image, exact ground-truth mask of the primary
    blob).  Distractors never overlap the primary blob.
    """
    area = target_frac * height * width
    kind = rng.choice(["ellipse", "polygon", "annulus"])
    r_eq = float(np.sqrt(area / np.pi))
    margin = min(0.45 * min(height, width), r_eq * 1.2)
    cy = height / 2.0 + rng.uniform(-1.0, 1.0) * max(2.0, height / 2.0 - margin)
    cx = width / 2.0 + rng.uniform(-1.0, 1.0) * max(2.0, width / 2.0 - margin)

    if kind == "ellipse":
        q = rng.uniform(0.55, 1.0)
        a = r_eq / np.sqrt(q)
        b = r_eq * np.sqrt(q)
        theta = rng.uniform(0.0, np.pi)
        gt = ellipse_mask(height, width, cy, cx, a, b, theta)
    elif kind == "annulus":
        rho = rng.uniform(0.3, 0.55)
        r_out = r_eq / np.sqrt(1.0 - rho ** 2)
        gt = annulus_mask(height, width, cy, cx, r_out, rho * r_out)
    else:
        n_vertices = int(rng.integers(5, 10))
        scales = rng.uniform(0.65, 1.0, size=n_vertices)
        # mean star area ~ 0.75 * pi * r^2 for these radii scales
        radius = r_eq / np.sqrt(float((scales ** 2).mean()) * 0.88)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        gt = star_polygon_mask(height, width, cy, cx, radius, n_vertices,
                               scales, phase)
        gt = masks.largest_component(masks.fill_holes(gt))

    if not gt.any():  # degenerate draw; fall back to a safe centered disk
        gt = ellipse_mask(height, width, height / 2.0, width / 2.0,
                          max(3.0, r_eq), max(3.0, r_eq), 0.0)

    bg_level = float(rng.uniform(30.0, 110.0))
    contrast = float(rng.uniform(45.0, 120.0))
    if rng.random() < 0.3:
        contrast = -contrast  # darker-than-background object
        bg_level = float(rng.uniform(120.0, 200.0))
    img = np.full((height, width), bg_level, dtype=np.float64)
    img[gt] = bg_level + contrast

    n_distract = int(rng.integers(0, 3))
    for _ in range(n_distract):
        dr = float(rng.uniform(2.0, 0.08 * min(height, width)))
        for _attempt in range(10):
            dcy = rng.uniform(dr, height - dr)
            dcx = rng.uniform(dr, width - dr)
            blob = ellipse_mask(height, width, dcy, dcx, dr, dr, 0.0)
            if not (blob & masks.dilate(gt, 2)).any():
                img[blob] = bg_level + contrast * float(rng.uniform(0.35, 0.7))
                break

    sigma = float(rng.uniform(2.0, 9.0))
    img = img + rng.normal(0.0, sigma, size=img.shape)
    img = np.clip(np.floor(img + 0.5), 0, 255).astype(np.uint8)
    return img, gt


def target_fraction(index: int) -> float:
    """Low-discrepancy foreground-fraction target for corpus image `index`."""
    u = (0.5 + index * _GOLDEN) % 1.0
    return _FRAC_LO + (_FRAC_HI - _FRAC_LO) * u


def synth_corpus(root, n: int = 100, seed: int = 42,
                 height: int = DEFAULT_SIZE, width: int = DEFAULT_SIZE
                 ) -> DatasetManifest:
    """Generate an n-image synthetic dataset under root and return its manifest."""
    if n < 1:
        raise ValueError("n must be >= 1")
    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "gt").mkdir(parents=True, exist_ok=True)
    for i in range(n):
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=[seed, _TAG_CORPUS, i]))
        img, gt = synth_image(rng, height, width, target_fraction(i))
        image_id = f"syn{i:04d}"
        masks.save_gray(root / "images" / f"{image_id}.png", img)
        masks.save_mask(root / "gt" / f"{image_id}.png", gt)
    return ingest(root, modality="synthetic")
