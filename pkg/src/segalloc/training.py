"""Training-set construction and evaluation for quality prediction.

Each annotated image contributes its ground truth (label 1.0), a dilated and
an eroded variant of the ground truth, and every automatic candidate, all
labelled with their overlap against the ground truth.  Cross-validation is
grouped by image so no image contributes to both sides of a fold.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import masks
from .candidates import CandidateSet
from .features import FEATURE_NAMES, N_FEATURES, extract_features
from .forest import QualityRegressionForest, _rng

MORPH_RADIUS = 3
_TAG_CROSSVAL = 3

PROVENANCE_GT = "gt"
PROVENANCE_DILATED = "gt-dilated"
PROVENANCE_ERODED = "gt-eroded"


@dataclass(frozen=True)
class TrainingExample:
    """One (features, label) pair traced back to its source mask."""
    image_id: str
    provenance: str
    features: np.ndarray
    label: float

    @property
    def key(self) -> str:
        return f"{self.image_id}/{self.provenance}"


@dataclass(frozen=True)
class EvalReport:
    """Prediction quality summary; cc is None when a side has zero variance."""
    cc: float | None
    mae: float
    n: int


def build_training_set(items: list[tuple[np.ndarray, np.ndarray, CandidateSet]]
                       ) -> list[TrainingExample]:
    """Expand (image, ground truth, candidates) triples into labelled examples.

    The image argument is unused by the current feature set (mask-only
    features) but kept in the record so image-dependent features can be
    added without changing call sites.
    """
    out: list[TrainingExample] = []
    for _img, gt, cands in items:
        gt = np.asarray(gt, dtype=bool)
        if not gt.any():
            raise ValueError(f"empty ground truth for image {cands.image_id!r}")
        variants = [
            (PROVENANCE_GT, gt),
            (PROVENANCE_DILATED, masks.dilate(gt, MORPH_RADIUS)),
            (PROVENANCE_ERODED, masks.erode(gt, MORPH_RADIUS)),
        ]
        variants.extend(cands.candidates)
        for provenance, mask in variants:
            out.append(TrainingExample(
                image_id=cands.image_id,
                provenance=provenance,
                features=extract_features(mask),
                label=masks.jaccard(mask, gt),
            ))
    return out


def examples_to_arrays(examples: list[TrainingExample]
                       ) -> tuple[np.ndarray, np.ndarray, list[str], list[str]]:
    """Return (X, y, image_ids, keys) for a list of examples."""
    if not examples:
        raise ValueError("no training examples")
    X = np.stack([ex.features for ex in examples])
    y = np.asarray([ex.label for ex in examples], dtype=np.float64)
    image_ids = [ex.image_id for ex in examples]
    keys = [ex.key for ex in examples]
    if len(set(keys)) != len(keys):
        raise ValueError("duplicate (image_id, provenance) keys in training set")
    return X, y, image_ids, keys


def evaluate(predictions, labels) -> EvalReport:
    """Pearson correlation and mean absolute error of predictions vs labels."""
    p = np.asarray(predictions, dtype=np.float64)
    t = np.asarray(labels, dtype=np.float64)
    if p.shape != t.shape or p.ndim != 1:
        raise ValueError("predictions and labels must be 1D and equal length")
    if len(p) == 0:
        raise ValueError("cannot evaluate zero predictions")
    mae = float(np.abs(p - t).mean())
    dp = p - p.mean()
    dt = t - t.mean()
    denom = np.sqrt((dp * dp).sum() * (dt * dt).sum())
    cc = None if denom == 0.0 else float((dp * dt).sum() / denom)
    return EvalReport(cc=cc, mae=mae, n=len(p))


def make_folds(image_ids: list[str], k: int, seed: int) -> list[list[str]]:
    """Split the unique image ids into k shuffled, near-equal folds."""
    unique = sorted(set(image_ids))
    if len(unique) < k:
        raise ValueError(f"need at least {k} distinct images, got {len(unique)}")
    perm = _rng(seed, _TAG_CROSSVAL).permutation(len(unique))
    shuffled = [unique[i] for i in perm]
    return [list(chunk) for chunk in np.array_split(shuffled, k)]


def crossval(examples: list[TrainingExample], model_factory, k: int = 10,
             seed: int = 0) -> tuple[EvalReport, np.ndarray]:
    """Grouped k-fold cross-validation.

    model_factory() must return an unfitted estimator.  Returns the pooled
    held-out EvalReport plus per-example held-out predictions aligned with
    the input order.
    """
    X, y, image_ids, keys = examples_to_arrays(examples)
    folds = make_folds(image_ids, k, seed)
    ids = np.asarray(image_ids)
    preds = np.full(len(examples), np.nan)
    for fold in folds:
        test = np.isin(ids, fold)
        train = ~test
        model = model_factory()
        if isinstance(model, QualityRegressionForest):
            model.fit(X[train], y[train], keys=[k_ for k_, m in zip(keys, train) if m])
        else:
            model.fit(X[train], y[train])
        preds[test] = model.predict(X[test])
    return evaluate(preds, y), preds


# --- CSV persistence -------------------------------------------------------

CSV_COLUMNS = ("image_id", "provenance", "label") + FEATURE_NAMES


def save_examples_csv(examples: list[TrainingExample], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for ex in examples:
            w.writerow([ex.image_id, ex.provenance, repr(float(ex.label))]
                       + [repr(float(v)) for v in ex.features])


def load_examples_csv(path) -> list[TrainingExample]:
    out: list[TrainingExample] = []
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if header is None or tuple(header) != CSV_COLUMNS:
            raise ValueError(f"unexpected training CSV header in {path}")
        for row in r:
            if len(row) != len(CSV_COLUMNS):
                raise ValueError(f"malformed row in {path}: {row!r}")
            out.append(TrainingExample(
                image_id=row[0],
                provenance=row[1],
                features=np.asarray([float(v) for v in row[3:]], dtype=np.float64),
                label=float(row[2]),
            ))
    for ex in out:
        if ex.features.shape != (N_FEATURES,):
            raise ValueError("feature count mismatch in CSV")
    return out
