"""Budget allocation: pick the best candidate per image and decide which
images get human effort.

Both the coarse system (humans supply refinement initializations) and the
fine-grained system (humans redraw from scratch) rank images by predicted
quality and spend the budget on the lowest-ranked ones.  Rectangle, Chance,
and Perfect baselines mirror the evaluation protocol.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import masks
from .candidates import CandidateSet
from .features import feature_matrix

COST_FROM_SCRATCH = 54.0
COST_COARSE = 20.0
COST_RECTANGLE = 7.0

SOURCE_AUTO = "AUTO"
SOURCE_HUMAN = "HUMAN"

# guards float artifacts like 0.35 * 20 = 6.999... from flooring one short
_FRACTION_EPS = 1e-9


@dataclass(frozen=True)
class BudgetSpec:
    """Human budget, either a fraction of the batch or a number of seconds."""
    mode: str
    value: float
    cost_from_scratch: float = COST_FROM_SCRATCH
    cost_coarse: float = COST_COARSE
    cost_rectangle: float = COST_RECTANGLE

    def __post_init__(self):
        if self.mode not in ("fraction", "seconds"):
            raise ValueError(f"unknown budget mode {self.mode!r}")
        if self.mode == "fraction" and not 0.0 <= self.value <= 1.0:
            raise ValueError(f"fraction must be in [0, 1], got {self.value}")
        if self.mode == "seconds" and self.value < 0:
            raise ValueError(f"seconds must be >= 0, got {self.value}")
        if min(self.cost_from_scratch, self.cost_coarse, self.cost_rectangle) <= 0:
            raise ValueError("costs must be positive")

    def human_count(self, n: int, cost_per_image: float) -> int:
        """Number of whole images the budget covers; no partial annotations."""
        if self.mode == "fraction":
            return int(np.floor(self.value * n + _FRACTION_EPS))
        return min(n, int(np.floor(self.value / cost_per_image + _FRACTION_EPS)))


@dataclass(frozen=True)
class PlanEntry:
    image_id: str
    source: str
    predicted_score: float
    generator_id: str | None = None
    human_cost_seconds: float = 0.0


@dataclass(frozen=True)
class AllocationPlan:
    entries: tuple[PlanEntry, ...]

    @property
    def human_ids(self) -> list[str]:
        return [e.image_id for e in self.entries if e.source == SOURCE_HUMAN]

    @property
    def auto_ids(self) -> list[str]:
        return [e.image_id for e in self.entries if e.source == SOURCE_AUTO]

    def entry_for(self, image_id: str) -> PlanEntry:
        for e in self.entries:
            if e.image_id == image_id:
                return e
        raise KeyError(image_id)


def select_best_candidate(cs: CandidateSet, model) -> tuple[str, np.ndarray, float]:
    """The computer's choice: candidate with the highest predicted quality.

    Ties go to the earliest registry slot.
    """
    if len(cs) == 0:
        raise ValueError(f"no candidates for image {cs.image_id!r}")
    X = feature_matrix([m for _gid, m in cs.candidates])
    scores = np.asarray(model.predict(X), dtype=np.float64)
    best = int(np.argmax(scores))
    gid, mask = cs.candidates[best]
    return gid, mask, float(scores[best])


def oracle_perfect(cs: CandidateSet, gt: np.ndarray) -> tuple[str, np.ndarray, float]:
    """Evaluation-only oracle: candidate with the highest actual overlap."""
    if len(cs) == 0:
        raise ValueError(f"no candidates for image {cs.image_id!r}")
    scores = [masks.jaccard(m, gt) for _gid, m in cs.candidates]
    best = int(np.argmax(scores))
    gid, mask = cs.candidates[best]
    return gid, mask, float(scores[best])


def baseline_chance(cs: CandidateSet, rng: np.random.Generator
                    ) -> tuple[str, np.ndarray, float]:
    """Deploy a uniformly random candidate; score reported as NaN (unused)."""
    if len(cs) == 0:
        raise ValueError(f"no candidates for image {cs.image_id!r}")
    pick = int(rng.integers(0, len(cs)))
    gid, mask = cs.candidates[pick]
    return gid, mask, float("nan")


def baseline_rectangle(width: int, height: int) -> np.ndarray:
    """Centered rectangle mask cropping 5% of the minimum dimension per side."""
    if width < 20 or height < 20:
        raise ValueError(f"image too small for rectangle baseline: {width}x{height}")
    margin = int(np.floor(0.05 * min(width, height) + 0.5))
    if 2 * margin >= min(width, height):
        raise ValueError(f"margin {margin} consumes the whole image")
    return masks.Rect(margin, margin, width - margin, height - margin
                      ).to_mask(height, width)


def _ranked(batch: list[tuple[str, float]]) -> list[tuple[str, float]]:
    ids = [i for i, _ in batch]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate image ids in batch")
    scores = np.asarray([s for _, s in batch], dtype=np.float64)
    if not np.isfinite(scores).all():
        raise ValueError("scores must be finite")
    return sorted(batch, key=lambda e: (e[1], e[0]))


def _plan(batch: list[tuple[str, float]], cost: float, human_ids: set[str],
          generators: dict[str, str] | None) -> AllocationPlan:
    generators = generators or {}
    entries = []
    for image_id, score in sorted(batch, key=lambda e: e[0]):
        if image_id in human_ids:
            entries.append(PlanEntry(image_id, SOURCE_HUMAN, score,
                                     human_cost_seconds=cost))
        else:
            entries.append(PlanEntry(image_id, SOURCE_AUTO, score,
                                     generator_id=generators.get(image_id)))
    return AllocationPlan(entries=tuple(entries))


def plan_coarse(batch: list[tuple[str, float]], budget: BudgetSpec,
                generators: dict[str, str] | None = None) -> AllocationPlan:
    """Send the k lowest-predicted images to humans for coarse annotation."""
    ranked = _ranked(batch)
    k = budget.human_count(len(ranked), budget.cost_coarse)
    human = {i for i, _ in ranked[:k]}
    return _plan(batch, budget.cost_coarse, human, generators)


def plan_fine(batch: list[tuple[str, float]], budget: BudgetSpec,
              generators: dict[str, str] | None = None) -> AllocationPlan:
    """Send the k lowest-predicted images to humans for from-scratch redraw."""
    ranked = _ranked(batch)
    k = budget.human_count(len(ranked), budget.cost_from_scratch)
    human = {i for i, _ in ranked[:k]}
    return _plan(batch, budget.cost_from_scratch, human, generators)


def chance_plan(batch: list[tuple[str, float]], budget: BudgetSpec,
                rng: np.random.Generator, cost: float = COST_COARSE,
                generators: dict[str, str] | None = None) -> AllocationPlan:
    """Give the budgeted number of uniformly random images to humans."""
    _ranked(batch)  # validation only
    k = budget.human_count(len(batch), cost)
    ids_sorted = sorted(i for i, _ in batch)
    perm = rng.permutation(len(ids_sorted))
    human = {ids_sorted[j] for j in perm[:k]}
    return _plan(batch, cost, human, generators)


def perfect_plan(batch: list[tuple[str, float]], budget: BudgetSpec,
                 cost: float = COST_COARSE,
                 generators: dict[str, str] | None = None) -> AllocationPlan:
    """Rank by actual scores (oracle); the batch must carry actual jaccards."""
    ranked = _ranked(batch)
    k = budget.human_count(len(ranked), cost)
    human = {i for i, _ in ranked[:k]}
    return _plan(batch, cost, human, generators)


def plan_cost(plan: AllocationPlan) -> float:
    return float(sum(e.human_cost_seconds for e in plan.entries
                     if e.source == SOURCE_HUMAN))


# --- CSV persistence -------------------------------------------------------

PLAN_COLUMNS = ("image_id", "source", "generator_id", "predicted_score",
                "cost_seconds")


def save_plan_csv(plan: AllocationPlan, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PLAN_COLUMNS)
        for e in plan.entries:
            w.writerow([e.image_id, e.source, e.generator_id or "",
                        repr(float(e.predicted_score)),
                        repr(float(e.human_cost_seconds))])


def load_plan_csv(path) -> AllocationPlan:
    entries = []
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if header is None or tuple(header) != PLAN_COLUMNS:
            raise ValueError(f"unexpected plan CSV header in {path}")
        for row in r:
            if len(row) != len(PLAN_COLUMNS):
                raise ValueError(f"malformed plan row in {path}: {row!r}")
            image_id, source, gid, score, cost = row
            if source not in (SOURCE_AUTO, SOURCE_HUMAN):
                raise ValueError(f"unknown source {source!r} in {path}")
            entries.append(PlanEntry(
                image_id=image_id, source=source,
                predicted_score=float(score),
                generator_id=gid or None,
                human_cost_seconds=float(cost)))
    return AllocationPlan(entries=tuple(entries))
