"""End-to-end experiment harness: prediction evaluation, budget sweeps, and
dataset characterization.

The budget sweep reruns the full pipeline (candidates, scoring, planning,
simulated human input, refinement) for every strategy x budget x seed cell
and reports the batch mean jaccard per cell.  Refinement results are cached
by (image_id, mask) so identical initializations are never refined twice.
"""
from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from . import allocate, masks
from .annotator import SimAnnotator, make_annotator
from .candidates import CandidateSet, generate_candidates, load_imports
from .chanvese import ChanVeseParams, refine
from .corpus import DatasetManifest
from .features import SCHEMA_VERSION, extract_features
from .forest import LinearQualityModel, QualityRegressionForest, _rng
from .training import EvalReport, TrainingExample, build_training_set, crossval, \
    evaluate, examples_to_arrays

_TAG_CHANCE_PICK = 6
_TAG_CHANCE_PLAN = 7

STRATEGIES = ("ours", "perfect", "chance", "rectangle", "no_refinement")
REFINERS = ("chanvese", "none")


def default_budget_grid(step: float = 0.05) -> tuple[float, ...]:
    """0, step, ..., 1.0: the sweep's budget fractions."""
    n = int(round(1.0 / step))
    return tuple(round(i * step, 10) for i in range(n + 1))


@dataclass(frozen=True)
class SweepRow:
    strategy: str
    budget_fraction: float
    human_count: int
    mean_jaccard: float
    total_human_seconds: float
    seed: int


def _mask_key(image_id: str, mask: np.ndarray) -> tuple[str, bytes]:
    digest = hashlib.sha256(np.packbits(mask).tobytes()).digest()
    return (image_id, digest)


class _Pipeline:
    """Shared per-corpus state for one sweep run: images, candidates, caches."""

    def __init__(self, manifest: DatasetManifest, refiner: str,
                 chanvese_params: ChanVeseParams | None,
                 import_dir=None, generators_enabled=None):
        if refiner not in REFINERS:
            raise ValueError(f"unknown refiner {refiner!r}")
        self.refiner = refiner
        self.params = chanvese_params or ChanVeseParams()
        self.images: dict[str, np.ndarray] = {}
        self.gts: dict[str, np.ndarray] = {}
        self.cands: dict[str, CandidateSet] = {}
        self._refined: dict[tuple[str, bytes], np.ndarray] = {}
        for e in manifest.entries:
            img = manifest.load_image(e.image_id)
            gt = manifest.load_gt(e.image_id)
            imports = ()
            if import_dir is not None:
                imports = load_imports(import_dir, e.image_id, img.shape)
            cs = generate_candidates(img, image_id=e.image_id, imports=imports)
            if generators_enabled is not None:
                kept = [(g, m) for g, m in cs.candidates if g in generators_enabled]
                cs = CandidateSet(image_id=e.image_id, candidates=kept)
            self.images[e.image_id] = img
            self.gts[e.image_id] = gt
            self.cands[e.image_id] = cs
        self.ids = sorted(self.images)

    def refined(self, image_id: str, mask: np.ndarray) -> np.ndarray:
        if self.refiner == "none":
            return mask
        key = _mask_key(image_id, mask)
        if key not in self._refined:
            self._refined[key] = refine(self.images[image_id], mask, self.params)
        return self._refined[key]


def _selections(pipe: _Pipeline, strategy: str, model, seed: int
                ) -> dict[str, tuple[str, np.ndarray, float]]:
    """Per-image (generator_id, mask, ranking_score) for a strategy's AUTO side."""
    out = {}
    for image_id in pipe.ids:
        cs = pipe.cands[image_id]
        if strategy in ("ours", "no_refinement"):
            out[image_id] = allocate.select_best_candidate(cs, model)
        elif strategy == "perfect":
            out[image_id] = allocate.oracle_perfect(cs, pipe.gts[image_id])
        elif strategy in ("chance", "rectangle"):
            rng = _rng(seed, _TAG_CHANCE_PICK,
                       int.from_bytes(hashlib.sha256(
                           image_id.encode()).digest()[:8], "big"))
            gid, mask, _ = allocate.baseline_chance(cs, rng)
            out[image_id] = (gid, mask, 0.0)
        else:
            raise ValueError(f"unknown strategy {strategy!r}")
    return out


def _human_mask(pipe: _Pipeline, strategy: str, image_id: str,
                annotator: SimAnnotator | None) -> np.ndarray:
    if strategy == "rectangle":
        h, w = pipe.images[image_id].shape
        return allocate.baseline_rectangle(w, h)
    if annotator is None:  # gt-human mode (oracle upper bound)
        return pipe.gts[image_id]
    return annotator.annotate(image_id, pipe.gts[image_id])


def run_sweep(manifest: DatasetManifest, strategies=STRATEGIES,
              budgets=None, refiner: str = "chanvese", seeds=(0, 1, 2, 3, 4),
              model=None, human: str = "sim", annotator_mode: str = "coarse",
              chanvese_params: ChanVeseParams | None = None,
              import_dir=None, generators_enabled=None, out_dir=None
              ) -> tuple[list[SweepRow], list[dict]]:
    """Budget-sweep protocol; returns (summary rows, per-image detail rows).

    human="sim" uses the calibrated simulated annotator (one per seed);
    human="gt" substitutes the ground truth itself, the oracle upper bound
    used by the monotonicity checks.
    """
    strategies = tuple(strategies)
    unknown = set(strategies) - set(STRATEGIES)
    if unknown:
        raise ValueError(f"unknown strategies: {sorted(unknown)}")
    if budgets is None:
        budgets = default_budget_grid()
    budgets = tuple(float(b) for b in budgets)
    if list(budgets) != sorted(budgets):
        raise ValueError("budgets must be ascending")
    if human not in ("sim", "gt"):
        raise ValueError(f"unknown human mode {human!r}")
    needs_model = {"ours", "no_refinement"} & set(strategies)
    if needs_model and model is None:
        raise ValueError(f"strategies {sorted(needs_model)} require a model")

    pipe = _Pipeline(manifest, refiner, chanvese_params,
                     import_dir=import_dir, generators_enabled=generators_enabled)
    rows: list[SweepRow] = []
    details: list[dict] = []

    for seed in seeds:
        annotator = None
        if human == "sim":
            annotator = make_annotator(manifest, mode=annotator_mode, seed=seed)
        sel_cache: dict[str, dict] = {}
        for strategy in strategies:
            if strategy not in sel_cache:
                sel_cache[strategy] = _selections(pipe, strategy, model, seed)
            selections = sel_cache[strategy]
            batch = [(i, selections[i][2]) for i in pipe.ids]
            generators = {i: selections[i][0] for i in pipe.ids}
            for budget_fraction in budgets:
                budget = allocate.BudgetSpec(mode="fraction", value=budget_fraction)
                if strategy == "perfect":
                    plan = allocate.perfect_plan(batch, budget,
                                                 generators=generators)
                elif strategy in ("chance", "rectangle"):
                    cost = (budget.cost_rectangle if strategy == "rectangle"
                            else budget.cost_coarse)
                    rng = _rng(seed, _TAG_CHANCE_PLAN)
                    plan = allocate.chance_plan(batch, budget, rng, cost=cost,
                                                generators=generators)
                else:
                    plan = allocate.plan_coarse(batch, budget,
                                                generators=generators)

                scores = []
                for entry in plan.entries:
                    image_id = entry.image_id
                    if entry.source == allocate.SOURCE_HUMAN:
                        init = _human_mask(pipe, strategy, image_id, annotator)
                    else:
                        init = selections[image_id][1]
                    if strategy == "no_refinement":
                        final = init
                    else:
                        final = pipe.refined(image_id, init)
                    score = masks.jaccard(final, pipe.gts[image_id])
                    scores.append(score)
                    details.append({
                        "strategy": strategy, "budget_fraction": budget_fraction,
                        "seed": seed, "image_id": image_id,
                        "source": entry.source,
                        "generator_id": entry.generator_id or "",
                        "final_jaccard": score,
                    })
                rows.append(SweepRow(
                    strategy=strategy, budget_fraction=budget_fraction,
                    human_count=len(plan.human_ids),
                    mean_jaccard=float(np.mean(scores)),
                    total_human_seconds=allocate.plan_cost(plan), seed=seed))

    rows.sort(key=lambda r: (r.strategy, r.budget_fraction, r.seed))
    details.sort(key=lambda d: (d["strategy"], d["budget_fraction"], d["seed"],
                                d["image_id"]))
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        save_sweep_csv(rows, out_dir / "sweep.csv")
        _write_details_csv(details, out_dir / "sweep_detail.csv")
        write_run_manifest(out_dir / "run_manifest.json", {
            "command": "sweep", "strategies": list(strategies),
            "budgets": list(budgets), "refiner": refiner,
            "seeds": list(seeds), "human": human,
            "annotator_mode": annotator_mode,
            "chanvese_params": asdict(chanvese_params or ChanVeseParams()),
            "corpus_root": str(manifest.root), "n_images": len(manifest),
        })
    return rows, details


SWEEP_COLUMNS = ("strategy", "budget_fraction", "human_count", "mean_jaccard",
                 "total_human_seconds", "seed")


def save_sweep_csv(rows: list[SweepRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_COLUMNS)
        for r in rows:
            w.writerow([r.strategy, repr(r.budget_fraction), r.human_count,
                        repr(r.mean_jaccard), repr(r.total_human_seconds),
                        r.seed])


def load_sweep_csv(path) -> list[SweepRow]:
    out = []
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if header is None or tuple(header) != SWEEP_COLUMNS:
            raise ValueError(f"unexpected sweep CSV header in {path}")
        for row in r:
            out.append(SweepRow(
                strategy=row[0], budget_fraction=float(row[1]),
                human_count=int(row[2]), mean_jaccard=float(row[3]),
                total_human_seconds=float(row[4]), seed=int(row[5])))
    return out


def _write_details_csv(details: list[dict], path) -> None:
    cols = ("strategy", "budget_fraction", "seed", "image_id", "source",
            "generator_id", "final_jaccard")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for d in details:
            w.writerow([d[c] for c in cols])


# --- prediction evaluation -------------------------------------------------

def build_corpus_training_set(manifest: DatasetManifest, import_dir=None
                              ) -> list[TrainingExample]:
    items = []
    for e in manifest.entries:
        img = manifest.load_image(e.image_id)
        gt = manifest.load_gt(e.image_id)
        imports = ()
        if import_dir is not None:
            imports = load_imports(import_dir, e.image_id, img.shape)
        cs = generate_candidates(img, image_id=e.image_id, imports=imports)
        items.append((img, gt, cs))
    return build_training_set(items)


def forest_factory(seed: int = 0):
    return lambda: QualityRegressionForest(seed=seed)


def linear_factory():
    return lambda: LinearQualityModel()


def run_prediction_eval(manifest: DatasetManifest, mode: str = "single",
                        model_kind: str = "forest", k: int = 10, seed: int = 0,
                        cross_manifest: DatasetManifest | None = None,
                        import_dir=None, out_dir=None
                        ) -> tuple[EvalReport, list[TrainingExample], np.ndarray]:
    """Quality-prediction evaluation: grouped k-fold CV or cross-corpus.

    Returns (report, examples, per-example predictions).  In cross mode the
    model trains on `manifest` and is evaluated on every example of
    `cross_manifest`.
    """
    if mode not in ("single", "cross"):
        raise ValueError(f"unknown eval mode {mode!r}")
    if model_kind not in ("forest", "linear"):
        raise ValueError(f"unknown model kind {model_kind!r}")
    factory = forest_factory(seed) if model_kind == "forest" else linear_factory()

    examples = build_corpus_training_set(manifest, import_dir=import_dir)
    if mode == "single":
        if len(manifest) < k:
            raise ValueError(f"need >= {k} images for {k}-fold CV")
        report, preds = crossval(examples, factory, k=k, seed=seed)
        eval_examples = examples
    else:
        if cross_manifest is None:
            raise ValueError("cross mode needs cross_manifest")
        X, y, _ids, keys = examples_to_arrays(examples)
        model = factory()
        if isinstance(model, QualityRegressionForest):
            model.fit(X, y, keys=keys)
        else:
            model.fit(X, y)
        eval_examples = build_corpus_training_set(cross_manifest,
                                                  import_dir=import_dir)
        Xt, yt, _i, _k = examples_to_arrays(eval_examples)
        preds = np.asarray(model.predict(Xt))
        report = evaluate(preds, yt)

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "predictions.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["image_id", "provenance", "label", "prediction"])
            for ex, p in zip(eval_examples, preds):
                w.writerow([ex.image_id, ex.provenance, repr(ex.label),
                            repr(float(p))])
        write_run_manifest(out_dir / "run_manifest.json", {
            "command": "eval-pred", "mode": mode, "model_kind": model_kind,
            "k": k, "seed": seed, "corpus_root": str(manifest.root),
            "cc": report.cc, "mae": report.mae, "n": report.n,
        })
    return report, eval_examples, preds


# --- dataset characterization ---------------------------------------------

STATS_COLUMNS = ("area", "x_loc", "y_loc", "shape", "fg_fraction",
                 "fg_var", "bg_var")


def dataset_stats(manifest: DatasetManifest) -> dict[str, dict[str, float]]:
    """Mean and population std of per-image ground-truth characteristics.

    x_loc/y_loc are the gt centroid normalized by image size; fg_var/bg_var
    are the variance of Laplacian values over foreground and background.
    """
    values = {c: [] for c in STATS_COLUMNS}
    for e in manifest.entries:
        img = manifest.load_image(e.image_id)
        gt = manifest.load_gt(e.image_id)
        feats = extract_features(gt)
        h, w = gt.shape
        values["area"].append(float(gt.sum()))
        values["x_loc"].append(float(feats[5]))
        values["y_loc"].append(float(feats[6]))
        values["shape"].append(float(feats[4]))
        values["fg_fraction"].append(float(feats[7]))
        values["fg_var"].append(masks.laplacian_variance(img, gt))
        values["bg_var"].append(masks.laplacian_variance(img, ~gt))
    return {c: {"mean": float(np.mean(v)), "std": float(np.std(v))}
            for c, v in values.items()}


def save_stats_csv(stats: dict[str, dict[str, float]], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("stat",) + STATS_COLUMNS)
        for stat in ("mean", "std"):
            w.writerow([stat] + [repr(stats[c][stat]) for c in STATS_COLUMNS])


def write_run_manifest(path, config: dict) -> None:
    """Every run records enough configuration to reproduce its outputs."""
    payload = dict(config)
    payload["package_version"] = __version__
    payload["feature_schema"] = SCHEMA_VERSION
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
