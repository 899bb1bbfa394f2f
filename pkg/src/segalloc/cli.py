"""Command-line interface for corpus generation, training, evaluation,
budget sweeps, planning, and the annotation service."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import allocate, masks
from .candidates import generate_candidates, load_imports
from .corpus import DEFAULT_SIZE, ingest, synth_corpus
from .experiments import (STRATEGIES, build_corpus_training_set,
                          dataset_stats, default_budget_grid,
                          run_prediction_eval, run_sweep, save_stats_csv,
                          write_run_manifest)
from .forest import QualityRegressionForest, load_model, save_model
from .service import create_app
from .training import examples_to_arrays, save_examples_csv


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip() != "")


def _parse_ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip() != "")


def _parse_names(text: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in text.split(",") if v.strip() != "")


def cmd_gen_corpus(args) -> int:
    manifest = synth_corpus(args.root, n=args.n, seed=args.seed,
                            height=args.size, width=args.size)
    print(f"generated {len(manifest)} images under {manifest.root}")
    return 0


def cmd_stats(args) -> int:
    manifest = ingest(args.root)
    stats = dataset_stats(manifest)
    if args.out:
        save_stats_csv(stats, args.out)
        print(f"wrote {args.out}")
    for col, v in stats.items():
        print(f"{col}: mean={v['mean']:.4f} std={v['std']:.4f}")
    return 0


def cmd_train(args) -> int:
    manifest = ingest(args.root)
    examples = build_corpus_training_set(manifest, import_dir=args.import_dir)
    X, y, _ids, keys = examples_to_arrays(examples)
    model = QualityRegressionForest(seed=args.seed)
    model.fit(X, y, keys=keys)
    save_model(model, args.out)
    if args.examples_out:
        save_examples_csv(examples, args.examples_out)
    print(f"trained on {len(examples)} examples from {len(manifest)} images; "
          f"wrote {args.out}")
    return 0


def cmd_eval_pred(args) -> int:
    manifest = ingest(args.root)
    cross = ingest(args.cross_root) if args.cross_root else None
    report, examples, _preds = run_prediction_eval(
        manifest, mode=args.mode, model_kind=args.model_kind, k=args.k,
        seed=args.seed, cross_manifest=cross, import_dir=args.import_dir,
        out_dir=args.out)
    cc = "undefined (zero variance)" if report.cc is None else f"{report.cc:.4f}"
    print(f"examples={len(examples)} cc={cc} mae={report.mae:.4f}")
    return 0


def cmd_sweep(args) -> int:
    manifest = ingest(args.root)
    model = load_model(args.model) if args.model else None
    budgets = (_parse_floats(args.budget_grid) if args.budget_grid
               else default_budget_grid())
    strategies = (_parse_names(args.strategies) if args.strategies
                  else STRATEGIES)
    seeds = _parse_ints(args.seeds) if args.seeds else (0, 1, 2, 3, 4)
    rows, _details = run_sweep(
        manifest, strategies=strategies, budgets=budgets, refiner=args.refiner,
        seeds=seeds, model=model, human=args.human,
        import_dir=args.import_dir, out_dir=args.out)
    print(f"{len(rows)} sweep rows"
          + (f"; wrote {Path(args.out) / 'sweep.csv'}" if args.out else ""))
    return 0


def cmd_plan(args) -> int:
    manifest = ingest(args.root)
    model = load_model(args.model)
    batch = []
    generators = {}
    for e in manifest.entries:
        img = manifest.load_image(e.image_id)
        imports = ()
        if args.import_dir:
            imports = load_imports(args.import_dir, e.image_id, img.shape)
        cs = generate_candidates(img, image_id=e.image_id, imports=imports)
        gid, _mask, score = allocate.select_best_candidate(cs, model)
        batch.append((e.image_id, score))
        generators[e.image_id] = gid
    budget = allocate.BudgetSpec(mode=args.budget_mode, value=args.budget)
    if args.mode == "fine":
        plan = allocate.plan_fine(batch, budget, generators=generators)
    else:
        plan = allocate.plan_coarse(batch, budget, generators=generators)
    allocate.save_plan_csv(plan, args.out)
    print(f"planned {len(plan.human_ids)} HUMAN / {len(plan.auto_ids)} AUTO; "
          f"cost {allocate.plan_cost(plan):.0f}s; wrote {args.out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    manifest = ingest(args.root)
    app = create_app(manifest, args.state, frontend_dir=args.frontend)
    if args.plan:
        plan = allocate.load_plan_csv(args.plan)
        try:
            created = app.state.ledger.enqueue_plan(plan, mode=args.mode)
            print(f"enqueued {len(created)} tasks from {args.plan}")
        except ValueError as exc:
            print(f"note: {exc}")
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def cmd_annotate_apply(args) -> int:
    manifest = ingest(args.root)
    plan = allocate.load_plan_csv(args.plan)
    masks_dir = Path(args.state) / "masks"
    rows = []
    for entry in plan.entries:
        gt = manifest.load_gt(entry.image_id)
        if entry.source == allocate.SOURCE_HUMAN:
            path = masks_dir / f"{entry.image_id}.png"
            if not path.exists():
                rows.append((entry.image_id, entry.source, "", "missing", ""))
                continue
            mask = masks.load_mask(path)
        else:
            img = manifest.load_image(entry.image_id)
            imports = ()
            if args.import_dir:
                imports = load_imports(args.import_dir, entry.image_id, img.shape)
            cs = generate_candidates(img, image_id=entry.image_id,
                                     imports=imports)
            mask = cs.mask_for(entry.generator_id)
        score = masks.jaccard(mask, gt)
        rows.append((entry.image_id, entry.source, entry.generator_id or "",
                     "done", repr(score)))
    import csv as _csv
    with open(args.out, "w", newline="") as fh:
        w = _csv.writer(fh)
        w.writerow(("image_id", "source", "generator_id", "status", "jaccard"))
        w.writerows(rows)
    done = [r for r in rows if r[3] == "done"]
    scores = [float(r[4]) for r in done]
    mean = float(np.mean(scores)) if scores else float("nan")
    print(f"{len(done)}/{len(rows)} entries resolved; mean jaccard {mean:.4f}; "
          f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="segalloc",
                                description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-corpus", help="generate a synthetic dataset")
    g.add_argument("--root", required=True)
    g.add_argument("--n", type=int, default=100)
    g.add_argument("--seed", type=int, default=42)
    g.add_argument("--size", type=int, default=DEFAULT_SIZE)
    g.set_defaults(func=cmd_gen_corpus)

    s = sub.add_parser("stats", help="dataset characterization table")
    s.add_argument("--root", required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_stats)

    t = sub.add_parser("train", help="train the quality model")
    t.add_argument("--root", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--import-dir")
    t.add_argument("--examples-out")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval-pred", help="prediction-quality evaluation")
    e.add_argument("--root", required=True)
    e.add_argument("--mode", choices=("single", "cross"), default="single")
    e.add_argument("--cross-root")
    e.add_argument("--model-kind", choices=("forest", "linear"),
                   default="forest")
    e.add_argument("--k", type=int, default=10)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--import-dir")
    e.add_argument("--out")
    e.set_defaults(func=cmd_eval_pred)

    w = sub.add_parser("sweep", help="budget-sweep experiment")
    w.add_argument("--root", required=True)
    w.add_argument("--model")
    w.add_argument("--budget-grid")
    w.add_argument("--strategies")
    w.add_argument("--refiner", choices=("chanvese", "none"),
                   default="chanvese")
    w.add_argument("--seeds")
    w.add_argument("--human", choices=("sim", "gt"), default="sim")
    w.add_argument("--import-dir")
    w.add_argument("--out")
    w.set_defaults(func=cmd_sweep)

    pl = sub.add_parser("plan", help="score a batch and write an allocation plan")
    pl.add_argument("--root", required=True)
    pl.add_argument("--model", required=True)
    pl.add_argument("--budget", type=float, required=True)
    pl.add_argument("--budget-mode", choices=("fraction", "seconds"),
                    default="fraction")
    pl.add_argument("--mode", choices=("coarse", "fine"), default="coarse")
    pl.add_argument("--import-dir")
    pl.add_argument("--out", required=True)
    pl.set_defaults(func=cmd_plan)

    sv = sub.add_parser("serve", help="start the annotation service")
    sv.add_argument("--root", required=True)
    sv.add_argument("--state", required=True)
    sv.add_argument("--plan")
    sv.add_argument("--mode", choices=("coarse", "fine"))
    sv.add_argument("--frontend")
    sv.add_argument("--host", default="127.0.0.1")
    sv.add_argument("--port", type=int, default=8000)
    sv.set_defaults(func=cmd_serve)

    a = sub.add_parser("annotate-apply",
                       help="merge human masks into a plan's results")
    a.add_argument("--root", required=True)
    a.add_argument("--plan", required=True)
    a.add_argument("--state", required=True)
    a.add_argument("--import-dir")
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_annotate_apply)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
