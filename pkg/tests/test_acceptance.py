"""Release acceptance gate.

Each test covers one numbered acceptance check end to end, asserts the
stated tolerance and time budget, and prints a single verdict line so a
full run reads as a checklist.
"""
import math
import threading
import time
from contextlib import contextmanager
from fractions import Fraction

import numpy as np
import pytest
from fastapi.testclient import TestClient

from segalloc import allocate, masks
from segalloc.allocate import AllocationPlan, BudgetSpec, PlanEntry
from segalloc.annotator import make_annotator
from segalloc.candidates import otsu_threshold, postprocess
from segalloc.chanvese import ChanVeseParams, refine
from segalloc.corpus import ellipse_mask, synth_corpus
from segalloc.experiments import (STRATEGIES, build_corpus_training_set,
                                  default_budget_grid, run_prediction_eval,
                                  run_sweep)
from segalloc.features import extract_features
from segalloc.forest import QualityRegressionForest, save_model
from segalloc.masks import (closing, fill_holes, jaccard, largest_component,
                            opening)
from segalloc.service import TaskLedger, create_app
from segalloc.training import TrainingExample, crossval, examples_to_arrays
from tests.conftest import random_blob, random_mask


@contextmanager
def verdict(capsys, label):
    t0 = time.perf_counter()
    try:
        yield
    except BaseException:
        with capsys.disabled():
            print(f"[acceptance {label}] FAIL "
                  f"({time.perf_counter() - t0:.1f}s)", flush=True)
        raise
    with capsys.disabled():
        print(f"[acceptance {label}] PASS "
              f"({time.perf_counter() - t0:.1f}s)", flush=True)


@pytest.fixture(scope="module")
def corpus100(tmp_path_factory):
    return synth_corpus(tmp_path_factory.mktemp("acc-corpus"), n=100, seed=42)


@pytest.fixture(scope="module")
def sweep_model(tmp_path_factory):
    """Quality model fitted on a disjoint dataset (different generation seed)."""
    train = synth_corpus(tmp_path_factory.mktemp("acc-train"), n=100, seed=7)
    examples = build_corpus_training_set(train)
    X, y, _ids, keys = examples_to_arrays(examples)
    return QualityRegressionForest(seed=0).fit(X, y, keys=keys)


def test_01_jaccard_matches_pixel_counting(capsys):
    with verdict(capsys, "01 jaccard == pixel-count oracle on 1000 pairs, <1s"):
        rng = np.random.default_rng(1)
        t0 = time.perf_counter()
        for i in range(1000):
            p = 0.0 if i % 100 == 0 else float(rng.uniform(0.05, 0.95))
            a = random_mask(rng, 16, 16, p=p)
            b = random_mask(rng, 16, 16, p=p)
            inter = union = 0
            for ra, rb in zip(a.tolist(), b.tolist()):
                for x, y in zip(ra, rb):
                    if x and y:
                        inter += 1
                    if x or y:
                        union += 1
            want = 1.0 if union == 0 else inter / union
            assert jaccard(a, b) == want
        assert time.perf_counter() - t0 < 1.0


def test_02_otsu_matches_exhaustive_argmax(capsys):
    with verdict(capsys, "02 otsu == exhaustive rational argmax on 100 images, <1s"):
        rng = np.random.default_rng(2)
        t0 = time.perf_counter()
        for i in range(100):
            if i % 3 == 0:
                img = rng.integers(0, 256, (32, 32)).astype(np.uint8)
            else:
                lo = rng.integers(0, 120, (32, 32))
                hi = rng.integers(130, 256, (32, 32))
                img = np.where(rng.random((32, 32)) < 0.4, hi, lo).astype(np.uint8)
            c = np.bincount(img.ravel(), minlength=256).astype(np.int64)
            v = np.arange(256, dtype=np.int64)
            n0 = np.cumsum(c)
            s0 = np.cumsum(v * c)
            total_n, total_s = int(n0[-1]), int(s0[-1])
            best_t, best = 0, Fraction(-1)
            for t in range(256):
                na, sa = int(n0[t]), int(s0[t])
                nb, sb = total_n - na, total_s - sa
                if na == 0 or nb == 0:
                    val = Fraction(0)
                else:
                    # textbook between-class variance w0*w1*(mu0-mu1)^2
                    val = (Fraction(na, total_n) * Fraction(nb, total_n)
                           * (Fraction(sa, na) - Fraction(sb, nb)) ** 2)
                if val > best:
                    best_t, best = t, val
            assert otsu_threshold(img) == best_t
        assert time.perf_counter() - t0 < 1.0


def test_03_morphology_invariants(capsys):
    with verdict(capsys, "03 closing/opening containment + idempotence on 200 masks"):
        rng = np.random.default_rng(3)
        for _ in range(200):
            h = int(rng.integers(8, 28))
            w = int(rng.integers(8, 28))
            m = random_mask(rng, h, w, p=float(rng.uniform(0.1, 0.8)))
            for r in (1, 3):
                assert not (m & ~closing(m, r)).any()
                assert not (opening(m, r) & ~m).any()
            f = fill_holes(m)
            assert (fill_holes(f) == f).all()
            keep = largest_component(m)
            assert (largest_component(keep) == keep).all()


def test_04_feature_invariances_and_bands(capsys):
    with verdict(capsys, "04 translation-invariant features, solidity>=extent, disk bands"):
        rng = np.random.default_rng(4)
        invariant = [0, 1, 2, 3, 4, 7, 8]  # all but the centroid pair
        for _ in range(100):
            blob = random_blob(rng, 24, 24)
            base = np.zeros((48, 48), bool)
            base[8:32, 8:32] = blob
            dy = int(rng.integers(-6, 7))
            dx = int(rng.integers(-6, 7))
            moved = np.zeros((48, 48), bool)
            moved[8 + dy:32 + dy, 8 + dx:32 + dx] = blob
            fa = extract_features(base)
            fb = extract_features(moved)
            assert (fa[invariant] == fb[invariant]).all()
        for _ in range(500):
            m = random_mask(rng, 20, 20, p=float(rng.uniform(0.1, 0.9)))
            if not m.any():
                continue
            f = extract_features(m)
            assert f[3] >= f[2]  # hull never exceeds the bounding box
        disk = ellipse_mask(64, 64, 32.0, 32.0, 20.0, 20.0, 0.0)
        f = extract_features(disk)
        assert f[1] / f[0] <= 0.05
        assert 0.7 <= f[4] <= 1.1


def _extent_masks(n: int) -> list:
    rng = np.random.default_rng(0)
    out = []
    for i in range(n):
        m = None
        while m is None or not m.any():
            kind = i % 3
            if kind == 0:
                m = ellipse_mask(24, 24, float(rng.uniform(8, 16)),
                                 float(rng.uniform(8, 16)),
                                 float(rng.uniform(3, 9)),
                                 float(rng.uniform(3, 9)),
                                 float(rng.uniform(0, math.pi)))
            elif kind == 1:
                m = np.zeros((24, 24), bool)
                r0 = int(rng.integers(0, 12))
                c0 = int(rng.integers(0, 12))
                m[r0:r0 + int(rng.integers(4, 13)),
                  c0:c0 + int(rng.integers(4, 13))] = True
            else:
                m = largest_component(
                    random_mask(rng, 24, 24, p=float(rng.uniform(0.35, 0.65))))
        out.append(m)
    return out


def test_05_forest_sanity_and_reproducibility(capsys, tmp_path):
    with verdict(capsys, "05 forest recovers extent label, byte-identical refits, <30s"):
        t0 = time.perf_counter()
        examples = []
        for i, m in enumerate(_extent_masks(2000)):
            f = extract_features(m)
            examples.append(TrainingExample(f"m{i:05d}", "gt", f, float(f[2])))
        report, _ = crossval(examples,
                             lambda: QualityRegressionForest(seed=0),
                             k=10, seed=0)
        assert report.cc is not None and report.cc >= 0.95
        assert report.mae <= 0.05

        X, y, _ids, keys = examples_to_arrays(examples)
        perm = np.random.default_rng(1).permutation(len(y))
        paths = [tmp_path / f"m{j}.json" for j in range(3)]
        save_model(QualityRegressionForest(seed=0).fit(X, y, keys=keys), paths[0])
        save_model(QualityRegressionForest(seed=0).fit(X, y, keys=keys), paths[1])
        save_model(QualityRegressionForest(seed=0).fit(
            X[perm], y[perm], keys=[keys[j] for j in perm]), paths[2])
        blobs = [p.read_bytes() for p in paths]
        assert blobs[0] == blobs[1] == blobs[2]
        assert time.perf_counter() - t0 < 30.0


def test_06_dataset_prediction_quality(corpus100, capsys):
    with verdict(capsys, "06 10-fold cc>=0.6 mae<=0.25, forest beats linear, <5min"):
        t0 = time.perf_counter()
        forest_report, examples, _ = run_prediction_eval(
            corpus100, mode="single", model_kind="forest", k=10, seed=0)
        linear_report, _, _ = run_prediction_eval(
            corpus100, mode="single", model_kind="linear", k=10, seed=0)
        assert len(examples) == 10 * len(corpus100)
        assert forest_report.cc is not None and forest_report.cc >= 0.6
        assert forest_report.mae <= 0.25
        assert forest_report.cc > linear_report.cc
        assert time.perf_counter() - t0 < 300.0


def test_07_levelset_recovery_and_fixed_point(capsys):
    with verdict(capsys, "07 level-set recovers offset disk >=0.95, mu=0 identity, <10s"):
        gt = ellipse_mask(100, 100, 50.0, 50.0, 25.0, 25.0, 0.0)
        img = np.full((100, 100), 0.2 * 255.0)
        img[gt] = 0.8 * 255.0
        img = np.clip(np.floor(img + 0.5), 0, 255).astype(np.uint8)
        init = ellipse_mask(100, 100, 42.0, 41.0, 20.0, 20.0, 0.0)
        t0 = time.perf_counter()
        out = refine(img, init)
        took = time.perf_counter() - t0
        assert jaccard(out, gt) >= 0.95
        assert took < 10.0
        fixed = refine(img, gt, ChanVeseParams(mu=0.0))
        assert (fixed == postprocess(gt)).all()


def test_08_allocation_identities_and_sweep(corpus100, sweep_model, capsys,
                                            tmp_path):
    with verdict(capsys, "08 budget identities, k-lowest oracle, sweep monotone "
                         "and perfect>=chance, <15min"):
        rng = np.random.default_rng(8)
        batch = [(f"im{i:03d}", float(rng.random())) for i in range(20)]
        all_auto = allocate.plan_coarse(batch, BudgetSpec(mode="fraction", value=0.0))
        assert len(all_auto.human_ids) == 0 and len(all_auto.auto_ids) == 20
        all_human = allocate.plan_coarse(batch, BudgetSpec(mode="fraction", value=1.0))
        assert len(all_human.human_ids) == 20 and len(all_human.auto_ids) == 0

        for _ in range(1000):
            n = int(rng.integers(1, 30))
            scores = np.round(rng.random(n), 2)  # coarse grid induces ties
            b = [(f"x{j:02d}", float(s)) for j, s in enumerate(scores)]
            frac = float(rng.random())
            plan = allocate.plan_coarse(b, BudgetSpec(mode="fraction", value=frac))
            k = int(math.floor(frac * n + 1e-9))
            want = {i for i, _ in sorted(b, key=lambda e: (e[1], e[0]))[:k]}
            assert set(plan.human_ids) == want

        grid = default_budget_grid()
        mono_rows, _ = run_sweep(corpus100, strategies=("perfect",),
                                 budgets=grid, refiner="none",
                                 seeds=(0, 1, 2, 3, 4), human="gt")
        for seed in (0, 1, 2, 3, 4):
            curve = sorted((r.budget_fraction, r.mean_jaccard)
                           for r in mono_rows if r.seed == seed)
            for (_, lo), (_, hi) in zip(curve, curve[1:]):
                assert hi >= lo - 1e-12

        t0 = time.perf_counter()
        rows, _ = run_sweep(corpus100, strategies=STRATEGIES, budgets=grid,
                            refiner="chanvese", seeds=(0, 1, 2, 3, 4),
                            model=sweep_model, human="sim",
                            out_dir=tmp_path / "sweep")
        took = time.perf_counter() - t0
        assert took < 900.0
        cells = {}
        for r in rows:
            cells.setdefault((r.strategy, r.budget_fraction), []).append(r.mean_jaccard)
        for frac in grid:
            perfect = float(np.mean(cells[("perfect", frac)]))
            chance = float(np.mean(cells[("chance", frac)]))
            assert perfect >= chance - 1e-12


def test_09_rectangle_baseline_bit_exact(capsys):
    with verdict(capsys, "09 centered-rectangle masks bit-exact"):
        got = allocate.baseline_rectangle(300, 200)
        want = np.zeros((200, 300), bool)
        want[10:190, 10:290] = True
        assert got.dtype == bool and (got == want).all()
        got = allocate.baseline_rectangle(100, 100)
        want = np.zeros((100, 100), bool)
        want[5:95, 5:95] = True
        assert (got == want).all()


def test_10_coarse_annotator_quality_band(corpus100, capsys):
    with verdict(capsys, "10 coarse annotator corpus mean in [0.53, 0.63]"):
        ann = make_annotator(corpus100, mode="coarse", seed=0)
        scores = []
        for entry in corpus100.entries:
            gt = corpus100.load_gt(entry.image_id)
            scores.append(jaccard(ann.annotate(entry.image_id, gt), gt))
        mean = float(np.mean(scores))
        assert 0.53 <= mean <= 0.63


def test_11_service_http_contract(corpus100, tmp_path, capsys):
    with verdict(capsys, "11 service worst-first, rectangle oracle, 8-way claims, "
                         "restart"):
        state = tmp_path / "state"
        app = create_app(corpus100, state)
        client = TestClient(app)
        ids = corpus100.ids[:3]
        app.state.ledger.enqueue_plan(AllocationPlan(entries=tuple(
            PlanEntry(i, allocate.SOURCE_HUMAN, s, human_cost_seconds=20.0)
            for i, s in zip(ids, (0.5, 0.15, 0.8)))))

        task = client.get("/api/v1/tasks/next").json()
        assert task["image_id"] == ids[1]  # lowest predicted score first
        w, h = task["width"], task["height"]
        m = int(math.floor(0.05 * min(w, h) + 0.5))
        r = client.post(
            f"/api/v1/tasks/{task['task_id']}/annotation",
            json={"vertices": [[m, m], [w - m, m], [w - m, h - m], [m, h - m]]})
        assert r.status_code == 200
        saved = masks.load_mask(state / "masks" / f"{ids[1]}.png")
        assert jaccard(saved, allocate.baseline_rectangle(w, h)) == 1.0

        state2 = tmp_path / "state2"
        app2 = create_app(corpus100, state2)
        client2 = TestClient(app2)
        ids8 = corpus100.ids[3:11]
        app2.state.ledger.enqueue_plan(AllocationPlan(entries=tuple(
            PlanEntry(i, allocate.SOURCE_HUMAN, k / 10, human_cost_seconds=20.0)
            for k, i in enumerate(ids8))))
        claimed = []
        barrier = threading.Barrier(8)

        def worker():
            barrier.wait()
            resp = client2.get("/api/v1/tasks/next")
            if resp.status_code == 200:
                claimed.append(resp.json()["task_id"])

        threads = [threading.Thread(target=worker) for _ in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert len(claimed) == 8 and len(set(claimed)) == 8

        reborn = TaskLedger(state)
        counts = reborn.counts()
        assert counts["done"] == 1 and counts["pending"] == 2
        assert counts["total"] == 3
