"""HTTP annotation service: exposes a plan's HUMAN entries as polygon tasks.

Tasks are served worst-predicted-score first; a claimed task returns to the
queue when its claim expires.  Submitted polygons are validated, rasterized
(even-odd, pixel-center), postprocessed, and stored as PNG masks beside a
JSON ledger, so a restarted service resumes exactly where it stopped.
"""
from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from pathlib import Path

import numpy as np
from fastapi import FastAPI
from fastapi.responses import JSONResponse, Response
from fastapi.staticfiles import StaticFiles

from . import masks
from .allocate import (COST_FROM_SCRATCH, SOURCE_HUMAN, AllocationPlan)
from .candidates import postprocess
from .corpus import DatasetManifest
from .polygons import PolygonError, rasterize_polygon, validate_polygon

CLAIM_TIMEOUT_SECONDS = 600.0

STATUS_PENDING = "pending"
STATUS_CLAIMED = "claimed"
STATUS_DONE = "done"


def plan_fingerprint(plan: AllocationPlan) -> str:
    """Content hash identifying a plan; re-enqueueing the same plan is rejected."""
    payload = json.dumps(
        [[e.image_id, e.source, e.generator_id, repr(e.predicted_score),
          repr(e.human_cost_seconds)] for e in plan.entries],
        sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()


class TaskLedger:
    """Serialized mutation domain for annotation tasks; JSON-persisted.

    All state transitions run under one lock; every mutation is flushed to
    disk atomically (write-temp + rename) before it is acknowledged.
    """

    def __init__(self, state_dir, claim_timeout: float = CLAIM_TIMEOUT_SECONDS,
                 clock=time.time):
        self.state_dir = Path(state_dir)
        self.state_dir.mkdir(parents=True, exist_ok=True)
        (self.state_dir / "masks").mkdir(exist_ok=True)
        self.claim_timeout = claim_timeout
        self.clock = clock
        self._lock = threading.Lock()
        self._path = self.state_dir / "ledger.json"
        self._plans: list[str] = []
        self._tasks: dict[str, dict] = {}
        if self._path.exists():
            data = json.loads(self._path.read_text())
            self._plans = list(data["plans"])
            self._tasks = {t["task_id"]: t for t in data["tasks"]}

    def _save_locked(self) -> None:
        payload = json.dumps({
            "plans": self._plans,
            "tasks": [self._tasks[k] for k in sorted(self._tasks)],
        }, sort_keys=True, indent=2)
        tmp = self._path.with_suffix(".json.tmp")
        tmp.write_text(payload)
        os.replace(tmp, self._path)

    def _expire_locked(self) -> None:
        now = self.clock()
        dirty = False
        for t in self._tasks.values():
            if (t["status"] == STATUS_CLAIMED
                    and now - t["claimed_at"] > self.claim_timeout):
                t["status"] = STATUS_PENDING
                t["claimed_at"] = None
                dirty = True
        if dirty:
            self._save_locked()

    def enqueue_plan(self, plan: AllocationPlan, mode: str | None = None
                     ) -> list[dict]:
        """Create one pending task per HUMAN entry; duplicate plans rejected.

        mode defaults from the entry cost: from-scratch cost means fine,
        anything else coarse.
        """
        fingerprint = plan_fingerprint(plan)
        with self._lock:
            if fingerprint in self._plans:
                raise ValueError(f"plan {fingerprint[:12]} already enqueued")
            created = []
            for e in plan.entries:
                if e.source != SOURCE_HUMAN:
                    continue
                task_mode = mode
                if task_mode is None:
                    task_mode = ("fine" if e.human_cost_seconds == COST_FROM_SCRATCH
                                 else "coarse")
                task = {
                    "task_id": f"{fingerprint[:12]}-{e.image_id}",
                    "plan_id": fingerprint,
                    "image_id": e.image_id,
                    "mode": task_mode,
                    "predicted_score": e.predicted_score,
                    "status": STATUS_PENDING,
                    "claimed_at": None,
                }
                if task["task_id"] in self._tasks:
                    raise ValueError(f"duplicate task id {task['task_id']}")
                created.append(task)
            self._plans.append(fingerprint)
            for t in created:
                self._tasks[t["task_id"]] = t
            self._save_locked()
            return [dict(t) for t in created]

    def next_task(self) -> dict | None:
        """Atomically claim and return the worst-score pending task, if any."""
        with self._lock:
            self._expire_locked()
            pending = [t for t in self._tasks.values()
                       if t["status"] == STATUS_PENDING]
            if not pending:
                return None
            task = min(pending, key=lambda t: (t["predicted_score"], t["task_id"]))
            task["status"] = STATUS_CLAIMED
            task["claimed_at"] = self.clock()
            self._save_locked()
            return dict(task)

    def get(self, task_id: str) -> dict | None:
        with self._lock:
            self._expire_locked()
            t = self._tasks.get(task_id)
            return dict(t) if t else None

    def complete(self, task_id: str, mask: np.ndarray) -> dict:
        """Store the mask and mark a claimed task done."""
        with self._lock:
            self._expire_locked()
            t = self._tasks.get(task_id)
            if t is None:
                raise KeyError(task_id)
            if t["status"] != STATUS_CLAIMED:
                raise ValueError(
                    f"task {task_id} is {t['status']}, not {STATUS_CLAIMED}")
            masks.save_mask(self.mask_path(t["image_id"]), mask)
            t["status"] = STATUS_DONE
            self._save_locked()
            return dict(t)

    def mask_path(self, image_id: str) -> Path:
        return self.state_dir / "masks" / f"{image_id}.png"

    def counts(self) -> dict:
        with self._lock:
            self._expire_locked()
            out = {STATUS_PENDING: 0, STATUS_CLAIMED: 0, STATUS_DONE: 0}
            for t in self._tasks.values():
                out[t["status"]] += 1
            out["total"] = len(self._tasks)
            out["plans"] = len(self._plans)
            return out


def create_app(manifest: DatasetManifest, state_dir,
               claim_timeout: float = CLAIM_TIMEOUT_SECONDS,
               frontend_dir=None, clock=time.time) -> FastAPI:
    """Annotation service over one dataset; state persists under state_dir."""
    app = FastAPI(title="segalloc annotation service")
    ledger = TaskLedger(state_dir, claim_timeout=claim_timeout, clock=clock)
    app.state.ledger = ledger
    app.state.manifest = manifest

    def task_json(task: dict) -> dict:
        img = manifest.load_image(task["image_id"])
        h, w = img.shape
        return {
            "task_id": task["task_id"],
            "image_id": task["image_id"],
            "mode": task["mode"],
            "predicted_score": task["predicted_score"],
            "status": task["status"],
            "image_url": f"/api/v1/images/{task['image_id']}",
            "width": w,
            "height": h,
        }

    @app.get("/api/v1/tasks/next")
    def next_task():
        task = ledger.next_task()
        if task is None:
            return Response(status_code=204)
        return task_json(task)

    @app.post("/api/v1/tasks/{task_id}/annotation")
    def submit_annotation(task_id: str, payload: dict):
        task = ledger.get(task_id)
        if task is None:
            return JSONResponse(status_code=404,
                                content={"detail": f"unknown task {task_id}"})
        if task["status"] != STATUS_CLAIMED:
            return JSONResponse(
                status_code=409,
                content={"detail": f"task is {task['status']}, not claimed"})
        vertices = payload.get("vertices")
        if not isinstance(vertices, list):
            return JSONResponse(status_code=422,
                                content={"detail": "missing vertices list"})
        img = manifest.load_image(task["image_id"])
        h, w = img.shape
        try:
            validate_polygon(vertices, w, h)
        except PolygonError as exc:
            return JSONResponse(status_code=422, content={"detail": str(exc)})
        except (TypeError, ValueError):
            return JSONResponse(status_code=422,
                                content={"detail": "malformed vertices"})
        mask = rasterize_polygon(vertices, w, h)
        if not mask.any():
            return JSONResponse(
                status_code=422,
                content={"detail": "polygon covers no pixel centers"})
        mask = postprocess(mask)
        try:
            done = ledger.complete(task_id, mask)
        except (KeyError, ValueError) as exc:
            return JSONResponse(status_code=409, content={"detail": str(exc)})
        area = int(mask.sum())
        return {
            "task_id": done["task_id"],
            "image_id": done["image_id"],
            "status": done["status"],
            "mask_area": area,
            "fg_fraction": area / mask.size,
            "width": w,
            "height": h,
        }

    @app.get("/api/v1/images/{image_id}")
    def get_image(image_id: str):
        try:
            entry = manifest.entry_for(image_id)
        except KeyError:
            return JSONResponse(status_code=404,
                                content={"detail": f"unknown image {image_id}"})
        return Response(content=entry.image_path.read_bytes(),
                        media_type="image/png")

    @app.get("/api/v1/status")
    def status():
        return ledger.counts()

    if frontend_dir is not None and Path(frontend_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(frontend_dir), html=True),
                  name="frontend")
    return app
