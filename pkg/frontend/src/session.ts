// Client-side state for one annotation task at a time.

import type { AnnotationTask } from './api.js';
import type { Point, ViewState } from './geometry.js';
import { clampToBounds, roundVertex } from './geometry.js';

export type Phase =
  | 'idle'        // nothing fetched yet
  | 'loading'     // next-task request in flight
  | 'drawing'     // task on screen, accepting vertices
  | 'submitting'  // annotation request in flight
  | 'empty'       // queue drained
  | 'error';      // fetch failed; retry offered

export class CanvasSession {
  task: AnnotationTask | null = null;
  vertices: Point[] = [];
  closed = false;
  phase: Phase = 'idle';
  message = '';
  view: ViewState = { zoom: 1, panX: 0, panY: 0 };

  beginTask(task: AnnotationTask): void {
    this.task = task;
    this.vertices = [];     // a new task never inherits old vertices
    this.closed = false;
    this.phase = 'drawing';
    this.message = '';
    this.view = { zoom: 1, panX: 0, panY: 0 };
  }

  markEmpty(): void {
    this.task = null;
    this.vertices = [];
    this.closed = false;
    this.phase = 'empty';
    this.message = 'no tasks pending';
  }

  markError(reason: string): void {
    this.phase = 'error';
    this.message = reason;
  }

  addVertex(p: Point): boolean {
    if (this.phase !== 'drawing' || this.closed || this.task === null) return false;
    const v = roundVertex(clampToBounds(p, this.task.width, this.task.height));
    this.vertices.push(v);
    return true;
  }

  closePolygon(): boolean {
    if (this.phase !== 'drawing' || this.vertices.length < 3) return false;
    this.closed = true;
    return true;
  }

  undoVertex(): void {
    if (this.phase !== 'drawing') return;
    this.closed = false;
    this.vertices.pop();
  }

  clearVertices(): void {
    if (this.phase !== 'drawing') return;
    this.vertices = [];
    this.closed = false;
  }

  canSubmit(): boolean {
    return (
      this.phase === 'drawing' &&
      this.task !== null &&
      this.closed &&
      this.vertices.length >= 3
    );
  }

  beginSubmit(): void {
    this.phase = 'submitting';
    this.message = '';
  }

  // Rejections keep the polygon on screen so the user can fix it.
  rejected(reason: string): void {
    this.phase = 'drawing';
    this.closed = false;
    this.message = reason;
  }

  zoomBy(factor: number): void {
    const z = Math.min(8, Math.max(0.25, this.view.zoom * factor));
    this.view = { ...this.view, zoom: z };
  }

  panBy(dx: number, dy: number): void {
    this.view = { ...this.view, panX: this.view.panX + dx, panY: this.view.panY + dy };
  }

  resetView(): void {
    this.view = { zoom: 1, panX: 0, panY: 0 };
  }
}
