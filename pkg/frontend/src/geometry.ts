// Coordinate mapping between mouse events and image pixels.

export type Point = [number, number];

export interface ViewState {
  zoom: number;
  panX: number;
  panY: number;
}

export function distance(a: Point, b: Point): number {
  return Math.hypot(a[0] - b[0], a[1] - b[1]);
}

export function clampToBounds(p: Point, width: number, height: number): Point {
  return [Math.min(Math.max(p[0], 0), width), Math.min(Math.max(p[1], 0), height)];
}

// Sub-pixel vertices are kept to one decimal so repeated clicks are stable.
export function roundVertex(p: Point): Point {
  return [Math.round(p[0] * 10) / 10, Math.round(p[1] * 10) / 10];
}

// True when a click lands close enough to the first vertex to close the ring.
export function nearFirstVertex(p: Point, vertices: Point[], tol = 8): boolean {
  if (vertices.length === 0) return false;
  return distance(p, vertices[0]) <= tol;
}

/**
 * Map a mouse event to image pixel coordinates under the current view.
 *
 * The canvas backing store is (width*zoom, height*zoom) and content is drawn
 * translated by (panX, panY) image pixels. In environments without a layout
 * engine getBoundingClientRect() collapses to zero; fall back to treating
 * client coordinates as canvas pixels so the mapping stays usable.
 */
export function eventToImagePoint(
  ev: { clientX: number; clientY: number },
  canvas: HTMLCanvasElement,
  view: ViewState,
): Point {
  const rect = canvas.getBoundingClientRect();
  let cx: number;
  let cy: number;
  if (rect.width > 0 && rect.height > 0) {
    cx = (ev.clientX - rect.left) * (canvas.width / rect.width);
    cy = (ev.clientY - rect.top) * (canvas.height / rect.height);
  } else {
    cx = ev.clientX;
    cy = ev.clientY;
  }
  return [cx / view.zoom - view.panX, cy / view.zoom - view.panY];
}
