"""Simple-polygon validation and deterministic even-odd rasterization.

Vertices are sub-pixel (x, y) points in image coordinates; a pixel (row,
col) has its center at (col + 0.5, row + 0.5).  A pixel is foreground when
its center lies strictly inside the polygon under the even-odd rule.
"""
from __future__ import annotations

import math

import numpy as np

Point = tuple[float, float]


class PolygonError(ValueError):
    """Polygon rejected; str(err) carries the reason."""


def _cross(ox: float, oy: float, ax: float, ay: float, bx: float, by: float) -> float:
    return (ax - ox) * (by - oy) - (ay - oy) * (bx - ox)


def _on_segment(px: float, py: float, qx: float, qy: float, rx: float, ry: float) -> bool:
    """True when collinear point r lies within the bounding box of segment pq."""
    return (min(px, qx) <= rx <= max(px, qx)
            and min(py, qy) <= ry <= max(py, qy))


def _segments_intersect(p1: Point, p2: Point, p3: Point, p4: Point) -> bool:
    d1 = _cross(p3[0], p3[1], p4[0], p4[1], p1[0], p1[1])
    d2 = _cross(p3[0], p3[1], p4[0], p4[1], p2[0], p2[1])
    d3 = _cross(p1[0], p1[1], p2[0], p2[1], p3[0], p3[1])
    d4 = _cross(p1[0], p1[1], p2[0], p2[1], p4[0], p4[1])
    if ((d1 > 0) != (d2 > 0)) and d1 != 0 and d2 != 0 \
            and ((d3 > 0) != (d4 > 0)) and d3 != 0 and d4 != 0:
        return True
    if d1 == 0 and _on_segment(p3[0], p3[1], p4[0], p4[1], p1[0], p1[1]):
        return True
    if d2 == 0 and _on_segment(p3[0], p3[1], p4[0], p4[1], p2[0], p2[1]):
        return True
    if d3 == 0 and _on_segment(p1[0], p1[1], p2[0], p2[1], p3[0], p3[1]):
        return True
    if d4 == 0 and _on_segment(p1[0], p1[1], p2[0], p2[1], p4[0], p4[1]):
        return True
    return False


def polygon_area(vertices: list[Point]) -> float:
    """Signed shoelace area (positive for counter-clockwise in x-right/y-down)."""
    total = 0.0
    n = len(vertices)
    for i in range(n):
        x1, y1 = vertices[i]
        x2, y2 = vertices[(i + 1) % n]
        total += x1 * y2 - x2 * y1
    return total / 2.0


def validate_polygon(vertices: list[Point], width: int, height: int) -> None:
    """Raise PolygonError unless the vertex list is a usable simple polygon."""
    if len(vertices) < 3:
        raise PolygonError("need at least 3 vertices")
    for v in vertices:
        if len(v) != 2:
            raise PolygonError("vertices must be (x, y) pairs")
        x, y = float(v[0]), float(v[1])
        if not (math.isfinite(x) and math.isfinite(y)):
            raise PolygonError("non-finite vertex")
        if not (0.0 <= x <= width and 0.0 <= y <= height):
            raise PolygonError("vertex out of bounds")
    pts = [(float(x), float(y)) for x, y in vertices]
    n = len(pts)
    for i in range(n):
        if pts[i] == pts[(i + 1) % n]:
            raise PolygonError("repeated consecutive vertices")
    for i in range(n):
        a, b = pts[i], pts[(i + 1) % n]
        for j in range(i + 1, n):
            c, d = pts[j], pts[(j + 1) % n]
            if (i + 1) % n == j or (j + 1) % n == i:
                # adjacent edges legitimately share one endpoint; flag only a
                # fold-back spike, where the outer endpoints leave the shared
                # vertex collinearly in the same direction
                if (i + 1) % n == j:
                    shared, o1, o2 = b, a, d
                else:
                    shared, o1, o2 = a, b, c
                cr = _cross(shared[0], shared[1], o1[0], o1[1], o2[0], o2[1])
                dot = ((o1[0] - shared[0]) * (o2[0] - shared[0])
                       + (o1[1] - shared[1]) * (o2[1] - shared[1]))
                if cr == 0 and dot > 0:
                    raise PolygonError("self-intersecting polygon")
                continue
            if _segments_intersect(a, b, c, d):
                raise PolygonError("self-intersecting polygon")
    if polygon_area(pts) == 0.0:
        raise PolygonError("zero-area polygon")


def rasterize_polygon(vertices: list[Point], width: int, height: int) -> np.ndarray:
    """Even-odd scanline fill over pixel centers; polygon closes implicitly.

    Each row is tested at y = row + 0.5 against the half-open edge rule
    min(y1, y2) <= y < max(y1, y2), so shared vertices count exactly once.
    Pixels strictly between successive intersection pairs are filled.
    """
    pts = [(float(x), float(y)) for x, y in vertices]
    mask = np.zeros((height, width), dtype=bool)
    n = len(pts)
    edges = [(pts[i], pts[(i + 1) % n]) for i in range(n)]
    for row in range(height):
        yc = row + 0.5
        xs = []
        for (x1, y1), (x2, y2) in edges:
            if min(y1, y2) <= yc < max(y1, y2):
                xs.append(x1 + (yc - y1) * (x2 - x1) / (y2 - y1))
        xs.sort()
        for i in range(0, len(xs) - 1, 2):
            lo = int(math.floor(xs[i] + 0.5))
            hi = int(math.ceil(xs[i + 1] - 0.5)) - 1
            lo = max(lo, 0)
            hi = min(hi, width - 1)
            if lo <= hi:
                mask[row, lo:hi + 1] = True
    return mask
