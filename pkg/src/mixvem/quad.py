"""Quadrature on segments and simple polygons."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

from .errors import GeometryError


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray
    degree: int

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Contract the leading (point) axis of ``values`` with the weights."""
        return np.tensordot(self.weights, values, axes=(0, 0))


@lru_cache(maxsize=None)
def _gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(n)


def edge_rule(a, b, d: int) -> QuadratureRule:
    """Gauss-Legendre rule on the segment ``a -> b`` exact for P_d."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    length = float(np.hypot(*(b - a)))
    if length == 0.0:
        raise GeometryError("zero-length edge")
    t, w = _gauss_legendre(max(1, (d + 2) // 2))
    pts = a + 0.5 * (t[:, None] + 1.0) * (b - a)
    return QuadratureRule(pts, 0.5 * length * w, d)


@lru_cache(maxsize=None)
def _reference_triangle(d: int) -> tuple[np.ndarray, np.ndarray]:
    # Collapsed (Duffy) product rule on the triangle (0,0), (1,0), (0,1):
    # Gauss-Jacobi(1, 0) in the collapsed direction absorbs the Jacobian.
    n = max(1, (d + 2) // 2)
    tj, wj = roots_jacobi(n, 1.0, 0.0)
    tl, wl = _gauss_legendre(n)
    u = 0.5 * (tj + 1.0)
    v = 0.5 * (tl + 1.0)
    uu, vv = np.meshgrid(u, v, indexing="ij")
    pts = np.column_stack([uu.ravel(), (vv * (1.0 - uu)).ravel()])
    w = np.outer(wj / 4.0, wl / 2.0).ravel()
    return pts, w


def triangle_rule(tri: np.ndarray, d: int) -> QuadratureRule:
    tri = np.asarray(tri, dtype=float)
    ref, w = _reference_triangle(d)
    e1 = tri[1] - tri[0]
    e2 = tri[2] - tri[0]
    jac = abs(e1[0] * e2[1] - e1[1] * e2[0])
    pts = tri[0] + ref[:, :1] * e1 + ref[:, 1:] * e2
    return QuadratureRule(pts, w * jac, d)


def signed_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def ear_clip(poly: np.ndarray) -> list[tuple[int, int, int]]:
    """Triangulate a simple polygon by ear clipping.

    Returns vertex-index triples into ``poly``. Works for non-convex
    polygons; collinear vertices are skipped.
    """
    poly = np.asarray(poly, dtype=float)
    n = len(poly)
    if n < 3:
        raise GeometryError("polygon needs at least 3 vertices")
    area = signed_area(poly)
    if area == 0.0:
        raise GeometryError("zero-area polygon")
    idx = list(range(n)) if area > 0 else list(range(n))[::-1]
    pts = [tuple(p) for p in poly]
    scale = max(np.ptp(poly[:, 0]), np.ptp(poly[:, 1])) ** 2
    eps = 1e-14 * scale

    # Drop vertices lying on the segment between their neighbours.
    changed = True
    while changed and len(idx) > 3:
        changed = False
        for i in range(len(idx)):
            p, c, q = idx[i - 1], idx[i], idx[(i + 1) % len(idx)]
            if abs(_cross(pts[p], pts[c], pts[q])) <= eps:
                idx.pop(i)
                changed = True
                break

    tris = []
    guard = 0
    while len(idx) > 3:
        m = len(idx)
        for i in range(m):
            p, c, q = idx[i - 1], idx[i], idx[(i + 1) % m]
            if _cross(pts[p], pts[c], pts[q]) <= eps:
                continue
            if any(
                _in_triangle(pts[r], pts[p], pts[c], pts[q])
                for r in idx
                if r not in (p, c, q)
            ):
                continue
            tris.append((p, c, q))
            idx.pop(i)
            break
        else:
            raise GeometryError("ear clipping failed; polygon is not simple")
        guard += 1
        if guard > 4 * n:
            raise GeometryError("ear clipping did not terminate")
    if _cross(pts[idx[0]], pts[idx[1]], pts[idx[2]]) <= 0:
        raise GeometryError("degenerate final triangle")
    tris.append(tuple(idx))
    return tris


def _in_triangle(r, a, b, c) -> bool:
    # Closed test: a reflex vertex touching the ear boundary blocks it too.
    return _cross(a, b, r) >= 0 and _cross(b, c, r) >= 0 and _cross(c, a, r) >= 0


def polygon_rule(poly: np.ndarray, d: int) -> QuadratureRule:
    """Positive-weight rule on a simple polygon, exact for P_d."""
    poly = np.asarray(poly, dtype=float)
    pts, wts = [], []
    for t in ear_clip(poly):
        r = triangle_rule(poly[list(t)], d)
        pts.append(r.points)
        wts.append(r.weights)
    return QuadratureRule(np.vstack(pts), np.concatenate(wts), d)
