"""Polygonal meshes of the unit square and their generators.

Every edge carries a fixed global orientation ``(a, b)``: the vertex order in
which the lower-numbered incident element traverses it counter-clockwise.
The global unit normal ``(dy, -dx) / |e|`` therefore points out of the
lower-numbered element (and out of the domain on the boundary).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .errors import GenerationError, GeometryError, IoError, TopologyError
from .quad import signed_area

log = logging.getLogger(__name__)


def _segments_intersect(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return int(v > 0) - int(v < 0)

    def on_seg(a, b, c):
        return min(a[0], b[0]) <= c[0] <= max(a[0], b[0]) and min(a[1], b[1]) <= c[
            1
        ] <= max(a[1], b[1])

    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    if o1 != o2 and o3 != o4:
        return True
    if o1 == 0 and on_seg(p1, p2, q1):
        return True
    if o2 == 0 and on_seg(p1, p2, q2):
        return True
    if o3 == 0 and on_seg(q1, q2, p1):
        return True
    if o4 == 0 and on_seg(q1, q2, p2):
        return True
    return False


def is_simple(poly: np.ndarray) -> bool:
    """True if no two non-adjacent edges of the closed loop touch."""
    poly = [tuple(map(float, p)) for p in poly]
    n = len(poly)
    for i in range(n):
        a, b = poly[i], poly[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or j == (i + 1) % n:
                continue
            if _segments_intersect(a, b, poly[j], poly[(j + 1) % n]):
                return False
    return True


def polygon_centroid(poly: np.ndarray) -> np.ndarray:
    x, y = poly[:, 0], poly[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cr = x * yn - xn * y
    a = 0.5 * cr.sum()
    return np.array([((x + xn) * cr).sum(), ((y + yn) * cr).sum()]) / (6.0 * a)


def polygon_diameter(poly: np.ndarray) -> float:
    d = poly[:, None, :] - poly[None, :, :]
    return float(np.sqrt((d**2).sum(-1)).max())


class PolygonalMesh:
    """Immutable polygonal mesh with full edge topology.

    Attributes
    ----------
    vertices : (nv, 2) array
    elements : list of int arrays, counter-clockwise vertex loops
    edges : (ne, 2) int array, globally oriented vertex pairs
    edge_elements : (ne, 2) int array, ``[lower, higher]`` element ids,
        ``higher == -1`` on the boundary
    element_edges, element_signs : per element, edge ids in loop order and
        the sign relating the element's outward normal to the global one
    """

    def __init__(self, vertices, elements, edges, edge_elements, element_edges,
                 element_signs, info=None):
        self.vertices = vertices
        self.elements = elements
        self.edges = edges
        self.edge_elements = edge_elements
        self.element_edges = element_edges
        self.element_signs = element_signs
        self.info = dict(info or {})
        self.areas = np.array([signed_area(vertices[e]) for e in elements])
        self.centroids = np.array([polygon_centroid(vertices[e]) for e in elements])
        self.diameters = np.array([polygon_diameter(vertices[e]) for e in elements])
        d = vertices[edges[:, 1]] - vertices[edges[:, 0]]
        self.edge_lengths = np.hypot(d[:, 0], d[:, 1])
        self.edge_normals = np.column_stack([d[:, 1], -d[:, 0]]) / self.edge_lengths[:, None]
        for arr in (self.vertices, self.edges, self.edge_elements, self.areas,
                    self.centroids, self.diameters, self.edge_lengths, self.edge_normals):
            arr.setflags(write=False)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def boundary(self) -> np.ndarray:
        return self.edge_elements[:, 1] < 0

    @property
    def n_boundary_edges(self) -> int:
        return int(self.boundary.sum())

    @property
    def n_interior_edges(self) -> int:
        return self.n_edges - self.n_boundary_edges

    @property
    def h(self) -> float:
        return float(self.diameters.max())

    @property
    def bbox(self) -> tuple[float, float, float, float]:
        lo = self.vertices.min(0)
        hi = self.vertices.max(0)
        return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])

    def element_polygon(self, i: int) -> np.ndarray:
        return self.vertices[self.elements[i]]

    def domain_area(self) -> float:
        """Area enclosed by the boundary edges (divergence theorem)."""
        e = self.edges[self.boundary]
        a, b = self.vertices[e[:, 0]], self.vertices[e[:, 1]]
        return 0.5 * float(np.sum(a[:, 0] * b[:, 1] - b[:, 0] * a[:, 1]))

    def boundary_edges(self) -> np.ndarray:
        return self.edges[self.boundary]

    def __repr__(self) -> str:
        return (f"PolygonalMesh(n_elements={self.n_elements}, n_edges={self.n_edges}, "
                f"h={self.h:.4g})")


def build_mesh(vertices, element_loops, info=None) -> PolygonalMesh:
    """Build a mesh from vertex coordinates and element vertex loops.

    Clockwise loops are reversed. Raises GeometryError for degenerate or
    self-intersecting loops and TopologyError for bad connectivity.
    """
    verts = np.array(vertices, dtype=float).reshape(-1, 2)
    nv = len(verts)
    loops = []
    for i, loop in enumerate(element_loops):
        loop = np.asarray(loop, dtype=int)
        if loop.ndim != 1 or len(loop) < 3:
            raise GeometryError(f"element {i}: needs at least 3 vertices")
        if loop.min() < 0 or loop.max() >= nv:
            raise TopologyError(f"element {i}: vertex index out of range")
        if len(set(loop.tolist())) != len(loop):
            raise GeometryError(f"element {i}: repeated vertex in loop")
        poly = verts[loop]
        a = signed_area(poly)
        if a == 0.0:
            raise GeometryError(f"element {i}: zero area")
        if a < 0:
            loop = loop[::-1].copy()
            poly = poly[::-1]
        if not is_simple(poly):
            raise GeometryError(f"element {i}: polygon is not simple")
        loops.append(loop)

    edge_id: dict[tuple[int, int], int] = {}
    edges: list[tuple[int, int]] = []
    owners: list[list[int]] = []
    element_edges, element_signs = [], []
    for i, loop in enumerate(loops):
        ids, signs = [], []
        for a, b in zip(loop, np.roll(loop, -1)):
            a, b = int(a), int(b)
            key = (min(a, b), max(a, b))
            e = edge_id.get(key)
            if e is None:
                e = len(edges)
                edge_id[key] = e
                edges.append((a, b))
                owners.append([i])
                signs.append(1)
            else:
                if len(owners[e]) >= 2:
                    raise TopologyError(f"edge {key} shared by more than two elements")
                if edges[e] == (a, b):
                    raise TopologyError(f"edge {key} traversed twice in the same direction")
                owners[e].append(i)
                signs.append(-1)
            ids.append(e)
        element_edges.append(np.array(ids, dtype=int))
        element_signs.append(np.array(signs, dtype=int))

    used = np.zeros(nv, dtype=bool)
    for loop in loops:
        used[loop] = True
    if not used.all():
        raise TopologyError(f"{int((~used).sum())} vertices not referenced by any element")

    edge_elements = np.array([o + [-1] * (2 - len(o)) for o in owners], dtype=int)
    return PolygonalMesh(
        verts,
        loops,
        np.array(edges, dtype=int).reshape(-1, 2),
        edge_elements,
        element_edges,
        element_signs,
        info,
    )


# --------------------------------------------------------------------------
# generators


def generate_square_mesh(n: int) -> PolygonalMesh:
    """``n x n`` grid of equal squares on the unit square."""
    if n < 1:
        raise ValueError("n must be >= 1")
    t = np.linspace(0.0, 1.0, n + 1)
    xx, yy = np.meshgrid(t, t, indexing="xy")
    verts = np.column_stack([xx.ravel(), yy.ravel()])

    def vid(i, j):
        return j * (n + 1) + i

    loops = [
        [vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)]
        for j in range(n)
        for i in range(n)
    ]
    return build_mesh(verts, loops, {"family": "square", "n": n})


# Zigzag from the bottom midpoint to the top midpoint of the unit cell. The
# two triangles it cuts off each side of x = 1/2 have equal area, so both
# halves have area 1/2; both halves are non-convex.
CONCAVE_ZIGZAG = ((0.5, 0.0), (0.8, 0.3), (0.5, 0.5), (0.2, 0.8), (0.5, 1.0))


def generate_concave_mesh(n: int) -> PolygonalMesh:
    """``n x n`` squares, each split into two non-convex polygons."""
    if n < 1:
        raise ValueError("n must be >= 1")
    h = 1.0 / n
    index: dict[tuple[int, int], int] = {}
    verts: list[tuple[float, float]] = []

    # Integer keys on a lattice of step h/10 make shared vertices exact.
    def vid(ix, iy):
        key = (ix, iy)
        if key not in index:
            index[key] = len(verts)
            verts.append((ix * h / 10.0, iy * h / 10.0))
        return index[key]

    zig = [(round(10 * x), round(10 * y)) for x, y in CONCAVE_ZIGZAG]
    loops = []
    for j in range(n):
        for i in range(n):
            ox, oy = 10 * i, 10 * j
            z = [vid(ox + a, oy + b) for a, b in zig]
            left = [vid(ox, oy)] + z + [vid(ox, oy + 10)]
            right = [z[0], vid(ox + 10, oy), vid(ox + 10, oy + 10)] + z[:0:-1]
            loops.append(left)
            loops.append(right)
    return build_mesh(verts, loops, {"family": "concave", "n": n})


def _clip(poly: list, px: float, py: float, nx: float, ny: float) -> list:
    """Keep the part of a convex polygon with (x - p).n <= 0."""
    out = []
    m = len(poly)
    for i in range(m):
        ax, ay = poly[i]
        bx, by = poly[(i + 1) % m]
        da = (ax - px) * nx + (ay - py) * ny
        db = (bx - px) * nx + (by - py) * ny
        if da <= 0:
            out.append((ax, ay))
        if (da < 0 < db) or (db < 0 < da):
            t = da / (da - db)
            out.append((ax + t * (bx - ax), ay + t * (by - ay)))
    return out


def _nearest_first(d2: np.ndarray, batch: int = 48):
    """Indices in increasing ``d2`` (ties by index), sorted lazily."""
    n = len(d2)
    if n <= batch:
        yield from np.lexsort((np.arange(n), d2))
        return
    part = np.argpartition(d2, batch)
    head = part[:batch]
    yield from head[np.lexsort((head, d2[head]))]
    tail = part[batch:]
    yield from tail[np.lexsort((tail, d2[tail]))]


def voronoi_cells(seeds: np.ndarray) -> list[np.ndarray]:
    """Voronoi cells of ``seeds`` clipped to the unit square.

    Each cell is the unit square cut by the bisector half-planes of the
    other seeds, visited nearest first. Clipping stops once the next seed is
    farther than twice the cell's current radius, since no remaining
    bisector can reach the cell.
    """
    seeds = np.asarray(seeds, dtype=float)
    box = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]
    cells = []
    for i, s in enumerate(seeds):
        d2 = ((seeds - s) ** 2).sum(1)
        cell = box
        sx, sy = float(s[0]), float(s[1])
        r2 = max((x - sx) ** 2 + (y - sy) ** 2 for x, y in cell)
        for j in _nearest_first(d2):
            if j == i:
                continue
            if d2[j] >= 4.0 * r2:
                break
            tx, ty = float(seeds[j, 0]), float(seeds[j, 1])
            cell = _clip(cell, 0.5 * (sx + tx), 0.5 * (sy + ty), tx - sx, ty - sy)
            if len(cell) < 3:
                raise GenerationError(f"Voronoi cell {i} collapsed")
            r2 = max((x - sx) ** 2 + (y - sy) ** 2 for x, y in cell)
        cells.append(np.array(cell))
    return cells


def _cells_to_mesh(cells: list[np.ndarray], tol: float, info: dict) -> PolygonalMesh:
    pts = np.vstack(cells)
    # Union-find over vertex pairs closer than tol.
    parent = np.arange(len(pts))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in sorted(cKDTree(pts).query_pairs(tol)):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    roots = np.array([find(a) for a in range(len(pts))])
    first = {}
    order = []
    for r in roots:
        if r not in first:
            first[r] = len(order)
            order.append(r)
    remap = np.array([first[r] for r in roots])
    verts = pts[order]
    # Snap box-side coordinates exactly onto the boundary.
    verts[np.abs(verts) < tol] = 0.0
    verts[np.abs(verts - 1.0) < tol] = 1.0

    loops = []
    start = 0
    for c in cells:
        ids = remap[start : start + len(c)]
        start += len(c)
        loop = [int(ids[0])]
        for v in ids[1:]:
            if int(v) != loop[-1]:
                loop.append(int(v))
        if len(loop) > 1 and loop[-1] == loop[0]:
            loop.pop()
        if len(loop) < 3:
            raise GenerationError("Voronoi cell degenerated during vertex merge")
        loops.append(loop)
    mesh = build_mesh(verts, loops, info)
    b = mesh.vertices[mesh.boundary_edges()]
    on_side = np.all(
        np.isclose(b[:, :, 0], 0.0, atol=tol)
        | np.isclose(b[:, :, 0], 1.0, atol=tol)
        | np.isclose(b[:, :, 1], 0.0, atol=tol)
        | np.isclose(b[:, :, 1], 1.0, atol=tol),
        axis=1,
    )
    if not on_side.all():
        raise GenerationError("Voronoi cells do not conform: interior boundary edges")
    return mesh


def generate_voronoi_lloyd_mesh(n_cells: int, lloyd_iters: int = 0,
                                rng_seed: int = 0, seeds=None) -> PolygonalMesh:
    """Random Voronoi mesh of the unit square, optionally Lloyd-relaxed.

    Seeds are drawn iid uniform from ``numpy.random.default_rng(rng_seed)``
    unless given explicitly. Each Lloyd iteration moves every seed to the
    centroid of its cell. ``mesh.info["lloyd_displacement"]`` holds the
    largest centroid-to-seed distance of the final tessellation.
    """
    if seeds is None:
        if n_cells < 2:
            raise GenerationError("need at least 2 cells")
        seeds = np.random.default_rng(rng_seed).uniform(0.0, 1.0, size=(n_cells, 2))
    seeds = np.unique(np.asarray(seeds, dtype=float), axis=0) if len(seeds) else seeds
    if len(seeds) < 2:
        raise GenerationError("fewer than 2 distinct seeds")
    if lloyd_iters < 0:
        raise ValueError("lloyd_iters must be >= 0")

    cells = voronoi_cells(seeds)
    for _ in range(lloyd_iters):
        seeds = np.array([polygon_centroid(c) for c in cells])
        cells = voronoi_cells(seeds)
    cents = np.array([polygon_centroid(c) for c in cells])
    disp = float(np.sqrt(((cents - seeds) ** 2).sum(1)).max())
    tol = 1e-9 / np.sqrt(len(seeds))
    info = {
        "family": f"lloyd-{lloyd_iters}",
        "n_cells": int(len(seeds)),
        "lloyd_iters": int(lloyd_iters),
        "rng_seed": rng_seed,
        "lloyd_displacement": disp,
        "seeds": seeds,
    }
    return _cells_to_mesh(cells, tol, info)


FAMILIES = ("square", "concave", "lloyd-0", "lloyd-100")


def generate_family(family: str, size: int, seed: int = 0,
                    lloyd_iters: int | None = None) -> PolygonalMesh:
    """Mesh of one of the benchmark families.

    ``size`` counts grid squares for ``square``/``concave`` (must be a perfect
    square; the concave mesh has twice as many elements) and cells for the
    Voronoi families.
    """
    if family in ("square", "concave"):
        n = int(round(np.sqrt(size)))
        if n * n != size:
            raise ValueError(f"{family} family needs a perfect-square size, got {size}")
        return generate_square_mesh(n) if family == "square" else generate_concave_mesh(n)
    if family.startswith("lloyd-"):
        iters = int(family.split("-", 1)[1]) if lloyd_iters is None else lloyd_iters
        return generate_voronoi_lloyd_mesh(size, iters, seed)
    raise ValueError(f"unknown mesh family {family!r}")


# --------------------------------------------------------------------------
# diagnostics


@dataclass(frozen=True)
class MeshQualityReport:
    diameters: np.ndarray
    edge_ratios: np.ndarray
    convex: np.ndarray
    h: float = field(default=0.0)


def is_convex(poly: np.ndarray, tol: float = 1e-12) -> bool:
    p = np.asarray(poly)
    a = np.roll(p, 1, axis=0)
    b = np.roll(p, -1, axis=0)
    cr = (p[:, 0] - a[:, 0]) * (b[:, 1] - p[:, 1]) - (p[:, 1] - a[:, 1]) * (b[:, 0] - p[:, 0])
    scale = polygon_diameter(p) ** 2
    return bool(np.all(cr >= -tol * scale))


def quality_report(mesh: PolygonalMesh) -> MeshQualityReport:
    ratios = np.array([
        mesh.edge_lengths[ids].min() / mesh.diameters[i]
        for i, ids in enumerate(mesh.element_edges)
    ])
    convex = np.array([is_convex(mesh.element_polygon(i)) for i in range(mesh.n_elements)])
    return MeshQualityReport(mesh.diameters.copy(), ratios, convex, float(mesh.diameters.max()))


# --------------------------------------------------------------------------
# JSON I/O


def mesh_to_dict(mesh: PolygonalMesh) -> dict:
    return {
        "vertices": mesh.vertices.tolist(),
        "elements": [e.tolist() for e in mesh.elements],
        "boundary_edges": mesh.boundary_edges().tolist(),
    }


def save_mesh(mesh: PolygonalMesh, path) -> None:
    try:
        Path(path).write_text(json.dumps(mesh_to_dict(mesh)))
    except OSError as exc:
        raise IoError(f"cannot write mesh to {path}: {exc}") from exc


def mesh_from_dict(data: dict) -> PolygonalMesh:
    mesh = build_mesh(data["vertices"], data["elements"])
    if "boundary_edges" in data:
        given = {tuple(sorted(e)) for e in data["boundary_edges"]}
        have = {tuple(sorted(e)) for e in mesh.boundary_edges().tolist()}
        if given != have:
            raise TopologyError("boundary_edges do not match the element loops")
    return mesh


def load_mesh(path) -> PolygonalMesh:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise IoError(f"cannot read mesh from {path}: {exc}") from exc
    return mesh_from_dict(data)
