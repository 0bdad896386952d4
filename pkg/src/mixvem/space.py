"""Local virtual flux spaces: degrees of freedom and polynomial reconstructions.

Local flux dofs of an element, in this order:

* for each edge in loop order and ``j = 0..k``:
  ``(1/|e|) * int_e (v . n_E) L_j ds``, where ``n_E`` is the outward normal
  and ``L_j`` the Legendre polynomial in the edge's *global* parameter;
* ``(1/|E|) * int_E v . g`` for ``g = h_E grad m_a``, ``1 <= |a| <= k``;
* ``(1/|E|) * int_E v . g`` for ``g = curl(r^2 m_a) / 2``, ``|a| <= k-1``.

Since the edge parameter is global, the local edge dofs of a shared edge are
the global ones times the element's orientation sign.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DegenerateElementError
from .mesh import PolygonalMesh
from .poly import (
    ScaledMonomialBasis,
    VectorBasisDecomposition,
    dim_grad,
    dim_grad_perp,
    dim_poly,
    legendre_values,
)
from .quad import QuadratureRule, edge_rule, polygon_rule

log = logging.getLogger(__name__)


# Working precision for the element operators (80-bit on x86, plain double
# where the platform has no wider type).
XP = np.longdouble


def _solve_xp(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Gaussian elimination with partial pivoting in ``XP`` (LAPACK is double only)."""
    n = A.shape[0]
    M = np.hstack([np.asarray(A, dtype=XP), np.asarray(B, dtype=XP).reshape(n, -1)])
    for i in range(n):
        p = i + int(np.argmax(np.abs(M[i:, i])))
        if p != i:
            M[[i, p]] = M[[p, i]]
        M[i + 1:] -= np.outer(M[i + 1:, i] / M[i, i], M[i])
    X = np.zeros((n, M.shape[1] - n), dtype=XP)
    for i in range(n - 1, -1, -1):
        X[i] = (M[i, n:] - M[i, i + 1:n] @ X[i + 1:]) / M[i, i]
    return X.reshape(np.shape(B))


def default_quad_degree(k: int) -> int:
    return 2 * k + 4


@dataclass(frozen=True)
class DofLayout:
    """Counts and ordering of the local flux dofs for an element."""

    n_edges: int
    k: int

    @property
    def n_boundary(self) -> int:
        return self.n_edges * (self.k + 1)

    @property
    def n_grad(self) -> int:
        return dim_grad(self.k - 1)

    @property
    def n_perp(self) -> int:
        return dim_grad_perp(self.k)

    @property
    def n_interior(self) -> int:
        return self.n_grad + self.n_perp

    @property
    def size(self) -> int:
        return self.n_boundary + self.n_interior

    def edge_slice(self, i: int) -> slice:
        return slice(i * (self.k + 1), (i + 1) * (self.k + 1))

    @property
    def grad_slice(self) -> slice:
        return slice(self.n_boundary, self.n_boundary + self.n_grad)

    @property
    def perp_slice(self) -> slice:
        return slice(self.n_boundary + self.n_grad, self.size)

    def kinds(self) -> list[str]:
        return ["edge"] * self.n_boundary + ["grad"] * self.n_grad + ["perp"] * self.n_perp


@dataclass(frozen=True)
class LocalEdge:
    a: np.ndarray  # global-orientation start point
    b: np.ndarray
    sign: int
    length: float
    normal: np.ndarray  # outward normal of the element

    def param(self, x: np.ndarray) -> np.ndarray:
        d = self.b - self.a
        return 2.0 * ((x - self.a) @ d) / (self.length**2) - 1.0


class ElementOps:
    """Per-element reconstruction operators.

    Attributes
    ----------
    P : ((k+1)(k+2), N_E) array
        Dofs to coefficients of the L2 projection onto (P_k)^2, in the
        basis of ``vbasis``.
    D : (dim P_k, N_E) array
        Dofs to coefficients of the divergence in the scalar basis.
    R : (dim P_k, N_E) array
        ``R[q, j] = int_E div(phi_j) m_q``, i.e. ``Gs @ D``.
    dof_matrix : (N_E, (k+1)(k+2)) array
        Dof values of each vector basis polynomial.
    """

    def __init__(self, mesh: PolygonalMesh, index: int, k: int,
                 quad_degree: int | None = None):
        if k < 0:
            raise ContractError("degree must be >= 0")
        self.index = index
        self.k = k
        self.quad_degree = default_quad_degree(k) if quad_degree is None else quad_degree
        self.polygon = mesh.element_polygon(index)
        self.area = float(mesh.areas[index])
        self.centroid = mesh.centroids[index].copy()
        self.diameter = float(mesh.diameters[index])
        self.edge_ids = mesh.element_edges[index]
        self.signs = mesh.element_signs[index]
        self.layout = DofLayout(len(self.edge_ids), k)

        self.edges = []
        for e, s in zip(self.edge_ids, self.signs):
            a, b = mesh.vertices[mesh.edges[e]]
            self.edges.append(LocalEdge(a, b, int(s), float(mesh.edge_lengths[e]),
                                        s * mesh.edge_normals[e]))

        c = tuple(self.centroid)
        self.basis = ScaledMonomialBasis(c, self.diameter, k)
        self.basis_up = ScaledMonomialBasis(c, self.diameter, k + 1)
        self.vbasis = VectorBasisDecomposition(c, self.diameter, k)
        self.rule = polygon_rule(self.polygon, max(self.quad_degree, 2 * k + 2))
        self._build()

    # -- construction -----------------------------------------------------

    def _build(self) -> None:
        # Gram and moment sums and the small solves run in extended precision:
        # with h_E-scaled monomials the Gram matrices reach condition numbers
        # near 1e7 at k = 3, which otherwise costs two digits in P.
        k, lay = self.k, self.layout
        n_k = dim_poly(k)
        rule = self.rule
        w = rule.weights.astype(XP)
        m_up = self.basis_up.eval(rule.points).astype(XP)  # first n_k columns = P_k
        vals = self.vbasis.eval_components(rule.points).astype(XP)  # (q, 2, nV)
        Gs = m_up[:, :n_k].T @ (w[:, None] * m_up[:, :n_k])
        mixed_gram = m_up.T @ (w[:, None] * m_up[:, :n_k])
        Gv = np.einsum("q,qci,qcj->ij", w, vals, vals)
        self.scalar_gram = Gs.astype(float)
        self.vector_gram = Gv.astype(float)
        self._check(self.scalar_gram, "scalar")
        self._check(self.vector_gram, "vector")

        # int_e (v . n_E) m_a ds for every edge dof, with
        # v . n_E = sum_j (2j+1) chi_{e,j} L_j on edge e.
        n_up = self.basis_up.size
        bnd = np.zeros((n_up, lay.size), dtype=XP)
        self.edge_rules = []
        for i, edge in enumerate(self.edges):
            er = edge_rule(edge.a, edge.b, 2 * k + 2)
            self.edge_rules.append(er)
            L = legendre_values(edge.param(er.points), k) * (2 * np.arange(k + 1) + 1)
            mu = self.basis_up.eval(er.points).astype(XP)
            bnd[:, lay.edge_slice(i)] = mu.T @ (er.weights.astype(XP)[:, None] * L.astype(XP))

        # Divergence from dofs: int div v m_b = -int v . grad m_b + int_dE v.n m_b
        R = bnd[:n_k].copy()
        gi = np.arange(lay.n_grad)
        R[gi + 1, lay.n_boundary + gi] -= XP(self.area) / XP(self.diameter)
        D = _solve_xp(Gs, R)
        self.R = R.astype(float)
        self.D = D.astype(float)

        # Moments against the full vector basis.
        nV = self.vbasis.size
        ext = np.zeros((nV, lay.size), dtype=XP)
        ng = self.vbasis.n_grad
        # For |a| <= k the volume term is R itself; only degree k+1 needs D.
        vol = mixed_gram[1:] @ D
        vol[: n_k - 1] = R[1:]
        ext[:ng] = XP(self.diameter) * (bnd[1:] - vol)
        ext[ng:, lay.perp_slice] = XP(self.area) * np.eye(lay.n_perp, dtype=XP)
        self.moments = ext.astype(float)
        self.P = _solve_xp(Gv, ext).astype(float)

        # Dof values of the vector basis polynomials.
        dm = np.zeros((lay.size, nV))
        for i, (edge, er) in enumerate(zip(self.edges, self.edge_rules)):
            L = legendre_values(edge.param(er.points), k)
            vn = np.einsum("qci,c->qi", self.vbasis.eval_components(er.points), edge.normal)
            dm[lay.edge_slice(i)] = (L.T @ (er.weights[:, None] * vn)) / edge.length
        dm[lay.n_boundary:] = np.vstack([
            self.vector_gram[: lay.n_grad],
            self.vector_gram[ng:],
        ]) / self.area
        self.dof_matrix = dm

    def _check(self, G: np.ndarray, what: str) -> None:
        cond = np.linalg.cond(G)
        if not np.isfinite(cond) or cond > 1e14:
            raise DegenerateElementError(
                f"element {self.index}: singular {what} Gram matrix (cond={cond:.3g})")
        log.debug("element %d %s Gram cond %.3g", self.index, what, cond)

    # -- evaluation -------------------------------------------------------

    @property
    def n_dofs(self) -> int:
        return self.layout.size

    def project_flux(self, dofs: np.ndarray) -> np.ndarray:
        dofs = np.asarray(dofs, dtype=float)
        if dofs.shape[0] != self.n_dofs:
            raise ContractError(f"expected {self.n_dofs} dofs, got {dofs.shape[0]}")
        return self.P @ dofs

    def divergence(self, dofs: np.ndarray) -> np.ndarray:
        dofs = np.asarray(dofs, dtype=float)
        if dofs.shape[0] != self.n_dofs:
            raise ContractError(f"expected {self.n_dofs} dofs, got {dofs.shape[0]}")
        return self.D @ dofs

    def eval_flux_projection(self, coeffs: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Evaluate a (P_k)^2 field given by full-basis coefficients; (m, 2)."""
        return self.vbasis.eval_components(x) @ coeffs

    def eval_scalar(self, coeffs: np.ndarray, x: np.ndarray) -> np.ndarray:
        return self.basis.eval(x) @ coeffs

    def element_rule(self, degree: int) -> QuadratureRule:
        if degree == self.rule.degree:
            return self.rule
        return polygon_rule(self.polygon, degree)


def build_element_ops(mesh: PolygonalMesh, index: int, k: int,
                      quad_degree: int | None = None) -> ElementOps:
    return ElementOps(mesh, index, k, quad_degree)


def build_all_ops(mesh: PolygonalMesh, k: int, quad_degree: int | None = None) -> list[ElementOps]:
    return [ElementOps(mesh, i, k, quad_degree) for i in range(mesh.n_elements)]


def dofs_of_field(ops: ElementOps, v, degree: int | None = None) -> np.ndarray:
    """Dofs of a smooth vector field ``v(x, y) -> (vx, vy)``.

    This is the Fortin interpolant expressed in local coordinates. If ``v``
    returns ``(q, m)`` arrays for ``q`` points, ``m`` fields are interpolated
    at once and the result has shape ``(N_E, m)``.
    """
    k, lay = ops.k, ops.layout
    d = max(default_quad_degree(k), ops.quad_degree) if degree is None else degree

    def sample(pts):
        vx, vy = v(pts[:, 0], pts[:, 1])
        vx, vy = np.asarray(vx, dtype=float), np.asarray(vy, dtype=float)
        # scalars broadcast over the points; the point axis always comes first
        lead = (len(pts),) + (1,) * (max(vx.ndim, vy.ndim, 1) - 1)
        shape = np.broadcast_shapes(vx.shape, vy.shape, lead)
        return np.broadcast_to(vx, shape), np.broadcast_to(vy, shape)

    rows = []
    for edge in ops.edges:
        er = edge_rule(edge.a, edge.b, d + k)
        vx, vy = sample(er.points)
        vn = vx * edge.normal[0] + vy * edge.normal[1]
        L = legendre_values(edge.param(er.points), k)
        rows.append(np.tensordot(L.T * er.weights, vn, axes=1) / edge.length)
    rule = ops.element_rule(d + k)
    vx, vy = sample(rule.points)
    basis = ops.vbasis.eval_components(rule.points) * rule.weights[:, None, None]
    mom = (np.tensordot(basis[:, 0].T, vx, axes=1)
           + np.tensordot(basis[:, 1].T, vy, axes=1)) / ops.area
    ng = ops.vbasis.n_grad
    rows += [mom[: lay.n_grad], mom[ng:]]
    return np.concatenate(rows, axis=0)


def project_scalar(ops: ElementOps, f, degree: int | None = None) -> np.ndarray:
    """L2(E) projection of ``f(x, y)`` onto P_k, as scalar-basis coefficients."""
    d = 2 * ops.k + 6 if degree is None else degree
    rule = ops.element_rule(d)
    m = ops.basis.eval(rule.points)
    fv = np.broadcast_to(f(rule.points[:, 0], rule.points[:, 1]), rule.weights.shape)
    G = m.T @ (rule.weights[:, None] * m)
    return np.linalg.solve(G, m.T @ (rule.weights * fv))


class GlobalDofMap:
    """Global numbering of flux and scalar unknowns.

    Flux dofs: ``(k+1)`` per edge first (edge ``e``, moment ``j`` at
    ``e*(k+1)+j``), then the interior dofs element by element. Scalar dofs
    are the P_k coefficients of each element, appended after all flux dofs
    in the global system.
    """

    def __init__(self, mesh: PolygonalMesh, k: int):
        self.mesh = mesh
        self.k = k
        self.n_interior = dim_grad(k - 1) + dim_grad_perp(k)
        self.n_edge_dofs = (k + 1) * mesh.n_edges
        self.n_flux = self.n_edge_dofs + self.n_interior * mesh.n_elements
        self.n_scalar_local = dim_poly(k)
        self.n_scalar = self.n_scalar_local * mesh.n_elements

    @property
    def size(self) -> int:
        return self.n_flux + self.n_scalar

    def flux_dofs(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Global indices and signs of element ``i``'s local flux dofs."""
        k1 = self.k + 1
        eids = self.mesh.element_edges[i]
        signs = self.mesh.element_signs[i]
        edge_idx = (eids[:, None] * k1 + np.arange(k1)).ravel()
        edge_sgn = np.repeat(signs, k1)
        start = self.n_edge_dofs + i * self.n_interior
        idx = np.concatenate([edge_idx, np.arange(start, start + self.n_interior)])
        sgn = np.concatenate([edge_sgn, np.ones(self.n_interior, dtype=int)])
        return idx, sgn

    def scalar_dofs(self, i: int) -> np.ndarray:
        n = self.n_scalar_local
        return np.arange(i * n, (i + 1) * n)
