"""Local and global assembly of the mixed VEM saddle-point system.

Unknowns are ordered flux dofs first, then the scalar P_k coefficients of
each element. The global system reads::

    [ A   -B^T - C^T ] [u]   [G]
    [ B    M         ] [p] = [F]

with ``A`` the stabilised flux form, ``B`` the divergence coupling, ``C``
the convection term ``(beta . Pi v, q)``, ``M`` the reaction mass matrix,
``F`` the load and ``G`` the Dirichlet data ``-int_Gamma g v.n``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sps

from .errors import AssemblyError, ContractError
from .mesh import PolygonalMesh
from .poly import legendre_values
from .problems import CoefficientSet
from .quad import edge_rule
from .space import DofLayout, ElementOps, GlobalDofMap

STABILIZATIONS = ("nu_min", "unit", "nu_barycenter")


def stabilization_scale(ops: ElementOps, coeffs: CoefficientSet, variant: str = "nu_min") -> float:
    if variant == "unit":
        return ops.area
    nu = coeffs.nu(np.array([ops.centroid[0]]), np.array([ops.centroid[1]]))[0]
    if variant == "nu_min":
        return ops.area * float(np.linalg.eigvalsh(nu)[0])
    if variant == "nu_barycenter":
        return ops.area * 0.5 * float(np.trace(nu))
    raise ValueError(f"unknown stabilization {variant!r}; choose from {STABILIZATIONS}")


def stabilization_factor(ops: ElementOps) -> np.ndarray:
    """Rows ``chi_i(v - Pi v)`` as a matrix acting on the local dofs."""
    return np.eye(ops.n_dofs) - ops.dof_matrix @ ops.P


def local_stabilization(ops: ElementOps, layout: DofLayout | None = None,
                        coeffs: CoefficientSet | None = None,
                        variant: str = "nu_min") -> np.ndarray:
    """Dof-based stabilization restricted to the boundary dofs.

    Interior dofs of ``v - Pi v`` vanish identically, so only the edge rows
    contribute.
    """
    layout = layout or ops.layout
    Q = stabilization_factor(ops)[: layout.n_boundary]
    if variant == "unit" or coeffs is None:
        sigma = ops.area
    else:
        sigma = stabilization_scale(ops, coeffs, variant)
    return sigma * (Q.T @ Q)


def weighted_vector_mass(ops: ElementOps, coeffs: CoefficientSet) -> np.ndarray:
    rule = ops.rule
    vals = ops.vbasis.eval_components(rule.points)
    coeffs.check_kappa(rule.points[:, 0], rule.points[:, 1])
    nu = coeffs.nu(rule.points[:, 0], rule.points[:, 1])
    return np.einsum("q,qai,qab,qbj->ij", rule.weights, vals, nu, vals)


def local_flux_matrix(ops: ElementOps, coeffs: CoefficientSet,
                      variant: str = "nu_min") -> np.ndarray:
    """``P^T M_nu P + S`` for one element."""
    A = ops.P.T @ weighted_vector_mass(ops, coeffs) @ ops.P
    A += local_stabilization(ops, ops.layout, coeffs, variant)
    A = 0.5 * (A + A.T)
    lam = np.linalg.eigvalsh(A)[0]
    if not lam > 0:
        raise AssemblyError(f"element {ops.index}: local flux matrix not SPD (min eig {lam:.3g})")
    return A


def local_coupling_blocks(ops: ElementOps, coeffs: CoefficientSet):
    """Return ``(B_E, C_E, M_E, F_E)`` for one element.

    ``B_E[q, j] = int div(phi_j) m_q``, ``C_E[q, j] = int beta . Pi(phi_j) m_q``,
    ``M_E[q, r] = int gamma m_q m_r``, ``F_E[q] = int f m_q``.
    """
    rule = ops.rule
    x, y = rule.points[:, 0], rule.points[:, 1]
    w = rule.weights
    m = ops.basis.eval(rule.points)
    B = ops.R.copy()
    beta = coeffs.beta(x, y)
    vals = ops.vbasis.eval_components(rule.points)
    W = np.einsum("q,qa,qai,qr->ri", w, beta, vals, m)
    C = W @ ops.P
    gam = np.broadcast_to(coeffs.gamma(x, y), w.shape)
    M = m.T @ ((w * gam)[:, None] * m)
    fv = np.broadcast_to(coeffs.f(x, y), w.shape)
    F = m.T @ (w * fv)
    return B, C, M, F


def boundary_load(mesh: PolygonalMesh, dofmap: GlobalDofMap, coeffs: CoefficientSet,
                  quad_degree: int | None = None) -> np.ndarray:
    """Flux right-hand side ``-int_Gamma g v.n ds`` over the global flux basis.

    The basis function dual to edge moment ``j`` has normal trace
    ``(2j+1) L_j`` on its edge, hence the factor below.
    """
    k = dofmap.k
    d = 2 * k + 4 if quad_degree is None else quad_degree
    out = np.zeros(dofmap.n_flux)
    scale = 2 * np.arange(k + 1) + 1
    for e in np.flatnonzero(mesh.boundary):
        a, b = mesh.vertices[mesh.edges[e]]
        er = edge_rule(a, b, d + k)
        t = 2.0 * ((er.points - a) @ (b - a)) / mesh.edge_lengths[e] ** 2 - 1.0
        L = legendre_values(t, k)
        gv = np.broadcast_to(coeffs.g(er.points[:, 0], er.points[:, 1]), er.weights.shape)
        out[e * (k + 1): (e + 1) * (k + 1)] = -scale * (L.T @ (er.weights * gv))
    return out


@dataclass
class MixedSystem:
    A: sps.csr_matrix
    B: sps.csr_matrix
    C: sps.csr_matrix
    M: sps.csr_matrix
    F: np.ndarray
    G: np.ndarray
    dofmap: GlobalDofMap

    def matrix(self) -> sps.csc_matrix:
        return sps.bmat([[self.A, -(self.B.T + self.C.T)], [self.B, self.M]], format="csc")

    def rhs(self) -> np.ndarray:
        return np.concatenate([self.G, self.F])


@dataclass
class LocalBlocks:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    M: np.ndarray
    F: np.ndarray


def local_blocks(ops: ElementOps, coeffs: CoefficientSet, variant: str = "nu_min") -> LocalBlocks:
    B, C, M, F = local_coupling_blocks(ops, coeffs)
    return LocalBlocks(local_flux_matrix(ops, coeffs, variant), B, C, M, F)


def assemble_global(mesh: PolygonalMesh, dofmap: GlobalDofMap, blocks: list[LocalBlocks],
                    G: np.ndarray | None = None) -> MixedSystem:
    """Scatter-add local blocks, applying edge orientation signs."""
    if len(blocks) != mesh.n_elements:
        raise ContractError("one block set per element required")
    nf, ns = dofmap.n_flux, dofmap.n_scalar
    ar, ac, av = [], [], []
    br, bc, bv = [], [], []
    cv = []
    mr, mc, mv = [], [], []
    F = np.zeros(ns)
    for i, blk in enumerate(blocks):
        idx, sgn = dofmap.flux_dofs(i)
        sdx = dofmap.scalar_dofs(i)
        if blk.A.shape != (len(idx), len(idx)) or blk.B.shape != (len(sdx), len(idx)):
            raise ContractError(f"element {i}: local block shape mismatch")
        if idx.max() >= nf or sdx.max() >= ns:
            raise ContractError(f"element {i}: dof index out of range")
        A = blk.A * np.outer(sgn, sgn)
        ar.append(np.repeat(idx, len(idx)))
        ac.append(np.tile(idx, len(idx)))
        av.append(A.ravel())
        br.append(np.repeat(sdx, len(idx)))
        bc.append(np.tile(idx, len(sdx)))
        bv.append((blk.B * sgn).ravel())
        cv.append((blk.C * sgn).ravel())
        mr.append(np.repeat(sdx, len(sdx)))
        mc.append(np.tile(sdx, len(sdx)))
        mv.append(blk.M.ravel())
        F[sdx] += blk.F
    cat = np.concatenate
    A = sps.coo_matrix((cat(av), (cat(ar), cat(ac))), shape=(nf, nf)).tocsr()
    B = sps.coo_matrix((cat(bv), (cat(br), cat(bc))), shape=(ns, nf)).tocsr()
    C = sps.coo_matrix((cat(cv), (cat(br), cat(bc))), shape=(ns, nf)).tocsr()
    M = sps.coo_matrix((cat(mv), (cat(mr), cat(mc))), shape=(ns, ns)).tocsr()
    return MixedSystem(A, B, C, M, F, np.zeros(nf) if G is None else G, dofmap)


def assemble(mesh: PolygonalMesh, ops: list[ElementOps], coeffs: CoefficientSet,
             variant: str = "nu_min", quad_degree: int | None = None) -> MixedSystem:
    """Build every local block and the global system for ``coeffs``."""
    k = ops[0].k
    dofmap = GlobalDofMap(mesh, k)
    blocks = [local_blocks(o, coeffs, variant) for o in ops]
    G = boundary_load(mesh, dofmap, coeffs, quad_degree)
    return assemble_global(mesh, dofmap, blocks, G)
