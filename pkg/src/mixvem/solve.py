"""Direct solution of the mixed system and error measurement."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np
from scipy.sparse.linalg import splu

from .assembly import MixedSystem
from .errors import ContractError, SolveError
from .mesh import PolygonalMesh
from .problems import ManufacturedProblem
from .space import ElementOps, GlobalDofMap

log = logging.getLogger(__name__)


@dataclass
class DiscreteSolution:
    flux: np.ndarray  # global flux dofs
    pressure: np.ndarray  # (n_elements, dim P_k)
    projected_flux: np.ndarray  # (n_elements, (k+1)(k+2))
    residual: float = 0.0

    def local_flux(self, dofmap, i: int) -> np.ndarray:
        idx, sgn = dofmap.flux_dofs(i)
        return sgn * self.flux[idx]


def solve(system: MixedSystem, ops: list[ElementOps] | None = None,
          refine: int = 2) -> DiscreteSolution:
    """Sparse LU solve with up to ``refine`` steps of iterative refinement.

    Fills the projected flux when ``ops`` is given.
    """
    K = system.matrix()
    rhs = system.rhs()
    try:
        lu = splu(K)
    except RuntimeError as exc:
        raise SolveError(f"factorization failed: {exc}") from exc
    x = lu.solve(rhs)
    if not np.all(np.isfinite(x)):
        raise SolveError("solution contains non-finite values")
    scale = np.abs(rhs).max()
    scale = scale if scale > 0 else 1.0
    r = rhs - K @ x
    res = float(np.abs(r).max() / scale)
    for _ in range(refine):
        # the LU solve leaves a residual that Gram inverses amplify elementwise
        x_new = x + lu.solve(r)
        r_new = rhs - K @ x_new
        res_new = float(np.abs(r_new).max() / scale)
        if not res_new <= res:
            break
        x, r, res = x_new, r_new, res_new
    log.info("solved %d unknowns, relative residual %.2e", len(x), res)

    dm = system.dofmap
    flux = x[: dm.n_flux]
    pressure = x[dm.n_flux:].reshape(-1, dm.n_scalar_local)
    sol = DiscreteSolution(flux, pressure, np.empty((0, 0)), res)
    if ops is not None:
        sol.projected_flux = np.array([o.P @ sol.local_flux(dm, o.index) for o in ops])
    return sol


@dataclass
class ErrorBundle:
    h: float
    n_elems: int
    err_p: float
    err_u: float
    err_divu: float
    err_p_proj: float
    err_superconv: float
    norm_p: float
    norm_u: float
    norm_divu: float

    @property
    def rel_err_p(self) -> float:
        return self.err_p / self.norm_p if self.norm_p else float("nan")

    @property
    def rel_err_u(self) -> float:
        return self.err_u / self.norm_u if self.norm_u else float("nan")

    def as_dict(self) -> dict:
        d = asdict(self)
        d["rel_err_p"] = self.rel_err_p
        d["rel_err_u"] = self.rel_err_u
        return d


def compute_errors(mesh: PolygonalMesh, ops: list[ElementOps], solution: DiscreteSolution,
                   problem: ManufacturedProblem, degree: int | None = None) -> ErrorBundle:
    """L2 errors of p, Pi u_h, div u_h, and the split around ``p_I = Pi p``.

    ``div u`` is taken from the problem's closed form, never differentiated.
    """
    k = ops[0].k
    d = 2 * k + 6 if degree is None else degree
    sums = dict.fromkeys(
        ["p", "u", "divu", "p_proj", "super", "np", "nu", "ndiv"], 0.0)
    dofmap = GlobalDofMap(mesh, k)
    for o in ops:
        rule = o.element_rule(d)
        x, y = rule.points[:, 0], rule.points[:, 1]
        w = rule.weights
        m = o.basis.eval(rule.points)
        pv = np.broadcast_to(problem.p(x, y), w.shape)
        ph = m @ solution.pressure[o.index]
        # p_I from the same rule, so p - p_I is discretely orthogonal to P_k.
        G = m.T @ (w[:, None] * m)
        pi = m @ np.linalg.solve(G, m.T @ (w * pv))
        ux, uy = problem.u(x, y)
        uv = np.stack(np.broadcast_arrays(ux, uy), axis=1)
        uh = o.eval_flux_projection(solution.projected_flux[o.index], rule.points)
        dv = np.broadcast_to(problem.div_u(x, y), w.shape)
        divh = m @ o.divergence(solution.local_flux(dofmap, o.index))
        sums["p"] += w @ (pv - ph) ** 2
        sums["u"] += w @ ((uv - uh) ** 2).sum(1)
        sums["divu"] += w @ (dv - divh) ** 2
        sums["p_proj"] += w @ (pv - pi) ** 2
        sums["super"] += w @ (pi - ph) ** 2
        sums["np"] += w @ pv**2
        sums["nu"] += w @ (uv**2).sum(1)
        sums["ndiv"] += w @ dv**2
    r = {key: float(np.sqrt(max(val, 0.0))) for key, val in sums.items()}
    return ErrorBundle(
        h=mesh.h, n_elems=mesh.n_elements,
        err_p=r["p"], err_u=r["u"], err_divu=r["divu"],
        err_p_proj=r["p_proj"], err_superconv=r["super"],
        norm_p=r["np"], norm_u=r["nu"], norm_divu=r["ndiv"],
    )


def divergence_defect(ops: list[ElementOps], solution: DiscreteSolution,
                      problem: ManufacturedProblem, dofmap, degree: int | None = None) -> float:
    """Max over elements of ``||D u_h - Pi(f - gamma p_h)||_inf``.

    The sup norm of the difference polynomial is sampled at the quadrature
    nodes and vertices. ``Pi(f - gamma p_h)`` uses the assembly rule so it
    matches the discrete second equation exactly.
    """
    worst = 0.0
    coeffs = problem.coeffs
    for o in ops:
        rule = o.rule if degree is None else o.element_rule(degree)
        x, y = rule.points[:, 0], rule.points[:, 1]
        w = rule.weights
        m = o.basis.eval(rule.points)
        G = m.T @ (w[:, None] * m)
        fv = np.broadcast_to(coeffs.f(x, y), w.shape)
        gv = np.broadcast_to(coeffs.gamma(x, y), w.shape)
        rhs = m.T @ (w * (fv - gv * (m @ solution.pressure[o.index])))
        target = np.linalg.solve(G, rhs)
        got = o.divergence(solution.local_flux(dofmap, o.index))
        pts = np.vstack([rule.points, o.polygon])
        worst = max(worst, float(np.abs(o.basis.eval(pts) @ (got - target)).max()))
    return worst


ERROR_FIELDS = ("err_p", "err_u", "err_divu", "err_p_proj", "err_superconv",
                "rel_err_p", "rel_err_u")


def _value(b, name):
    return b[name] if isinstance(b, dict) else getattr(b, name)


def compute_eoc(reports, fields=ERROR_FIELDS) -> dict:
    """Least-squares and pairwise slopes of log(error) against log(h).

    Returns ``{"slope": {field: s}, "pairwise": {field: [s_01, s_12, ...]}}``
    with bundles sorted by decreasing ``h``.
    """
    reports = list(reports)
    if len(reports) < 2:
        raise ContractError("need at least two error bundles")
    reports.sort(key=lambda b: -_value(b, "h"))
    h = np.array([_value(b, "h") for b in reports], dtype=float)
    if len(np.unique(h)) < 2:
        raise ContractError("need at least two distinct mesh sizes")
    lh = np.log(h)
    slope, pairwise = {}, {}
    for name in fields:
        e = np.array([_value(b, name) for b in reports], dtype=float)
        if np.any(e <= 0) or not np.all(np.isfinite(e)):
            slope[name] = float("nan")
            pairwise[name] = [float("nan")] * (len(e) - 1)
            continue
        le = np.log(e)
        slope[name] = float(np.polyfit(lh, le, 1)[0])
        pairwise[name] = [float((le[i + 1] - le[i]) / (lh[i + 1] - lh[i]))
                          for i in range(len(e) - 1)]
    return {"slope": slope, "pairwise": pairwise}
