import numpy as np
import pytest
import scipy.sparse as sps

from mixvem.assembly import MixedSystem, assemble
from mixvem.errors import ContractError, SolveError
from mixvem.mesh import generate_square_mesh
from mixvem.problems import CoefficientSet, paper_benchmark, patch_problem
from mixvem.solve import (
    DiscreteSolution,
    compute_eoc,
    compute_errors,
    divergence_defect,
    solve,
)
from mixvem.space import GlobalDofMap, build_all_ops, dofs_of_field, project_scalar

from conftest import family_mesh


def run(mesh, k, prob):
    ops = build_all_ops(mesh, k)
    system = assemble(mesh, ops, prob.coeffs)
    return ops, system, solve(system, ops)


def test_patch_solution_exact():
    mesh = family_mesh("concave", 25)
    for k in range(3):
        prob = patch_problem(k)
        ops, system, sol = run(mesh, k, prob)
        for o in ops:
            ref = project_scalar(o, prob.p)
            assert np.abs(sol.pressure[o.index] - ref).max() < 1e-9


def test_zero_data_zero_solution():
    zero = lambda x, y: 0 * np.asarray(x, dtype=float)  # noqa: E731
    base = patch_problem(1).coeffs
    co = CoefficientSet(base.kappa, base.b, lambda x, y: 1 + x**2, zero, zero)
    mesh = family_mesh("lloyd-0", 25)
    ops = build_all_ops(mesh, 1)
    sol = solve(assemble(mesh, ops, co), ops)
    assert np.abs(sol.flux).max() == 0 and np.abs(sol.pressure).max() == 0


def test_benchmark_residual():
    _, _, sol = run(generate_square_mesh(5), 1, paper_benchmark())
    assert sol.residual <= 1e-10


def test_projected_flux_matches_P():
    mesh = generate_square_mesh(3)
    ops, system, sol = run(mesh, 2, paper_benchmark())
    dm = system.dofmap
    for o in ops:
        assert np.allclose(sol.projected_flux[o.index], o.P @ sol.local_flux(dm, o.index))
    assert len(sol.flux) == dm.n_flux and sol.pressure.size == dm.n_scalar


def test_singular_system():
    dm = GlobalDofMap(generate_square_mesh(1), 0)
    z = sps.csr_matrix((dm.n_flux, dm.n_flux))
    zb = sps.csr_matrix((dm.n_scalar, dm.n_flux))
    zm = sps.csr_matrix((dm.n_scalar, dm.n_scalar))
    with pytest.raises(SolveError):
        solve(MixedSystem(z, zb, zb, zm, np.ones(dm.n_scalar), np.ones(dm.n_flux), dm))


def exact_discrete(mesh, ops, prob):
    k = ops[0].k
    dm = GlobalDofMap(mesh, k)
    flux = np.zeros(dm.n_flux)
    for o in ops:
        idx, sgn = dm.flux_dofs(o.index)
        flux[idx] = sgn * dofs_of_field(o, prob.u)
    pressure = np.array([project_scalar(o, prob.p) for o in ops])
    proj = np.array([o.P @ (dm.flux_dofs(o.index)[1] * flux[dm.flux_dofs(o.index)[0]]) for o in ops])
    return DiscreteSolution(flux, pressure, proj)


def test_injected_exact_solution():
    mesh = family_mesh("lloyd-100", 25)
    for k in (1, 2):
        prob = patch_problem(k)
        ops = build_all_ops(mesh, k)
        b = compute_errors(mesh, ops, exact_discrete(mesh, ops, prob), prob)
        assert max(b.err_p, b.err_u, b.err_divu, b.err_p_proj, b.err_superconv) <= 1e-9


def test_projection_error_oracle():
    prob = paper_benchmark()
    mesh = generate_square_mesh(10)
    ops, _, sol = run(mesh, 1, prob)
    b = compute_errors(mesh, ops, sol, prob, degree=16)
    total = 0.0
    for o in ops:
        rule = o.element_rule(16)
        x, y = rule.points.T
        sw = np.sqrt(rule.weights)
        # Brute-force weighted least squares in the raw monomials 1, x, y.
        V = np.column_stack([np.ones_like(x), x, y])
        pv = prob.p(x, y)
        c = np.linalg.lstsq(sw[:, None] * V, sw * pv, rcond=None)[0]
        total += rule.weights @ (pv - V @ c) ** 2
    assert b.err_p_proj == pytest.approx(np.sqrt(total), abs=1e-10)


def test_pythagorean_identity():
    prob = paper_benchmark()
    for family in ("square", "lloyd-0"):
        mesh = family_mesh(family, 25)
        ops, _, sol = run(mesh, 1, prob)
        b = compute_errors(mesh, ops, sol, prob)
        assert b.err_p**2 == pytest.approx(b.err_p_proj**2 + b.err_superconv**2, rel=1e-8)


def test_errors_decrease_on_sequence():
    prob = paper_benchmark()
    bundles = []
    for n in (5, 10, 20):
        mesh = generate_square_mesh(n)
        ops, _, sol = run(mesh, 1, prob)
        bundles.append(compute_errors(mesh, ops, sol, prob))
    for f in ("err_p", "err_u", "err_divu", "err_p_proj", "err_superconv"):
        vals = [getattr(b, f) for b in bundles]
        assert all(v >= 0 for v in vals)
        assert all(a > b for a, b in zip(vals, vals[1:]))
    eoc = compute_eoc(bundles)["slope"]
    assert eoc["err_superconv"] - eoc["err_p_proj"] == pytest.approx(1.0, abs=0.3)


def test_divergence_identity():
    prob = paper_benchmark()
    mesh = family_mesh("concave", 25)
    for k in (0, 1, 2):
        ops, system, sol = run(mesh, k, prob)
        assert divergence_defect(ops, sol, prob, system.dofmap) <= 1e-9


def test_eoc_synthetic():
    rows = [{"h": 0.1, "e": 0.01}, {"h": 0.05, "e": 0.0025}]
    assert compute_eoc(rows, ("e",))["slope"]["e"] == pytest.approx(2.0)
    rows = [{"h": 0.1, "e": 3.0}, {"h": 0.05, "e": 3.0}, {"h": 0.025, "e": 3.0}]
    r = compute_eoc(rows, ("e",))
    assert r["slope"]["e"] == pytest.approx(0.0, abs=1e-12)
    assert r["pairwise"]["e"] == pytest.approx([0.0, 0.0], abs=1e-12)


def test_eoc_contract():
    with pytest.raises(ContractError):
        compute_eoc([{"h": 0.1, "e": 1.0}], ("e",))
    with pytest.raises(ContractError):
        compute_eoc([{"h": 0.1, "e": 1.0}, {"h": 0.1, "e": 2.0}], ("e",))
    r = compute_eoc([{"h": 0.1, "e": 0.0}, {"h": 0.05, "e": 0.0}], ("e",))
    assert np.isnan(r["slope"]["e"])
