import numpy as np
import pytest
import scipy.sparse as sp

from foslsbem.analysis import error_norms, make_case
from foslsbem.coupling import (SolverError, assemble_c1, boundary_mass_matrix, build_system,
                               min_generalized_eigenvalue, solve, trace_data)
from foslsbem.fosls import ProblemData, assemble_fosls
from foslsbem.heatbem import BoundaryGeometry
from foslsbem.mesh import build_unit_square_mesh
from foslsbem.spaces import DofMap, SolutionField, dirichlet_trace_dofs, neumann_trace_dofs


def test_boundary_mass_rows_are_panel_areas(mesh2):
    mass = boundary_mass_matrix(mesh2)
    geom = BoundaryGeometry.of(mesh2.space)
    h = mesh2.time.steps
    area = (h[:, None] * geom.length[None, :]).ravel()
    assert np.allclose(mass.sum(axis=1), area, rtol=1e-14)
    assert mass.sum() == pytest.approx(4.0 * mesh2.time.breakpoints[-1], rel=1e-14)


def test_c1_shape_checked(bem2, mesh2):
    mass = boundary_mass_matrix(mesh2)
    assert assemble_c1(bem2, mass).shape == (36, 36 + 48)
    with pytest.raises(ValueError, match="inconsistent"):
        assemble_c1(bem2, mass[:, :-1])


def test_c1_lives_on_trace_rows_and_columns(system2, mesh2):
    nt = neumann_trace_dofs(mesh2)
    dt = dirichlet_trace_dofs(mesh2)
    c1 = system2.c1.tocoo()
    assert set(c1.row) <= set(nt.dofs)
    assert set(c1.col) <= set(nt.dofs) | set(dt.dofs)
    # the sigma . n block is V with the edge orientation signs applied on both sides
    block = system2.c1.toarray()[np.ix_(nt.dofs, nt.dofs)]
    assert np.allclose(block, nt.signs[:, None] * system2.bem.V * nt.signs[None, :], rtol=0, atol=0)


def test_zero_data_gives_zero_rhs_and_solution(system2):
    assert np.all(system2.rhs == 0.0)
    field = solve(system2)
    assert np.all(field.coefficients == 0.0)


def test_fosls_load_vanishes_for_pure_transmission(mesh2):
    dofs = DofMap(mesh2)
    for name in ("ex1", "ex2"):
        fm = assemble_fosls(mesh2, dofs, make_case(name).data)
        assert np.all(fm.load == 0.0)


def test_initial_mass_drives_ex4(mesh2):
    case = make_case("ex4")
    dofs = DofMap(mesh2)
    ud, phi = trace_data(mesh2, case.data)
    assert np.all(ud == 0) and np.all(phi == 0)
    fm = assemble_fosls(mesh2, dofs, case.data)
    sys = build_system(mesh2, case.data, alpha=3.0)
    assert np.array_equal(sys.rhs, 3.0 * fm.load)
    # the hats of time node 0 sum to one, so the load sums to |Omega| = 1
    assert fm.load.sum() == pytest.approx(1.0, rel=1e-13)


@pytest.mark.parametrize("name", ["ex1", "ex2", "ex3", "ex4"])
def test_solve_residual(mesh2, name):
    sys = build_system(mesh2, make_case(name).data)
    field = solve(sys)
    r = sys.matrix @ field.coefficients - sys.rhs
    assert np.linalg.norm(r) <= 1e-10 * np.linalg.norm(sys.rhs)


def test_solver_error_on_singular_matrix(system2):
    broken = system2.with_alpha(1.0)
    broken.c1 = -broken.B.copy()
    broken.rhs = np.ones(system2.dofs.size)
    with pytest.raises(SolverError, match="level 2"):
        solve(broken)


def test_rhs_scales_with_alpha_on_load_only(mesh2):
    data = make_case("ex3").data
    s1 = build_system(mesh2, data, alpha=1.0)
    s2 = build_system(mesh2, data, alpha=2.0)
    fm = assemble_fosls(mesh2, DofMap(mesh2), data)
    assert np.allclose(s2.rhs - s1.rhs, fm.load, rtol=1e-13, atol=1e-15)


def test_traces_option_validated(mesh2):
    with pytest.raises(ValueError, match="traces"):
        trace_data(mesh2, ProblemData(), "nearest")
    with pytest.raises(ValueError, match="alpha"):
        build_system(mesh2, alpha=0.0)


def test_rayleigh_quotients_bounded_below(system2):
    alpha = 0.5
    lam = min_generalized_eigenvalue(alpha, system=system2)
    A = (alpha * system2.B + system2.c1).toarray()
    As = 0.5 * (A + A.T)
    G = system2.gram.toarray()
    rng = np.random.default_rng(7)
    for _ in range(50):
        y = rng.standard_normal(G.shape[0])
        assert y @ As @ y / (y @ G @ y) >= lam - 1e-8


def test_lambda_min_increases_with_alpha(system2):
    alphas = [1e-3, 1e-2, 0.1, 0.5, 1.0, 2.0, 10.0, 1e2]
    lams = [min_generalized_eigenvalue(a, system=system2) for a in alphas]
    assert np.all(np.diff(lams) > 0)
    assert lams[0] < 0 < lams[-1]


def test_dense_and_iterative_eigensolvers_agree(system2, monkeypatch):
    dense = min_generalized_eigenvalue(0.1, system=system2)
    monkeypatch.setattr("foslsbem.coupling.DENSE_EIG_MAX_SIZE", 0)
    sparse = min_generalized_eigenvalue(0.1, system=system2)
    assert sparse == pytest.approx(dense, rel=1e-8)


def test_eigen_arguments_validated(system2):
    with pytest.raises(ValueError):
        min_generalized_eigenvalue(-1.0, system=system2)
    with pytest.raises(ValueError):
        min_generalized_eigenvalue(1.0)


@pytest.mark.parametrize("level", [2, 3])
def test_quasi_optimality(level):
    # the discrete solution is within a moderate factor of the interpolant in the U norm
    case = make_case("ex1")
    mesh = build_unit_square_mesh(level)
    sys = build_system(mesh, case.data)
    field = solve(sys)
    interp = SolutionField.interpolate(sys.dofs, u=case.u, sigma=case.sigma)
    e_h = np.sqrt(error_norms(field, case).sum())
    e_i = np.sqrt(error_norms(interp, case).sum())
    assert e_h <= 10.0 * e_i
