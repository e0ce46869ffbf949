import math

import numpy as np
import pytest
from scipy.special import erf

from foslsbem.analysis import X_EXT, make_case
from foslsbem.coupling import trace_data
from foslsbem.heatbem import (BemQuadrature, BoundaryGeometry, assemble_bem, assemble_K, assemble_V,
                              classify_pairs, eval_double_potential, eval_single_potential)
from foslsbem.kernel import heat_kernel
from foslsbem.mesh import SpaceTimeMesh, SpatialMesh, TimePartition, build_unit_square_mesh
from oracles import double_layer_piece, single_layer_entry


def _blocks(mesh):
    nb = len(mesh.space.boundary_edges)
    nbv = len(mesh.space.boundary_vertices)
    return mesh.time.M, nb, nbv


def test_shapes(mesh2, bem2):
    assert bem2.V.shape == (36, 36) and bem2.K.shape == (36, 48)
    assert np.array_equal(assemble_V(mesh2), bem2.V)
    assert np.array_equal(assemble_K(mesh2), bem2.K)


def test_causality_is_exact(mesh3):
    bem = assemble_bem(mesh3)
    M, nb, nbv = _blocks(mesh3)
    for m in range(M):
        assert np.all(bem.V[m * nb:(m + 1) * nb, (m + 1) * nb:] == 0.0)
        # the hat at node m + 1 reaches back into slab m; later hats do not
        assert np.all(bem.K[m * nb:(m + 1) * nb, (m + 2) * nbv:] == 0.0)
        assert np.any(bem.K[m * nb:(m + 1) * nb, (m + 1) * nbv:(m + 2) * nbv] != 0.0)


def test_block_toeplitz(mesh3):
    # every block computed independently, so Toeplitz structure is not built in
    bem = assemble_bem(mesh3, reuse_blocks=False)
    cached = assemble_bem(mesh3)
    assert np.abs(bem.V - cached.V).max() <= 1e-13 * np.abs(bem.V).max()
    assert np.abs(bem.K - cached.K).max() <= 1e-13 * np.abs(bem.K).max()
    M, nb, nbv = _blocks(mesh3)
    V, K = bem.V, bem.K
    scale_v, scale_k = np.abs(V).max(), np.abs(K).max()
    for m in range(M - 1):
        for n in range(m + 1):
            a = V[m * nb:(m + 1) * nb, n * nb:(n + 1) * nb]
            b = V[(m + 1) * nb:(m + 2) * nb, (n + 1) * nb:(n + 2) * nb]
            assert np.abs(a - b).max() <= 1e-13 * scale_v
            a = K[m * nb:(m + 1) * nb, (n + 1) * nbv:(n + 2) * nbv]
            b = K[(m + 1) * nb:(m + 2) * nb, (n + 2) * nbv:(n + 3) * nbv]
            assert np.abs(a - b).max() <= 1e-13 * scale_k


@pytest.mark.parametrize("level", [2, 3])
def test_single_layer_coercive(level):
    V = assemble_V(build_unit_square_mesh(level))
    assert np.linalg.eigvalsh(0.5 * (V + V.T)).min() > 0


def test_collinear_double_layer_vanishes(mesh2, bem2):
    # a test panel on the bottom side sees no double layer from hats whose support
    # lies on the bottom side as well, since (x - y) . n_y = 0 there
    sp = mesh2.space
    M, nb, nbv = _blocks(mesh2)
    geom = BoundaryGeometry.of(sp)
    bottom = np.flatnonzero(np.all(np.isclose(geom.normal, [0.0, -1.0]), axis=1))
    bv = sp.vertices[sp.boundary_vertices]
    inner = np.flatnonzero(np.isclose(bv[:, 1], 0.0) & (bv[:, 0] > 0.01) & (bv[:, 0] < 0.99))
    assert len(inner) == 2
    for m in range(M):
        for k in range(M + 1):
            block = bem2.K[m * nb + bottom][:, k * nbv + inner]
            assert np.all(block == 0.0)


def test_pair_classification(mesh2):
    kind = classify_pairs(BoundaryGeometry.of(mesh2.space))
    assert np.all(np.diag(kind) == 2)
    # a closed polygon: every edge touches exactly two others
    assert np.all((kind == 1).sum(axis=1) == 2)


def test_crossing_edges_rejected():
    # the second triangle overlaps the first, so boundary edges meet away from vertices
    verts = [[0, 0], [1, 0], [0, 1], [0.5, 0], [0.5, 1]]
    space = SpatialMesh.from_triangles(verts, [[0, 1, 2], [3, 1, 4]])
    mesh = SpaceTimeMesh(TimePartition.uniform(1.0, 1), space)
    with pytest.raises(ValueError, match="boundary edges"):
        assemble_bem(mesh)


def oracle_v(mesh, geom, r, c):
    nb = geom.n_edges
    tb = mesh.time.breakpoints
    m, i = divmod(r, nb)
    mp, j = divmod(c, nb)
    shared = set(geom.vertex_ids[i]) & set(geom.vertex_ids[j])
    point = mesh.space.vertices[shared.pop()] if shared and i != j else None
    return single_layer_entry(geom.start[i], geom.end[i], geom.start[j], geom.end[j],
                              (tb[m], tb[m + 1]), (tb[mp], tb[mp + 1]), identical=(i == j),
                              shared=point)


def oracle_k(mesh, geom, r, c):
    nb, nbv, M = geom.n_edges, geom.n_vertices, mesh.time.M
    tb = mesh.time.breakpoints
    m, i = divmod(r, nb)
    k, slot = divmod(c, nbv)
    vertex = mesh.space.vertices[mesh.space.boundary_vertices[slot]]
    total = 0.0
    for j in np.flatnonzero((geom.vertex_slot == slot).any(axis=1)):
        if j == i:
            continue
        shared = set(geom.vertex_ids[i]) & set(geom.vertex_ids[j])
        point = mesh.space.vertices[shared.pop()] if shared else None
        for mp in (k - 1, k):
            if mp < 0 or mp >= M:
                continue
            h = tb[mp + 1] - tb[mp]
            hat = (-tb[mp] / h, 1.0 / h) if mp == k - 1 else (tb[mp + 1] / h, -1.0 / h)
            total += double_layer_piece(geom.start[i], geom.end[i], geom.start[j], geom.end[j],
                                        geom.normal[j], vertex, (tb[m], tb[m + 1]),
                                        (tb[mp], tb[mp + 1]), hat, shared=point)
    return total



@pytest.mark.parametrize("r, c, kind", [(30, 22, 0), (18, 14, 0), (13, 12, 1), (25, 13, 2)])
def test_single_layer_oracle(mesh2, bem2, r, c, kind):
    geom = BoundaryGeometry.of(mesh2.space)
    nb = geom.n_edges
    assert classify_pairs(geom)[r % nb, c % nb] == kind
    tol = 1e-8 if kind == 0 else 1e-6
    assert bem2.V[r, c] == pytest.approx(oracle_v(mesh2, geom, r, c), rel=tol)


@pytest.mark.parametrize("r, c", [(22, 19), (24, 0), (19, 1), (30, 8)])
def test_double_layer_oracle(mesh2, bem2, r, c):
    geom = BoundaryGeometry.of(mesh2.space)
    assert bem2.K[r, c] == pytest.approx(oracle_k(mesh2, geom, r, c), rel=1e-6)


def test_quadrature_convergence(mesh2, bem2):
    fine = assemble_bem(mesh2, BemQuadrature(n_regular=12, n_singular=16, n_angular=16, levels=16))
    assert np.abs(fine.V - bem2.V).max() <= 1e-9 * np.abs(fine.V).max()
    assert np.abs(fine.K - bem2.K).max() <= 1e-9 * np.abs(fine.K).max()


def test_potentials_trivial(mesh2):
    M, nb, nbv = _blocks(mesh2)
    x = np.array([2.0, 0.5])
    assert eval_single_potential(mesh2, np.zeros(M * nb), 0.5, x) == 0.0
    assert eval_double_potential(mesh2, np.zeros((M + 1) * nbv), 0.5, x) == 0.0
    assert eval_single_potential(mesh2, np.ones(M * nb), 0.0, x) == 0.0
    assert eval_double_potential(mesh2, np.ones((M + 1) * nbv), -0.1, x) == 0.0
    assert eval_single_potential(mesh2, np.ones(M * nb), 0.5, x) > 0.0
    with pytest.raises(ValueError):
        eval_single_potential(mesh2, np.ones(M * nb), 0.5, np.array([0.0, 0.3]))


def _box_heat(t, x):
    s = 2.0 * math.sqrt(t)
    f = [0.5 * (erf((1 - c) / s) + erf(c / s)) for c in x]
    return f[0] * f[1]


@pytest.mark.parametrize("t, x", [(0.5, (0.5, 0.5)), (0.8, (0.3, 0.4)), (0.2, (0.6, 0.2))])
def test_double_layer_of_constant(mesh3, t, x):
    # w = 1 with w(0) = 1: 1 = int_Omega G(t, x - y) dy - K~(1)(t, x)
    M, nb, nbv = _blocks(mesh3)
    value = eval_double_potential(mesh3, np.ones((M + 1) * nbv), t, np.array(x))
    assert value == pytest.approx(_box_heat(t, x) - 1.0, rel=1e-10)


def test_representation_formula_with_projected_traces():
    # the operators reproduce w = G(t, x - (-0.5, -0.5)) from its Cauchy data once
    # the data are resolved; L2-projected traces reach 1e-3 at level 5
    case = make_case("ex1")
    pts = [(t, np.array(x)) for t in (0.3, 0.7) for x in ((0.3, 0.4), (0.6, 0.2))]
    mesh = build_unit_square_mesh(5)
    ud, phi = trace_data(mesh, case.data, "project")
    for t, x in pts:
        w = eval_single_potential(mesh, phi, t, x) - eval_double_potential(mesh, ud, t, x)
        exact = heat_kernel(t, x - X_EXT)
        assert abs(w - exact) < 1e-3 * exact

