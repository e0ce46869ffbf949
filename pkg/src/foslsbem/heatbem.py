"""Galerkin matrices of the heat single- and double-layer operators on Sigma.

Time is integrated in closed form (see ``kernel``); space by tensor Gauss
rules on disjoint edges and by singularity-adapted rules on identical or
touching edges. Test space: P0 in time x P0 on boundary edges (panel DOFs).
Trial space of the double layer: hats in time x hats on boundary vertices.
"""

from dataclasses import dataclass, field

import numpy as np

from .kernel import (double_layer_antiderivatives, layer_antiderivatives,
                     single_layer_antiderivatives)
from .quadrature import gauss_legendre, graded_gauss


@dataclass(frozen=True)
class BemQuadrature:
    n_regular: int = 8
    n_singular: int = 12
    n_angular: int = 8
    grading: float = 0.15
    levels: int = 12


@dataclass(frozen=True, eq=False)
class BemMatrices:
    V: np.ndarray
    K: np.ndarray
    quadrature: BemQuadrature = field(default_factory=BemQuadrature)


@dataclass(frozen=True, eq=False)
class BoundaryGeometry:
    """Boundary edges with endpoints in reference order and outward normals."""

    start: np.ndarray
    end: np.ndarray
    normal: np.ndarray
    length: np.ndarray
    vertex_ids: np.ndarray      # (nb, 2) global vertex ids of start, end
    vertex_slot: np.ndarray     # (nb, 2) positions in the boundary vertex list
    n_vertices: int

    @classmethod
    def of(cls, space):
        e = space.boundary_edges
        ids = space.edges[e]
        slot = np.searchsorted(space.boundary_vertices, ids)
        return cls(space.vertices[ids[:, 0]], space.vertices[ids[:, 1]], space.outward_normals(),
                   space.edge_lengths[e], ids, slot, len(space.boundary_vertices))

    @property
    def n_edges(self):
        return len(self.length)

    def hat_weights(self, j, y):
        """Values of the two vertex hats of trial edge j at the points y."""
        d = self.end[j] - self.start[j]
        s = np.einsum("...d,...d->...", y - self.start[j], d) / self.length[j] ** 2
        return np.stack([1.0 - s, s], axis=-1)


def classify_pairs(geom):
    """0 for disjoint, 1 for touching, 2 for identical edge pairs."""
    ids = geom.vertex_ids
    share = (ids[:, None, :, None] == ids[None, :, None, :]).any(axis=(2, 3))
    kind = share.astype(int)
    np.fill_diagonal(kind, 2)
    return kind


def _segment_distance(p0, p1, q0, q1):
    """Minimum distance between segments, vectorized and sampled at endpoints."""
    def point_seg(x, a, b):
        d = b - a
        s = np.clip(np.einsum("...d,...d->...", x - a, d) / np.einsum("...d,...d->...", d, d), 0, 1)
        return np.linalg.norm(x - a - s[..., None] * d, axis=-1)
    return np.minimum.reduce([point_seg(p0, q0, q1), point_seg(p1, q0, q1),
                              point_seg(q0, p0, p1), point_seg(q1, p0, p1)])


def _check_disjoint(geom, kind):
    i, j = np.nonzero(kind == 0)
    dist = _segment_distance(geom.start[i], geom.end[i], geom.start[j], geom.end[j])
    bad = dist <= 1e-12 * np.maximum(geom.length[i], geom.length[j])
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        raise ValueError(f"no quadrature rule for boundary edges {i[k]} and {j[k]}: "
                         "they intersect without sharing a vertex")


class _PointSet:
    """Quadrature points (x on the test edge, y on the trial edge) of many edge pairs."""

    def __init__(self, geom, ti, tj, x, y, w):
        self.ti, self.tj = ti, tj
        d = x - y
        self.a = 0.25 * np.einsum("pd,pd->p", d, d)
        self.w = w
        proj = np.einsum("pd,pd->p", d, geom.normal[tj])
        self.wk = (w * proj)[:, None] * geom.hat_weights(tj, y)


def _regular_points(geom, kind, n):
    ti, tj = np.nonzero(kind == 0)
    s, ws = gauss_legendre(n)
    x = geom.start[:, None, :] + s[None, :, None] * (geom.end - geom.start)[:, None, :]
    wx = geom.length[:, None] * ws[None, :]
    X = np.broadcast_to(x[ti][:, :, None, :], (len(ti), n, n, 2)).reshape(-1, 2)
    Y = np.broadcast_to(x[tj][:, None, :, :], (len(ti), n, n, 2)).reshape(-1, 2)
    W = (wx[ti][:, :, None] * wx[tj][:, None, :]).reshape(-1)
    return _PointSet(geom, np.repeat(ti, n * n), np.repeat(tj, n * n), X, Y, W)


def _identical_points(geom, quad):
    # int_e int_e g(|x - y|) = 2 L^2 int_0^1 (1 - v) g(L v) dv; the double-layer part vanishes
    v, wv = graded_gauss(quad.n_singular, quad.grading, quad.levels)
    nb = geom.n_edges
    L = geom.length
    pts = _PointSet.__new__(_PointSet)
    pts.ti = np.repeat(np.arange(nb), len(v))
    pts.tj = pts.ti
    pts.a = 0.25 * (L[:, None] * v[None, :]).ravel() ** 2
    pts.w = (2.0 * L[:, None] ** 2 * ((1.0 - v) * wv)[None, :]).ravel()
    pts.wk = np.zeros((len(pts.w), 2))
    return pts


def _touching_points(geom, kind, quad):
    ti, tj = np.nonzero(kind == 1)
    ids = geom.vertex_ids
    # shared vertex and the far endpoints, parametrized from the shared vertex
    si = np.where((ids[ti, 0, None] == ids[tj]).any(axis=1), 0, 1)
    sj = np.where(ids[tj, 0] == ids[ti, si], 0, 1)
    ends_i = np.stack([geom.start[ti], geom.end[ti]], axis=1)
    ends_j = np.stack([geom.start[tj], geom.end[tj]], axis=1)
    c = ends_i[np.arange(len(ti)), si]
    p = ends_i[np.arange(len(ti)), 1 - si]
    q = ends_j[np.arange(len(tj)), 1 - sj]

    rho, wr = graded_gauss(quad.n_singular, quad.grading, quad.levels)
    w, ww = gauss_legendre(quad.n_angular)
    R, Wg = np.meshgrid(rho, w, indexing="ij")
    WR = np.outer(wr, ww) * R
    R, Wg, WR = R.ravel(), Wg.ravel(), WR.ravel()
    # triangle eta <= xi: xi = rho, eta = rho w; and its mirror image
    xi = np.concatenate([R, R * Wg])
    eta = np.concatenate([R * Wg, R])
    wq = np.concatenate([WR, WR])
    X = c[:, None, :] + xi[None, :, None] * (p - c)[:, None, :]
    Y = c[:, None, :] + eta[None, :, None] * (q - c)[:, None, :]
    W = (geom.length[ti] * geom.length[tj])[:, None] * wq[None, :]
    nq = len(xi)
    return _PointSet(geom, np.repeat(ti, nq), np.repeat(tj, nq),
                     X.reshape(-1, 2), Y.reshape(-1, 2), W.ravel())


class _Lags:
    """Positive time differences t_i - t_j of the partition; index 0 stands for tau <= 0."""

    def __init__(self, time):
        tb = time.breakpoints
        n = len(tb)
        if time.is_uniform:
            h = tb[1] - tb[0]
            self.taus = np.concatenate([[0.0], h * np.arange(1, n)])
            i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
            self.index = np.maximum(i - j, 0)
        else:
            diff = tb[:, None] - tb[None, :]
            pos = np.unique(diff[diff > 0])
            self.taus = np.concatenate([[0.0], pos])
            self.index = np.where(diff > 0, np.searchsorted(pos, diff) + 1, 0)


def _lag_sums(points, lags, nb):
    """Per edge pair and lag: sums of w F2 and of w (x-y).n_y hat K2, K3."""
    npair = nb * nb
    pair = points.ti * nb + points.tj
    nl = len(lags.taus)
    SF = np.zeros((npair, nl))
    SK2 = np.zeros((npair, 2, nl))
    SK3 = np.zeros((npair, 2, nl))
    for k in range(1, nl):
        F2, K2, K3 = layer_antiderivatives(lags.taus[k], points.a)
        SF[:, k] = np.bincount(pair, points.w * F2, minlength=npair)
        for s in range(2):
            SK2[:, s, k] = np.bincount(pair, points.wk[:, s] * K2, minlength=npair)
            SK3[:, s, k] = np.bincount(pair, points.wk[:, s] * K3, minlength=npair)
    return SF, SK2, SK3


def assemble_bem(mesh, quad=None, reuse_blocks=True):
    """Dense Galerkin matrices V (panels x panels) and K (panels x Dirichlet DOFs).

    Row and column ``m * n_b + j`` is the panel (slab m, boundary edge j); K
    column ``k * n_bv + i`` is the hat at time node k and boundary vertex i.
    The -1/2 identity of the interior trace is not included in K. On uniform
    time grids each time-lag block is computed once unless ``reuse_blocks``
    is False.
    """
    quad = BemQuadrature() if quad is None else quad
    geom = BoundaryGeometry.of(mesh.space)
    nb, nbv = geom.n_edges, geom.n_vertices
    kind = classify_pairs(geom)
    _check_disjoint(geom, kind)
    lags = _Lags(mesh.time)

    SF = np.zeros((nb * nb, len(lags.taus)))
    SK2 = np.zeros((nb * nb, 2, len(lags.taus)))
    SK3 = np.zeros_like(SK2)
    for pts in (_regular_points(geom, kind, quad.n_regular), _identical_points(geom, quad),
                _touching_points(geom, kind, quad)):
        sf, sk2, sk3 = _lag_sums(pts, lags, nb)
        SF += sf
        SK2 += sk2
        SK3 += sk3
    SF = SF.reshape(nb, nb, -1)
    SK2 = SK2.reshape(nb, nb, 2, -1)
    SK3 = SK3.reshape(nb, nb, 2, -1)

    # incidence of (edge, endpoint) onto boundary vertices
    P = np.zeros((2, nb, nbv))
    for s in range(2):
        P[s, np.arange(nb), geom.vertex_slot[:, s]] = 1.0

    M = mesh.time.M
    tb = mesh.time.breakpoints
    uniform = reuse_blocks and mesh.time.is_uniform
    cache = {}

    def block(m, mp):
        key = m - mp if uniform else (m, mp)
        if key not in cache:
            ibc, ibd = lags.index[m + 1, mp], lags.index[m + 1, mp + 1]
            iac, iad = lags.index[m, mp], lags.index[m, mp + 1]
            v = SF[..., ibc] - SF[..., ibd] - SF[..., iac] + SF[..., iad]
            k2c = SK2[..., ibc] - SK2[..., iac]
            k2d = SK2[..., ibd] - SK2[..., iad]
            k3 = (SK3[..., ibc] - SK3[..., iac] - SK3[..., ibd] + SK3[..., iad]) / (tb[mp + 1] - tb[mp])
            lower = sum((k2c - k3)[:, :, s] @ P[s] for s in range(2))
            upper = sum((k3 - k2d)[:, :, s] @ P[s] for s in range(2))
            cache[key] = (v, lower, upper)
        return cache[key]

    V = np.zeros((M * nb, M * nb))
    K = np.zeros((M * nb, (M + 1) * nbv))
    for m in range(M):
        rows = slice(m * nb, (m + 1) * nb)
        for mp in range(m + 1):
            v, lower, upper = block(m, mp)
            V[rows, mp * nb:(mp + 1) * nb] = v
            K[rows, mp * nbv:(mp + 1) * nbv] += lower
            K[rows, (mp + 1) * nbv:(mp + 2) * nbv] += upper
    return BemMatrices(V, K, quad)


def assemble_V(mesh, quad=None):
    return assemble_bem(mesh, quad).V


def assemble_K(mesh, quad=None):
    return assemble_bem(mesh, quad).K


def _edge_points(geom, n):
    s, ws = gauss_legendre(n)
    y = geom.start[:, None, :] + s[None, :, None] * (geom.end - geom.start)[:, None, :]
    return y, geom.length[:, None] * ws[None, :]


def _check_off_boundary(geom, x, tol=1e-12):
    x = np.asarray(x, dtype=float)
    e = geom.end - geom.start
    s = np.clip(np.einsum("jd,jd->j", x - geom.start, e) / np.einsum("jd,jd->j", e, e), 0.0, 1.0)
    dist = np.linalg.norm(geom.start + s[:, None] * e - x, axis=1)
    if np.any(dist <= tol):
        raise ValueError("evaluation point lies on the boundary")


def eval_single_potential(mesh, density, t, x, n_gauss=16):
    """Single-layer potential of a panel-wise constant density at (t, x) off Sigma."""
    geom = BoundaryGeometry.of(mesh.space)
    y, w = _edge_points(geom, n_gauss)
    d = np.asarray(x, dtype=float) - y
    a = 0.25 * np.einsum("jqd,jqd->jq", d, d)
    _check_off_boundary(geom, x)
    tb = mesh.time.breakpoints
    F1, _ = single_layer_antiderivatives((t - tb)[:, None, None], a[None])
    slab = np.einsum("mjq,jq->mj", F1[:-1] - F1[1:], w)
    dens = np.asarray(density, dtype=float).reshape(mesh.time.M, geom.n_edges)
    return float(np.sum(slab * dens))


def eval_double_potential(mesh, density, t, x, n_gauss=16):
    """Double-layer potential of a Dirichlet-trace density at (t, x) off Sigma."""
    geom = BoundaryGeometry.of(mesh.space)
    y, w = _edge_points(geom, n_gauss)
    x = np.asarray(x, dtype=float)
    d = x - y
    a = 0.25 * np.einsum("jqd,jqd->jq", d, d)
    _check_off_boundary(geom, x)
    proj = np.einsum("jqd,jd->jq", d, geom.normal)
    hats = geom.hat_weights(np.arange(geom.n_edges)[:, None], y)          # (nb, nq, 2)
    wk = (w * proj)[..., None] * hats

    tb = mesh.time.breakpoints
    K1, K2, _ = double_layer_antiderivatives((t - tb)[:, None, None], a[None])
    h = np.diff(tb)[:, None, None]
    k2 = (K2[:-1] - K2[1:]) / h
    lower = K1[:-1] - k2                   # hat of the slab's left node
    upper = k2 - K1[1:]                    # hat of the slab's right node
    lo = np.einsum("mjq,jqs->mjs", lower, wk)
    up = np.einsum("mjq,jqs->mjs", upper, wk)
    dens = np.asarray(density, dtype=float).reshape(mesh.time.M + 1, geom.n_vertices)
    slot = geom.vertex_slot
    total = 0.0
    for s in range(2):
        total += np.sum(lo[:, :, s] * dens[:-1][:, slot[:, s]])
        total += np.sum(up[:, :, s] * dens[1:][:, slot[:, s]])
    return float(total)
