"""Trial space [S1(I) x S1(Omega)] x [P0(I) x RT0(Omega)] and its traces on Sigma.

The u-block is numbered node-wise, ``k * n_vertices + v`` for time node k and
vertex v. The sigma-block follows it, ``n_u + m * n_edges + e`` for time slab m
and edge e. A sigma coefficient is the normal component of the field on its
edge, measured against the edge's reference normal.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .quadrature import gauss_legendre


@dataclass(frozen=True, eq=False)
class DofMap:
    mesh: object

    @property
    def n_u(self):
        return self.mesh.n_nodes

    @property
    def n_sigma(self):
        return self.mesh.time.M * self.mesh.space.n_edges

    @property
    def size(self):
        return self.n_u + self.n_sigma

    def u(self, k, v):
        return k * self.mesh.space.n_vertices + v

    def sigma(self, m, e):
        return self.n_u + m * self.mesh.space.n_edges + e


@dataclass(frozen=True, eq=False)
class SolutionField:
    coefficients: np.ndarray
    dofs: DofMap

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=float)
        if c.shape != (self.dofs.size,):
            raise ValueError(f"expected {self.dofs.size} coefficients, got {c.shape}")
        object.__setattr__(self, "coefficients", c)

    @property
    def mesh(self):
        return self.dofs.mesh

    @classmethod
    def zeros(cls, dofs):
        return cls(np.zeros(dofs.size), dofs)

    @classmethod
    def interpolate(cls, dofs, u=None, sigma=None):
        """Nodal interpolant of ``u`` and RT0 interpolant of ``sigma``."""
        c = np.zeros(dofs.size)
        if u is not None:
            c[:dofs.n_u] = interpolate_u(dofs.mesh, u).ravel()
        if sigma is not None:
            c[dofs.n_u:] = interpolate_sigma(dofs.mesh, sigma).ravel()
        return cls(c, dofs)

    def u_nodal(self):
        mesh = self.mesh
        return self.coefficients[:self.dofs.n_u].reshape(mesh.time.M + 1, mesh.space.n_vertices)

    def sigma_dofs(self):
        mesh = self.mesh
        return self.coefficients[self.dofs.n_u:].reshape(mesh.time.M, mesh.space.n_edges)


def barycentric_gradients(space):
    """Gradients of the three barycentric functions, shape (n_triangles, 3, 2)."""
    p = space.vertices[space.triangles]
    tang = p[:, [2, 0, 1]] - p[:, [1, 2, 0]]
    grads = np.stack([-tang[..., 1], tang[..., 0]], axis=-1)
    return grads / (2.0 * space.areas[:, None, None])


def rt0_scaling(space):
    """Per triangle factors c_i such that psi_i(x) = c_i (x - p_i)."""
    L = space.edge_lengths[space.tri_edges]
    return space.tri_edge_signs * L / (2.0 * space.areas[:, None])


def interpolate_u(mesh, func):
    tb = mesh.time.breakpoints
    x = mesh.space.vertices
    return np.asarray(func(tb[:, None], x[None, :, :]), dtype=float) * np.ones((len(tb), len(x)))


def interpolate_sigma(mesh, func, n=3):
    """Mean normal component over each edge and time slab."""
    sp = mesh.space
    s, ws = gauss_legendre(n)
    a = sp.vertices[sp.edges[:, 0]]
    b = sp.vertices[sp.edges[:, 1]]
    pts = a[:, None, :] + s[None, :, None] * (b - a)[:, None, :]
    out = np.zeros((mesh.time.M, sp.n_edges))
    tb = mesh.time.breakpoints
    for m in range(mesh.time.M):
        tq, wt = gauss_legendre(n, tb[m], tb[m + 1])
        wt = wt / (tb[m + 1] - tb[m])
        for t, w in zip(tq, wt):
            val = np.asarray(func(t, pts), dtype=float)
            out[m] += w * np.einsum("eqd,q,ed->e", val, ws, sp.edge_normals)
    return out


def _locate(mesh, t, x):
    m = mesh.time.locate(t)
    k = mesh.space.locate(x)
    return m, k


def eval_u(field, t, x):
    """Value of the discrete u at the space-time point (t, x)."""
    mesh = field.mesh
    m, k = _locate(mesh, t, x)
    tb = mesh.time.breakpoints
    theta = (t - tb[m]) / (tb[m + 1] - tb[m])
    lam = mesh.space.barycentric(k, x)
    U = field.u_nodal()
    verts = mesh.space.triangles[k]
    return float((1.0 - theta) * U[m, verts] @ lam + theta * U[m + 1, verts] @ lam)


def eval_sigma(field, t, x):
    """Value of the discrete sigma at (t, x), constant in time on each slab."""
    mesh = field.mesh
    sp = mesh.space
    m, k = _locate(mesh, t, x)
    c = rt0_scaling(sp)[k] * field.sigma_dofs()[m, sp.tri_edges[k]]
    p = sp.vertices[sp.triangles[k]]
    return c @ (np.asarray(x, dtype=float)[None, :] - p)


class SlabBasis:
    """Values of the nine local basis functions of every prism in one slab.

    Local order: u-functions (lower time node, v0..v2), (upper node, v0..v2),
    then the three RT0 functions. Arrays are indexed
    [basis, triangle, time point, space point].
    """

    def __init__(self, mesh, m, n_time, ref_pts, grads=None, scaling=None):
        sp = mesh.space
        tb = mesh.time.breakpoints
        self.m = m
        self.h = tb[m + 1] - tb[m]
        self.t, self.wt = gauss_legendre(n_time, tb[m], tb[m + 1])
        theta = (self.t - tb[m]) / self.h
        phi = np.stack([1.0 - theta, theta])                       # (2, nqt)
        dphi = np.array([-1.0, 1.0]) / self.h
        lam = np.stack([1.0 - ref_pts[:, 0] - ref_pts[:, 1], ref_pts[:, 0], ref_pts[:, 1]])
        grads = barycentric_gradients(sp) if grads is None else grads
        scaling = rt0_scaling(sp) if scaling is None else scaling

        p = sp.vertices[sp.triangles]                              # (nt, 3, 2)
        self.x = np.einsum("iq,kid->kqd", lam, p)                  # (nt, nqs, 2)
        nt, nqt, nqs = sp.n_triangles, len(self.t), len(ref_pts)

        self.value = np.zeros((9, nt, nqt, nqs))
        self.grad = np.zeros((9, nt, nqt, nqs, 2))
        self.sigma = np.zeros((9, nt, nqt, nqs, 2))
        self.div = np.zeros((9, nt, nqt, nqs))
        for a in range(2):
            for i in range(3):
                r = 3 * a + i
                self.value[r] = phi[a][None, :, None] * lam[i][None, None, :]
                self.grad[r] = phi[a][None, :, None, None] * grads[:, i][:, None, None, :]
                self.div[r] = dphi[a] * lam[i][None, None, :]
        for i in range(3):
            psi = scaling[:, i, None, None] * (self.x - p[:, i][:, None, :])
            self.sigma[6 + i] = psi[:, None, :, :]
            self.div[6 + i] = (2.0 * scaling[:, i])[:, None, None]

        nv, ne = sp.n_vertices, sp.n_edges
        tri = sp.triangles
        self.dofs = np.concatenate(
            [m * nv + tri, (m + 1) * nv + tri, mesh.n_nodes + m * ne + sp.tri_edges], axis=1)

    def combine(self, coef):
        """Discrete u, grad u, sigma, div at the quadrature points."""
        c = coef[self.dofs].T                                       # (9, nt)
        u = np.einsum("bk,bktq->ktq", c, self.value)
        gu = np.einsum("bk,bktqd->ktqd", c, self.grad)
        sg = np.einsum("bk,bktqd->ktqd", c, self.sigma)
        dv = np.einsum("bk,bktq->ktq", c, self.div)
        return u, gu, sg, dv


@dataclass(frozen=True, eq=False)
class DirichletTrace:
    """S1(I) x S1(Gamma) trace space; DOF ``k * n_bv + j`` is node (t_k, vertex j)."""

    dofs: np.ndarray
    vertices: np.ndarray

    @property
    def size(self):
        return len(self.dofs)

    def values(self, coefficients):
        return np.asarray(coefficients)[self.dofs]


@dataclass(frozen=True, eq=False)
class NeumannTrace:
    """P0(I) x P0(Gamma) trace space; DOF ``m * n_b + j`` is panel (slab m, boundary edge j)."""

    dofs: np.ndarray
    signs: np.ndarray

    @property
    def size(self):
        return len(self.dofs)

    def values(self, coefficients):
        return self.signs * np.asarray(coefficients)[self.dofs]


def dirichlet_trace_dofs(mesh):
    bv = mesh.space.boundary_vertices
    nv = mesh.space.n_vertices
    k = np.arange(mesh.time.M + 1)
    return DirichletTrace((k[:, None] * nv + bv[None, :]).ravel(), bv)


def neumann_trace_dofs(mesh):
    sp = mesh.space
    m = np.arange(mesh.time.M)
    dofs = mesh.n_nodes + m[:, None] * sp.n_edges + sp.boundary_edges[None, :]
    signs = np.broadcast_to(sp.boundary_signs, dofs.shape)
    return NeumannTrace(dofs.ravel(), signs.ravel().astype(float))


def interpolate_dirichlet(mesh, func):
    """Nodal interpolant of a function on Sigma into the Dirichlet trace space."""
    tb = mesh.time.breakpoints
    x = mesh.space.vertices[mesh.space.boundary_vertices]
    vals = np.asarray(func(tb[:, None], x[None, :, :]), dtype=float)
    return (vals * np.ones((len(tb), len(x)))).ravel()


def interpolate_neumann(mesh, func):
    """Panel-midpoint interpolant into the Neumann trace space.

    ``func(t, x, n)`` receives the outward normal of the panel.
    """
    sp = mesh.space
    tb = mesh.time.breakpoints
    e = sp.boundary_edges
    mid = 0.5 * (sp.vertices[sp.edges[e, 0]] + sp.vertices[sp.edges[e, 1]])
    tm = 0.5 * (tb[:-1] + tb[1:])
    n = sp.outward_normals()
    vals = np.asarray(func(tm[:, None], mid[None, :, :], n[None, :, :]), dtype=float)
    return (vals * np.ones((len(tm), len(e)))).ravel()


def _boundary_points(space, n):
    e = space.boundary_edges
    a = space.vertices[space.edges[e, 0]]
    b = space.vertices[space.edges[e, 1]]
    s, ws = gauss_legendre(n)
    return a[:, None, :] + s[None, :, None] * (b - a)[:, None, :], s, ws


def project_neumann(mesh, func, n=4):
    """L2 projection (panel means) into the Neumann trace space."""
    space = mesh.space
    tb = mesh.time.breakpoints
    y, _, ws = _boundary_points(space, n)
    normals = space.outward_normals()[:, None, :]
    out = np.zeros((mesh.time.M, len(space.boundary_edges)))
    for m in range(mesh.time.M):
        tq, wt = gauss_legendre(n, tb[m], tb[m + 1])
        for t, w in zip(tq, wt / (tb[m + 1] - tb[m])):
            out[m] += w * (np.asarray(func(t, y, normals), dtype=float) @ ws)
    return out.ravel()


def project_dirichlet(mesh, func, n=4):
    """L2 projection into the Dirichlet trace space S1(I) x S1(Gamma)."""
    space = mesh.space
    tb = mesh.time.breakpoints
    e = space.boundary_edges
    slot = np.searchsorted(space.boundary_vertices, space.edges[e])
    L = space.edge_lengths[e]
    nbv = len(space.boundary_vertices)
    y, s, ws = _boundary_points(space, n)
    hats = np.stack([1.0 - s, s])
    rhs = np.zeros((mesh.time.M + 1, nbv))
    for m in range(mesh.time.M):
        h = tb[m + 1] - tb[m]
        tq, wt = gauss_legendre(n, tb[m], tb[m + 1])
        for t, w in zip(tq, wt):
            theta = (t - tb[m]) / h
            vals = np.asarray(func(t, y), dtype=float)
            for k in range(2):
                loc = w * L * ((vals * ws) @ hats[k])
                np.add.at(rhs[m], slot[:, k], (1.0 - theta) * loc)
                np.add.at(rhs[m + 1], slot[:, k], theta * loc)
    h = mesh.time.steps
    diag = np.concatenate([h, [0.0]]) + np.concatenate([[0.0], h])
    mt = sp.diags([diag / 3.0, h / 6.0, h / 6.0], [0, 1, -1])
    r = np.concatenate([slot[:, 0], slot[:, 1], slot[:, 0], slot[:, 1]])
    c = np.concatenate([slot[:, 0], slot[:, 1], slot[:, 1], slot[:, 0]])
    v = np.concatenate([L / 3.0, L / 3.0, L / 6.0, L / 6.0])
    ms = sp.csr_matrix((v, (r, c)), shape=(nbv, nbv))
    return spla.spsolve(sp.kron(mt, ms).tocsc(), rhs.ravel())
