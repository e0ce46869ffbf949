"""Least-squares form, U-norm Gram matrix and load vector on the trial space."""

import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .quadrature import triangle_rule
from .spaces import SlabBasis, barycentric_gradients, rt0_scaling


def _zero(t, x, *args):
    return np.zeros(np.broadcast_shapes(np.shape(t), np.shape(x)[:-1]))


@dataclass(frozen=True)
class ProblemData:
    """Data of the transmission problem.

    Every function is vectorized: ``f(t, x)``, ``u0(x)``, ``uD(t, x)`` and
    ``phiN(t, x, n)`` take points ``x`` of shape (..., 2) and broadcast ``t``
    against ``x[..., 0]``. ``A(t, x)`` returns (..., 2, 2); ``None`` means the
    identity.
    """

    f: Callable = _zero
    u0: Callable = lambda x: np.zeros(np.shape(x)[:-1])
    uD: Callable = _zero
    phiN: Callable = _zero
    A: Optional[Callable] = None
    T: float = 1.0


@dataclass(frozen=True, eq=False)
class FoslsMatrices:
    B: sp.csr_matrix
    gram: sp.csr_matrix
    load: np.ndarray


def _coefficient(data, t, x):
    """A at the points (t, x) as an array (..., 2, 2), after an SPD check."""
    shape = np.broadcast_shapes(np.shape(t), np.shape(x)[:-1])
    A = np.broadcast_to(np.asarray(data.A(t, x), dtype=float), shape + (2, 2))
    if not np.allclose(A, np.swapaxes(A, -1, -2), rtol=1e-12, atol=1e-14):
        raise ValueError("diffusion matrix A is not symmetric at some quadrature point")
    if np.any(np.linalg.eigvalsh(A.reshape(-1, 2, 2))[:, 0] <= 0):
        raise ValueError("diffusion matrix A is not positive definite at some quadrature point")
    return A


def _flux_values(basis, A):
    """A grad u + sigma for each basis function."""
    if A is None:
        return basis.grad + basis.sigma
    return np.einsum("ktqij,bktqj->bktqi", A, basis.grad) + basis.sigma


def assemble_fosls(mesh, dofs, data=None, quad_order=3, quad_time=None):
    """Assemble the least-squares matrix (alpha = 1), the U Gram matrix and the load.

    ``quad_order`` is the number of Gauss points per direction of the
    collapsed triangle rule, and also in time unless ``quad_time`` is given.
    """
    quad_time = quad_order if quad_time is None else quad_time
    if quad_order < 2 or quad_time < 2:
        raise ValueError("quadrature orders must be at least 2")
    data = ProblemData() if data is None else data
    if data.A is not None and quad_order < 3:
        warnings.warn("quad_order < 3 may not integrate a variable diffusion matrix exactly")

    space = mesh.space
    ref, wref = triangle_rule(quad_order)
    grads = barycentric_gradients(space)
    scaling = rt0_scaling(space)
    rows, cols, bvals, gvals = [], [], [], []
    load = np.zeros(dofs.size)

    for m in range(mesh.time.M):
        basis = SlabBasis(mesh, m, quad_time, ref, grads, scaling)
        w = basis.wt[:, None] * wref[None, :]                              # (nqt, nqs)
        w = 2.0 * space.areas[:, None, None] * w[None]                     # (nt, nqt, nqs)
        tq = basis.t[None, :, None]
        xq = basis.x[:, None, :, :]
        A = None if data.A is None else _coefficient(data, tq, xq)
        flux = _flux_values(basis, A)

        Bloc = (np.einsum("ktq,aktq,bktq->kab", w, basis.div, basis.div)
                + np.einsum("ktq,aktqd,bktqd->kab", w, flux, flux))
        Gloc = (np.einsum("ktq,aktq,bktq->kab", w, basis.value, basis.value)
                + np.einsum("ktq,aktqd,bktqd->kab", w, basis.grad, basis.grad)
                + np.einsum("ktq,aktqd,bktqd->kab", w, basis.sigma, basis.sigma)
                + np.einsum("ktq,aktq,bktq->kab", w, basis.div, basis.div))
        rows.append(np.repeat(basis.dofs, 9, axis=1).ravel())
        cols.append(np.tile(basis.dofs, (1, 9)).ravel())
        bvals.append(Bloc.ravel())
        gvals.append(Gloc.ravel())

        fq = np.broadcast_to(data.f(tq, xq), w.shape)
        np.add.at(load, basis.dofs.T, np.einsum("ktq,ktq,bktq->bk", w, fq, basis.div))

    # initial trace <u(0), v(0)>_Omega on the first node block
    lam = np.stack([1.0 - ref[:, 0] - ref[:, 1], ref[:, 0], ref[:, 1]])
    p = space.vertices[space.triangles]
    x0 = np.einsum("iq,kid->kqd", lam, p)
    w0 = 2.0 * space.areas[:, None] * wref[None, :]
    M0 = np.einsum("kq,aq,bq->kab", w0, lam, lam)
    tri = space.triangles
    rows.append(np.repeat(tri, 3, axis=1).ravel())
    cols.append(np.tile(tri, (1, 3)).ravel())
    bvals.append(M0.ravel())
    gvals.append(np.zeros(M0.size))
    u0 = np.broadcast_to(data.u0(x0), w0.shape)
    np.add.at(load, tri.T, np.einsum("kq,kq,aq->ak", w0, u0, lam))

    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    shape = (dofs.size, dofs.size)
    B = sp.csr_matrix((np.concatenate(bvals), (rows, cols)), shape=shape)
    G = sp.csr_matrix((np.concatenate(gvals), (rows, cols)), shape=shape)
    B = ((B + B.T) * 0.5).tocsr()
    G = ((G + G.T) * 0.5).tocsr()
    return FoslsMatrices(B, G, load)


def fosls_residual_norm_sq(field, data, quad_order=5):
    """||f - div u_h||^2 + ||A grad u_h + sigma_h||^2 + ||u0 - u_h(0)||^2."""
    mesh = field.mesh
    space = mesh.space
    ref, wref = triangle_rule(quad_order)
    grads = barycentric_gradients(space)
    scaling = rt0_scaling(space)
    total = 0.0
    for m in range(mesh.time.M):
        basis = SlabBasis(mesh, m, quad_order, ref, grads, scaling)
        w = 2.0 * space.areas[:, None, None] * (basis.wt[:, None] * wref[None, :])[None]
        tq = basis.t[None, :, None]
        xq = basis.x[:, None, :, :]
        u, gu, sg, dv = basis.combine(field.coefficients)
        if data.A is not None:
            gu = np.einsum("ktqij,ktqj->ktqi", _coefficient(data, tq, xq), gu)
        total += np.sum(w * (data.f(tq, xq) - dv) ** 2)
        total += np.sum(w * np.sum((gu + sg) ** 2, axis=-1))
    lam = np.stack([1.0 - ref[:, 0] - ref[:, 1], ref[:, 0], ref[:, 1]])
    p = space.vertices[space.triangles]
    x0 = np.einsum("iq,kid->kqd", lam, p)
    w0 = 2.0 * space.areas[:, None] * wref[None, :]
    uh0 = field.u_nodal()[0][space.triangles] @ lam                      # (nt, nqs)
    total += np.sum(w0 * (data.u0(x0) - uh0) ** 2)
    return float(total)
