"""Manufactured cases, error norms, rate fitting and exterior evaluation."""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .coupling import trace_data
from .fosls import ProblemData
from .heatbem import eval_double_potential, eval_single_potential
from .kernel import heat_kernel
from .quadrature import triangle_rule
from .spaces import (SlabBasis, barycentric_gradients, dirichlet_trace_dofs, neumann_trace_dofs,
                     rt0_scaling)

X_EXT = np.array([-0.5, -0.5])
X_INT = np.array([0.5, 0.5])
CASES = ("ex1", "ex2", "ex3", "ex4")
ERROR_COLUMNS = ("e_usigmah_Hdiv", "e_uh_L2L2", "e_uh_L2H1", "e_sigmah_L2")


def _zeros(t, x):
    return np.zeros(np.broadcast_shapes(np.shape(t), np.shape(x)[:-1]))


def _zero_grad(t, x):
    return np.zeros(np.broadcast_shapes(np.shape(t), np.shape(x)[:-1]) + (2,))


def _shifted_kernel(center):
    def u(t, x):
        return heat_kernel(t, np.asarray(x) - center)

    def grad(t, x):
        d = np.asarray(x, dtype=float) - center
        t = np.asarray(t, dtype=float)
        ts = np.where(t > 0, t, 1.0)
        g = heat_kernel(t, d)
        return (-g / (2.0 * ts))[..., None] * d

    return u, grad


@dataclass(frozen=True)
class ManufacturedCase:
    """Exact fields of a test case and the transmission data derived from them.

    ``u``/``grad_u`` is the interior solution (identity diffusion, so
    sigma = -grad u) and ``u_ext``/``grad_ext`` the exterior one. ``u`` is
    None when no closed form is known.
    """

    name: str
    data: ProblemData
    u: Optional[Callable] = None
    grad_u: Optional[Callable] = None
    u_ext: Callable = _zeros
    grad_ext: Callable = _zero_grad

    @property
    def has_exact(self):
        return self.u is not None

    def sigma(self, t, x):
        return -self.grad_u(t, x)


def _transmission_case(name, u, grad_u, u_ext, grad_ext, f, u0):
    def uD(t, x):
        return u(t, x) - u_ext(t, x)

    def phiN(t, x, n):
        return np.sum((grad_u(t, x) - grad_ext(t, x)) * n, axis=-1)

    return ManufacturedCase(name, ProblemData(f=f, u0=u0, uD=uD, phiN=phiN), u, grad_u, u_ext, grad_ext)


def make_case(name):
    if name == "ex1":
        u, g = _shifted_kernel(X_EXT)
        return _transmission_case(name, u, g, _zeros, _zero_grad, _zeros, lambda x: u(0.0, x))
    if name == "ex2":
        ue, ge = _shifted_kernel(X_INT)
        return _transmission_case(name, _zeros, _zero_grad, ue, ge, _zeros,
                                  lambda x: np.zeros(np.shape(x)[:-1]))
    if name == "ex3":
        ue, ge = _shifted_kernel(X_INT)

        def u(t, x):
            return np.asarray(x)[..., 0] ** 2 + t

        def g(t, x):
            x = np.asarray(x, dtype=float)
            shape = np.broadcast_shapes(np.shape(t), x.shape[:-1])
            out = np.zeros(shape + (2,))
            out[..., 0] = 2.0 * x[..., 0]
            return out

        return _transmission_case(name, u, g, ue, ge, lambda t, x: -np.ones(np.broadcast_shapes(
            np.shape(t), np.shape(x)[:-1])), lambda x: np.asarray(x)[..., 0] ** 2)
    if name == "ex4":
        return ManufacturedCase(name, ProblemData(u0=lambda x: np.ones(np.shape(x)[:-1])))
    raise ValueError(f"unknown case {name!r}; expected one of {', '.join(CASES)}")


def error_norms(field, case, quad_order=5, quad_time=None):
    """Squared errors (div, L2 of u, L2 of grad u, L2 of sigma) over Q."""
    if not case.has_exact:
        raise ValueError(f"case {case.name} has no exact solution; use the residual functional")
    quad_time = quad_order if quad_time is None else quad_time
    mesh = field.mesh
    space = mesh.space
    ref, wref = triangle_rule(quad_order)
    grads = barycentric_gradients(space)
    scaling = rt0_scaling(space)
    err = np.zeros(4)
    for m in range(mesh.time.M):
        basis = SlabBasis(mesh, m, quad_time, ref, grads, scaling)
        w = 2.0 * space.areas[:, None, None] * (basis.wt[:, None] * wref[None, :])[None]
        tq = basis.t[None, :, None]
        xq = basis.x[:, None, :, :]
        u, gu, sg, dv = basis.combine(field.coefficients)
        div_exact = np.broadcast_to(case.data.f(tq, xq), w.shape)
        gex = case.grad_u(tq, xq)
        err[0] += np.sum(w * (div_exact - dv) ** 2)
        err[1] += np.sum(w * (case.u(tq, xq) - u) ** 2)
        err[2] += np.sum(w * np.sum((gex - gu) ** 2, axis=-1))
        err[3] += np.sum(w * np.sum((-gex - sg) ** 2, axis=-1))
    return err


@dataclass
class ErrorTable:
    """Rows of N_h followed by squared error columns."""

    columns: tuple
    rows: list = field(default_factory=list)

    def add(self, n_h, values):
        values = np.atleast_1d(np.asarray(values, dtype=float))
        if len(values) != len(self.columns):
            raise ValueError(f"expected {len(self.columns)} values, got {len(values)}")
        if np.any(values < 0):
            raise ValueError("squared errors must be nonnegative")
        if self.rows and n_h <= self.rows[-1][0]:
            raise ValueError("N_h must be strictly increasing")
        self.rows.append((int(n_h), values))

    @property
    def n_h(self):
        return np.array([r[0] for r in self.rows], dtype=float)

    def column(self, name):
        i = self.columns.index(name)
        return np.array([r[1][i] for r in self.rows])


def fit_rate(table, column, window=None):
    """Least-squares slope of log(error) against log(N_h) over the last ``window`` rows."""
    n = table.n_h
    e = table.column(column)
    if window is not None:
        n, e = n[-window:], e[-window:]
    if len(n) < 2:
        raise ValueError("need at least two rows to fit a rate")
    if np.any(e <= 0):
        raise ValueError(f"nonpositive entries in column {column}")
    return float(np.polyfit(np.log(n), np.log(e), 1)[0])


def eval_exterior(field, data, t, x, traces="interpolate"):
    """K~(u_h - Pi_D uD) + V~(sigma_h . n + Pi_N phiN) at (t, x) outside the closed domain.

    ``traces`` should match the one used to build the solved system.
    """
    mesh = field.mesh
    x = np.asarray(x, dtype=float)
    lam = mesh.space.barycentric(np.arange(mesh.space.n_triangles), x)
    if np.any(np.all(lam >= -1e-12, axis=1)):
        raise ValueError(f"point {x} is not in the exterior domain")
    dt = dirichlet_trace_dofs(mesh)
    nt = neumann_trace_dofs(mesh)
    ud, phi = trace_data(mesh, data, traces)
    dirichlet = dt.values(field.coefficients) - ud
    neumann = nt.values(field.coefficients) + phi
    return eval_double_potential(mesh, dirichlet, t, x) + eval_single_potential(mesh, neumann, t, x)
