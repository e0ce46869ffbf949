"""Coupled FOSLS-BEM system: the Dirichlet-trace boundary equation tested with
Neumann traces, its right-hand side, the direct solve and the coercivity study.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fosls import ProblemData, assemble_fosls
from .heatbem import BemQuadrature, BoundaryGeometry, assemble_bem
from .mesh import build_unit_square_mesh
from .spaces import (DofMap, SolutionField, dirichlet_trace_dofs, interpolate_dirichlet,
                     interpolate_neumann, neumann_trace_dofs, project_dirichlet, project_neumann)

TRACE_MAPS = {
    "interpolate": (interpolate_dirichlet, interpolate_neumann),
    "project": (project_dirichlet, project_neumann),
}

DENSE_EIG_MAX_SIZE = 4000
EIG_SHIFT = -2.0


class SolverError(RuntimeError):
    pass


def boundary_mass_matrix(mesh):
    """Sigma-mass matrix between panel indicators and space-time hats.

    Row ``m * n_b + j`` is panel (slab m, boundary edge j), column
    ``k * n_bv + i`` the hat of time node k and boundary vertex i.
    """
    geom = BoundaryGeometry.of(mesh.space)
    nb, nbv = geom.n_edges, geom.n_vertices
    h = mesh.time.steps
    M = mesh.time.M
    rows, cols, vals = [], [], []
    for m in range(M):
        for k in (m, m + 1):
            for s in range(2):
                rows.append(m * nb + np.arange(nb))
                cols.append(k * nbv + geom.vertex_slot[:, s])
                vals.append(0.25 * h[m] * geom.length)
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(M * nb, (M + 1) * nbv)).toarray()


def assemble_c1(bem, mass):
    """Dense block [V | K - M/2] on (Neumann, Dirichlet) trace DOFs."""
    V, K = bem.V, bem.K
    if V.shape[0] != V.shape[1] or K.shape[0] != V.shape[0] or mass.shape != K.shape:
        raise ValueError(f"inconsistent trace shapes: V {V.shape}, K {K.shape}, mass {mass.shape}")
    return np.hstack([V, K - 0.5 * mass])


def _scatter(block, row_dofs, col_dofs, size):
    r, c = np.meshgrid(row_dofs, col_dofs, indexing="ij")
    return sp.csr_matrix((block.ravel(), (r.ravel(), c.ravel())), shape=(size, size))


@dataclass(eq=False)
class CoupledSystem:
    """alpha B + C1 on the global trial space, with the pieces kept apart.

    ``c1`` is the coupling block already scattered into global numbering
    (sparse), so that the matrix for another alpha is ``alpha B + c1``.
    """

    mesh: object
    dofs: DofMap
    alpha: float
    B: sp.csr_matrix
    gram: sp.csr_matrix
    c1: sp.csr_matrix
    rhs: np.ndarray
    bem: object
    mass: np.ndarray

    @property
    def matrix(self):
        return (self.alpha * self.B + self.c1).tocsc()

    def with_alpha(self, alpha):
        if not alpha > 0:
            raise ValueError("alpha must be positive")
        return CoupledSystem(self.mesh, self.dofs, float(alpha), self.B, self.gram, self.c1,
                             None, self.bem, self.mass)


def _trace_columns(mesh):
    nt = neumann_trace_dofs(mesh)
    dt = dirichlet_trace_dofs(mesh)
    return nt, dt


def global_c1(mesh, dofs, bem, mass):
    """C1 scattered into the global numbering (rows and columns of size dofs.size)."""
    nt, dt = _trace_columns(mesh)
    block = assemble_c1(bem, mass) * nt.signs[:, None]
    block[:, :nt.size] *= nt.signs[None, :]
    return _scatter(block, nt.dofs, np.concatenate([nt.dofs, dt.dofs]), dofs.size)


def trace_data(mesh, data, traces="interpolate"):
    """(Pi_D uD, Pi_N phiN): nodal and panel-midpoint values, or L2 projections."""
    if traces not in TRACE_MAPS:
        raise ValueError(f"traces must be one of {sorted(TRACE_MAPS)}, got {traces!r}")
    to_dirichlet, to_neumann = TRACE_MAPS[traces]
    return to_dirichlet(mesh, data.uD), to_neumann(mesh, data.phiN)


def assemble_rhs(mesh, dofs, bem, mass, data, load, alpha=1.0, traces="interpolate"):
    """alpha * FOSLS load + Neumann-trace scatter of -V Pi_N phiN + (K - M/2) Pi_D uD."""
    nt, _ = _trace_columns(mesh)
    ud, phi = trace_data(mesh, data, traces)
    boundary = -bem.V @ phi + (bem.K - 0.5 * mass) @ ud
    rhs = alpha * np.asarray(load, dtype=float).copy()
    np.add.at(rhs, nt.dofs, nt.signs * boundary)
    return rhs


def build_system(mesh, data=None, alpha=1.0, quad_order=3, bem_quad=None, quad_time=None,
                 traces="interpolate"):
    """Assemble every block of the coupled system on ``mesh``.

    ``quad_order`` and ``quad_time`` are passed to the FOSLS assembly;
    ``traces`` selects how uD and phiN enter the trace spaces.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    data = ProblemData() if data is None else data
    dofs = DofMap(mesh)
    fm = assemble_fosls(mesh, dofs, data, quad_order, quad_time)
    bem = assemble_bem(mesh, bem_quad or BemQuadrature())
    mass = boundary_mass_matrix(mesh)
    c1 = global_c1(mesh, dofs, bem, mass)
    rhs = assemble_rhs(mesh, dofs, bem, mass, data, fm.load, alpha, traces)
    return CoupledSystem(mesh, dofs, float(alpha), fm.B, fm.gram, c1, rhs, bem, mass)


def solve(system, rtol=1e-10):
    """Direct sparse solve; raises SolverError if the residual is not small."""
    level, alpha = system.mesh.level, system.alpha
    A = system.matrix
    b = system.rhs
    nb = np.linalg.norm(b)
    if nb == 0:
        return SolutionField.zeros(system.dofs)
    try:
        x = spla.splu(A, permc_spec="MMD_AT_PLUS_A").solve(b)
    except (RuntimeError, MemoryError, SystemError) as exc:
        # SuperLU reports exhausted memory as a SystemError
        raise SolverError(f"factorization failed at level {level}, alpha {alpha}: {exc}") from exc
    res = np.linalg.norm(A @ x - b) / nb
    if not np.isfinite(res) or res > rtol:
        raise SolverError(f"relative residual {res:.3e} at level {level}, alpha {alpha}")
    return SolutionField(x, system.dofs)


def _symmetric_part(system, alpha):
    A = alpha * system.B + system.c1
    return ((A + A.T) * 0.5).tocsc()


def min_generalized_eigenvalue(alpha, level=None, system=None):
    """Smallest lambda with A^s y = lambda U y, A^s the symmetric part of alpha B + C1.

    Small problems use a dense Cholesky-reduced symmetric solve; larger ones
    shift-invert Lanczos around ``EIG_SHIFT``, which lies below every value of
    interest so the nearest eigenvalue is the smallest one.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if system is None:
        if level is None:
            raise ValueError("give a level or an assembled system")
        system = build_system(build_unit_square_mesh(level))
    As = _symmetric_part(system, alpha)
    G = system.gram.tocsc()
    n = G.shape[0]
    if n <= DENSE_EIG_MAX_SIZE:
        try:
            w = sla.eigh(As.toarray(), G.toarray(), eigvals_only=True, subset_by_index=[0, 0])
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"Gram matrix factorization failed: {exc}") from exc
        return float(w[0])
    try:
        w = spla.eigsh(As, k=1, M=G, sigma=EIG_SHIFT, which="LM", return_eigenvectors=False,
                       tol=1e-10)
    except (RuntimeError, spla.ArpackError) as exc:
        raise SolverError(f"shift-invert eigensolve failed: {exc}") from exc
    return float(w[0])


def coercivity_study(levels, alphas):
    """Rows (N_h, alpha, lambda_min), one assembly per level."""
    rows = []
    for level in levels:
        system = build_system(build_unit_square_mesh(level))
        for a in alphas:
            rows.append((system.mesh.n_nodes, float(a), min_generalized_eigenvalue(a, system=system)))
    return rows
