"""Prismatic space-time meshes of Q = I x Omega and their lateral boundary."""

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np


@dataclass(frozen=True, eq=False)
class SpatialMesh:
    """Conforming triangulation of a polygon.

    Triangles are stored counter-clockwise. Edge ``e`` joins ``edges[e, 0] <
    edges[e, 1]``; its reference normal is the tangent rotated clockwise,
    which is the outward normal of any triangle traversing the edge from the
    lower to the higher vertex index. ``tri_edges[k, i]`` is the edge opposite
    local vertex ``i`` and ``tri_edge_signs[k, i]`` is +1 when the reference
    normal of that edge points out of triangle ``k``.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray
    tri_edges: np.ndarray
    tri_edge_signs: np.ndarray
    edge_normals: np.ndarray
    edge_lengths: np.ndarray
    areas: np.ndarray
    boundary_edges: np.ndarray
    boundary_signs: np.ndarray
    boundary_vertices: np.ndarray
    grid_n: int | None = None

    @classmethod
    def from_triangles(cls, vertices, triangles, grid_n=None):
        vertices = np.ascontiguousarray(vertices, dtype=float)
        triangles = np.array(triangles, dtype=np.int64)
        p = vertices[triangles]
        areas = 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                       - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))
        flip = areas < 0
        if np.any(areas == 0):
            raise ValueError("degenerate triangle with zero area")
        triangles[flip] = triangles[flip][:, [0, 2, 1]]
        areas = np.abs(areas)

        # local edge i is opposite local vertex i, traversed ccw as (i+1, i+2)
        a = triangles[:, [1, 2, 0]]
        b = triangles[:, [2, 0, 1]]
        lo = np.minimum(a, b)
        hi = np.maximum(a, b)
        keys = np.stack([lo.ravel(), hi.ravel()], axis=1)
        edges, inverse, counts = np.unique(keys, axis=0, return_inverse=True,
                                           return_counts=True)
        inverse = inverse.ravel()
        if np.any(counts > 2):
            raise ValueError("non-manifold mesh: an edge is shared by more than two triangles")
        tri_edges = inverse.reshape(-1, 3)
        tri_edge_signs = np.where(a < b, 1, -1)

        tangent = vertices[edges[:, 1]] - vertices[edges[:, 0]]
        lengths = np.hypot(tangent[:, 0], tangent[:, 1])
        normals = np.stack([tangent[:, 1], -tangent[:, 0]], axis=1) / lengths[:, None]

        boundary = np.flatnonzero(counts == 1)
        owner = np.zeros(len(edges), dtype=np.int64)
        owner[inverse] = tri_edge_signs.ravel()
        return cls(
            vertices=vertices,
            triangles=triangles,
            edges=edges,
            tri_edges=tri_edges,
            tri_edge_signs=tri_edge_signs,
            edge_normals=normals,
            edge_lengths=lengths,
            areas=areas,
            boundary_edges=boundary,
            boundary_signs=owner[boundary],
            boundary_vertices=np.unique(edges[boundary]),
            grid_n=grid_n,
        )

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @property
    def h(self):
        return float(self.edge_lengths.max())

    def outward_normals(self):
        """Outward unit normals of the boundary edges."""
        return self.boundary_signs[:, None] * self.edge_normals[self.boundary_edges]

    def locate(self, x):
        """Index of a triangle containing the point ``x`` (closed triangles)."""
        x = np.asarray(x, dtype=float)
        if self.grid_n is not None:
            n = self.grid_n
            tol = 1e-12
            if np.any(x < -tol) or np.any(x > 1 + tol):
                raise ValueError(f"point {x} lies outside the spatial domain")
            i, j = np.minimum(np.floor(np.clip(x, 0, 1) * n).astype(int), n - 1)
            xi, eta = x[0] * n - i, x[1] * n - j
            return 2 * (i + n * j) + int(xi + eta > 1.0)
        lam = self.barycentric(np.arange(self.n_triangles), x)
        inside = np.flatnonzero(np.all(lam >= -1e-12, axis=1))
        if len(inside) == 0:
            raise ValueError(f"point {x} lies outside the spatial domain")
        return int(inside[0])

    def barycentric(self, tri, x):
        """Barycentric coordinates of ``x`` in the triangles ``tri``."""
        p = self.vertices[self.triangles[tri]]
        d1 = p[..., 1, :] - p[..., 0, :]
        d2 = p[..., 2, :] - p[..., 0, :]
        r = np.asarray(x) - p[..., 0, :]
        det = d1[..., 0] * d2[..., 1] - d1[..., 1] * d2[..., 0]
        l1 = (r[..., 0] * d2[..., 1] - r[..., 1] * d2[..., 0]) / det
        l2 = (d1[..., 0] * r[..., 1] - d1[..., 1] * r[..., 0]) / det
        return np.stack([1.0 - l1 - l2, l1, l2], axis=-1)

    def contains(self, x):
        try:
            self.locate(x)
        except ValueError:
            return False
        return True


@dataclass(frozen=True, eq=False)
class TimePartition:
    breakpoints: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.breakpoints, dtype=float)
        if t.ndim != 1 or len(t) < 2:
            raise ValueError("a time partition needs at least one interval")
        if np.any(np.diff(t) <= 0):
            raise ValueError("time breakpoints must be strictly increasing")
        object.__setattr__(self, "breakpoints", t)

    @classmethod
    def uniform(cls, T, M):
        return cls(np.linspace(0.0, T, M + 1))

    @property
    def M(self):
        return len(self.breakpoints) - 1

    @property
    def T(self):
        return float(self.breakpoints[-1])

    @property
    def steps(self):
        return np.diff(self.breakpoints)

    @property
    def is_uniform(self):
        h = self.steps
        return bool(np.allclose(h, h[0], rtol=1e-12, atol=0))

    def locate(self, t):
        """Index of the interval containing ``t`` (closed on both ends)."""
        tb = self.breakpoints
        if t < tb[0] - 1e-12 or t > tb[-1] + 1e-12:
            raise ValueError(f"time {t} lies outside [{tb[0]}, {tb[-1]}]")
        return int(min(max(np.searchsorted(tb, t, side="right") - 1, 0), self.M - 1))


@dataclass(frozen=True, eq=False)
class SpaceTimeMesh:
    time: TimePartition
    space: SpatialMesh
    level: int | None = field(default=None)

    @property
    def n_prisms(self):
        return self.time.M * self.space.n_triangles

    @property
    def n_nodes(self):
        return (self.time.M + 1) * self.space.n_vertices

    @property
    def n_panels(self):
        return self.time.M * len(self.space.boundary_edges)


class Panel(NamedTuple):
    slab: int
    edge: int
    boundary_index: int
    p0: np.ndarray
    p1: np.ndarray
    normal: np.ndarray
    length: float
    t0: float
    t1: float


def build_unit_square_mesh(level, T=1.0):
    """Uniform mesh of (0, T) x (0, 1)^2 with 2**level - 1 cells per direction.

    Each square is cut along its northwest-southeast diagonal.
    """
    if int(level) != level or level < 1:
        raise ValueError(f"refinement level must be a positive integer, got {level}")
    n = 2 ** int(level) - 1
    s = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(s, s, indexing="xy")
    vertices = np.stack([X.ravel(), Y.ravel()], axis=1)
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    sw = (i + (n + 1) * j).ravel()
    se, nw, ne = sw + 1, sw + n + 1, sw + n + 2
    tris = np.empty((2 * n * n, 3), dtype=np.int64)
    tris[0::2] = np.stack([sw, se, nw], axis=1)
    tris[1::2] = np.stack([se, ne, nw], axis=1)
    space = SpatialMesh.from_triangles(vertices, tris, grid_n=n)
    return SpaceTimeMesh(TimePartition.uniform(T, n), space, level=int(level))


def lateral_panels(mesh):
    """Panels J x e of the lateral boundary, time-major."""
    sp = mesh.space
    tb = mesh.time.breakpoints
    normals = sp.outward_normals()
    out = []
    for m in range(mesh.time.M):
        for j, e in enumerate(sp.boundary_edges):
            a, b = sp.edges[e]
            out.append(Panel(m, int(e), j, sp.vertices[a], sp.vertices[b], normals[j],
                             float(sp.edge_lengths[e]), float(tb[m]), float(tb[m + 1])))
    return out


def write_mesh(mesh, stream):
    """Plain-text dump of a space-time mesh, for debugging."""
    sp = mesh.space
    stream.write(f"time {mesh.time.M}\n")
    stream.write(" ".join(f"{t:.17g}" for t in mesh.time.breakpoints) + "\n")
    stream.write(f"vertices {sp.n_vertices}\n")
    for x, y in sp.vertices:
        stream.write(f"{x:.17g} {y:.17g}\n")
    stream.write(f"triangles {sp.n_triangles}\n")
    for tri in sp.triangles:
        stream.write(" ".join(map(str, tri)) + "\n")
    stream.write(f"edges {sp.n_edges}\n")
    boundary = set(sp.boundary_edges.tolist())
    for e, (a, b) in enumerate(sp.edges):
        stream.write(f"{a} {b} {int(e in boundary)}\n")
