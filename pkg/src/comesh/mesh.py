"""Mesh data model, validation, and synthetic well-shaped mesh generators.

A mesh here is an undirected weighted graph embedded in R^d.  Adjacency is
kept in CSR form with each edge stored twice, once per endpoint, so degree
scans and neighbor lookups are cheap slices.  Instances are frozen after
construction and safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class MeshError(ValueError):
    """Raised for structurally invalid mesh inputs."""


@dataclass(frozen=True)
class VertexRec:
    """One vertex: stable index, d coordinates, and a scalar weight."""

    index: int
    coords: np.ndarray
    weight: float


@dataclass(frozen=True)
class SimplexQuality:
    """Shape quality of one simplex: smallest enclosing over largest inscribed ball."""

    circum_radius: float
    in_radius: float

    @property
    def aspect(self) -> float:
        if self.in_radius <= 0.0:
            return math.inf
        return self.circum_radius / self.in_radius


class Mesh:
    """Undirected weighted graph with vertex coordinates.

    The raw constructor trusts its CSR arrays; use :meth:`from_edges` to
    build safely from an undirected edge list, and :func:`validate_mesh`
    to audit an instance of unknown provenance.
    """

    def __init__(self, dim, coords, weights, indptr, indices, eweights):
        coords = np.ascontiguousarray(coords, dtype=np.float64)
        weights = np.ascontiguousarray(weights, dtype=np.float64)
        indptr = np.ascontiguousarray(indptr, dtype=np.int64)
        indices = np.ascontiguousarray(indices, dtype=np.int64)
        eweights = np.ascontiguousarray(eweights, dtype=np.float64)
        if coords.ndim != 2 or coords.shape[1] != dim:
            raise MeshError(f"coords must be (n, {dim}), got {coords.shape}")
        n = coords.shape[0]
        if weights.shape != (n,):
            raise MeshError("one weight per vertex required")
        if indptr.shape != (n + 1,) or indptr[0] != 0 or indptr[-1] != len(indices):
            raise MeshError("malformed CSR index pointer")
        if len(eweights) != len(indices):
            raise MeshError("one weight per half-edge required")
        self.dim = int(dim)
        self.coords = coords
        self.weights = weights
        self.indptr = indptr
        self.indices = indices
        self.eweights = eweights
        for arr in (coords, weights, indptr, indices, eweights):
            arr.flags.writeable = False
        self._edge_arrays = None

    @classmethod
    def from_edges(cls, dim, coords, edges, weights=None) -> "Mesh":
        """Build a mesh from an undirected edge list of (u, v, weight) triples.

        Each listed edge is materialized in both adjacency rows.  Vertex
        weights default to index+1 so that update results are asymmetric
        and ordering bugs surface in tests.
        """
        coords = np.asarray(coords, dtype=np.float64)
        n = coords.shape[0]
        if weights is None:
            weights = np.arange(1, n + 1, dtype=np.float64)
        if isinstance(edges, np.ndarray) and edges.ndim == 2:
            eu = edges[:, 0].astype(np.int64)
            ev = edges[:, 1].astype(np.int64)
            ew = edges[:, 2].astype(np.float64)
        else:
            eu = np.asarray([e[0] for e in edges], dtype=np.int64)
            ev = np.asarray([e[1] for e in edges], dtype=np.int64)
            ew = np.asarray([e[2] for e in edges], dtype=np.float64)
        if len(eu) and (eu.min() < 0 or ev.min() < 0 or max(eu.max(), ev.max()) >= n):
            raise MeshError("edge endpoint out of range")
        if np.any(eu == ev):
            raise MeshError("self-loops are not allowed")
        if np.any(ew <= 0.0) or not np.all(np.isfinite(ew)):
            raise MeshError("edge weights must be positive and finite")
        lo, hi = np.minimum(eu, ev), np.maximum(eu, ev)
        order = np.lexsort((hi, lo))
        lo, hi, ew = lo[order], hi[order], ew[order]
        dup = (lo[1:] == lo[:-1]) & (hi[1:] == hi[:-1])
        if np.any(dup):
            raise MeshError("duplicate undirected edge")
        du = np.concatenate([lo, hi])
        dv = np.concatenate([hi, lo])
        dw = np.concatenate([ew, ew])
        order = np.lexsort((dv, du))
        du, dv, dw = du[order], dv[order], dw[order]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(du, minlength=n), out=indptr[1:])
        return cls(dim, coords, weights, indptr, dv, dw)

    # -- basic queries ----------------------------------------------------

    @property
    def n_vertices(self) -> int:
        return self.coords.shape[0]

    @property
    def n_edges(self) -> int:
        return len(self.indices) // 2

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    @property
    def max_degree(self) -> int:
        if self.n_vertices == 0:
            return 0
        return int(self.degrees.max(initial=0))

    def degree(self, v: int) -> int:
        return int(self.indptr[v + 1] - self.indptr[v])

    def neighbors(self, v: int):
        a, b = self.indptr[v], self.indptr[v + 1]
        return self.indices[a:b], self.eweights[a:b]

    def vertex(self, v: int) -> VertexRec:
        return VertexRec(int(v), self.coords[v], float(self.weights[v]))

    def half_edge_arrays(self):
        """All directed half-edges as flat (u, v, w) arrays in CSR order."""
        u = np.repeat(np.arange(self.n_vertices, dtype=np.int64), self.degrees)
        return u, self.indices, self.eweights

    def edge_arrays(self):
        """Undirected edges as (u, v, w) arrays with u < v, cached."""
        if self._edge_arrays is None:
            u, v, w = self.half_edge_arrays()
            keep = u < v
            self._edge_arrays = (u[keep], v[keep], w[keep])
        return self._edge_arrays

    def edges(self):
        """Iterate undirected edges as (u, v, weight) with u < v."""
        eu, ev, ew = self.edge_arrays()
        for u, v, w in zip(eu.tolist(), ev.tolist(), ew.tolist()):
            yield u, v, w


def meshes_equal(a: Mesh, b: Mesh) -> bool:
    """Exact structural equality: same dim, coords, weights, and CSR arrays."""
    return (
        a.dim == b.dim
        and a.coords.shape == b.coords.shape
        and np.array_equal(a.coords, b.coords)
        and np.array_equal(a.weights, b.weights)
        and np.array_equal(a.indptr, b.indptr)
        and np.array_equal(a.indices, b.indices)
        and np.array_equal(a.eweights, b.eweights)
    )


@dataclass
class ValidationReport:
    valid: bool
    n_vertices: int
    n_edges: int
    max_degree: int
    issues: list = field(default_factory=list)


def validate_mesh(mesh: Mesh) -> ValidationReport:
    """Audit mesh invariants; failures are reported, never raised.

    Checks edge symmetry (each half-edge has exactly one mirror with equal
    weight), positive edge weights, finite coordinates, absence of
    self-loops and duplicate edges, and records the degree bound.
    """
    issues = []
    n = mesh.n_vertices
    if not np.all(np.isfinite(mesh.coords)):
        issues.append("non-finite vertex coordinate")
    if not np.all(np.isfinite(mesh.weights)):
        issues.append("non-finite vertex weight")
    u, v, w = mesh.half_edge_arrays()
    if len(w) and (np.any(w <= 0.0) or not np.all(np.isfinite(w))):
        issues.append("non-positive or non-finite edge weight")
    if np.any(u == v):
        issues.append("self-loop present")
    order = np.lexsort((v, u))
    du, dv, dw = u[order], v[order], w[order]
    if len(du) > 1:
        dup = (du[1:] == du[:-1]) & (dv[1:] == dv[:-1])
        if np.any(dup):
            issues.append("duplicate edge in adjacency")
    # symmetry: the multiset of (u,v,w) must equal the multiset of (v,u,w)
    order2 = np.lexsort((du, dv))
    if not (
        np.array_equal(du, dv[order2])
        and np.array_equal(dv, du[order2])
        and np.array_equal(dw, dw[order2])
    ):
        issues.append("asymmetric edge storage")
    half = len(u)
    if half % 2 != 0:
        issues.append("odd half-edge count")
    return ValidationReport(
        valid=not issues,
        n_vertices=n,
        n_edges=half // 2,
        max_degree=mesh.max_degree,
        issues=issues,
    )


# -- simplex quality ------------------------------------------------------


def triangle_quality(pts) -> SimplexQuality:
    pts = np.asarray(pts, dtype=np.float64)
    a = float(np.linalg.norm(pts[1] - pts[2]))
    b = float(np.linalg.norm(pts[0] - pts[2]))
    c = float(np.linalg.norm(pts[0] - pts[1]))
    s = 0.5 * (a + b + c)
    area_sq = max(s * (s - a) * (s - b) * (s - c), 0.0)
    area = math.sqrt(area_sq)
    if area == 0.0:
        return SimplexQuality(math.inf, 0.0)
    return SimplexQuality(a * b * c / (4.0 * area), area / s)


def tet_quality(pts) -> SimplexQuality:
    pts = np.asarray(pts, dtype=np.float64)
    e = pts[1:] - pts[0]
    vol = abs(float(np.linalg.det(e))) / 6.0
    faces = [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)]
    area = 0.0
    for i, j, k in faces:
        area += 0.5 * float(np.linalg.norm(np.cross(pts[j] - pts[i], pts[k] - pts[i])))
    if vol == 0.0 or area == 0.0:
        return SimplexQuality(math.inf, 0.0)
    rhs = 0.5 * (np.sum(pts[1:] ** 2, axis=1) - np.sum(pts[0] ** 2))
    center = np.linalg.solve(e, rhs)
    return SimplexQuality(float(np.linalg.norm(center - pts[0])), 3.0 * vol / area)


# -- generators -----------------------------------------------------------


def grid2d_triangles(n: int) -> np.ndarray:
    """Vertex index triples of the triangles gen_grid2d(n) is built from."""
    tris = []
    for r in range(n - 1):
        for c in range(n - 1):
            v00 = r * n + c
            v01 = r * n + c + 1
            v10 = (r + 1) * n + c
            v11 = (r + 1) * n + c + 1
            if (r + c) % 2 == 0:
                tris.append((v00, v10, v11))
                tris.append((v00, v01, v11))
            else:
                tris.append((v00, v01, v10))
                tris.append((v01, v10, v11))
    return np.asarray(tris, dtype=np.int64)


def grid2d_coords(n: int, jitter: float = 0.0, seed: int = 0) -> np.ndarray:
    cols, rows = np.meshgrid(np.arange(n), np.arange(n))
    coords = np.column_stack([cols.ravel(), rows.ravel()]).astype(np.float64)
    if jitter > 0.0:
        # displacement clamped to a disk of 3/4 the nominal jitter: keeps
        # every triangle orientation-safe (radius < half the min altitude)
        # and holds the aspect envelope of ~10 at the top of the range
        rng = np.random.default_rng(seed)
        theta = rng.uniform(0.0, 2.0 * math.pi, size=n * n)
        rad = 0.75 * jitter * np.sqrt(rng.uniform(0.0, 1.0, size=n * n))
        coords[:, 0] += rad * np.cos(theta)
        coords[:, 1] += rad * np.sin(theta)
    return coords


def gen_grid2d(n: int, jitter: float = 0.0, seed: int = 0) -> Mesh:
    """n x n triangulated grid; unit cells split by alternating diagonals.

    Diagonal direction alternates with cell parity (criss-cross pattern),
    which caps triangle aspect at sqrt(2)+1 on the unjittered grid and
    pins the degree bound at 8 for all n >= 3.  Deterministic given
    (n, jitter, seed); all edge weights are 1.
    """
    if n < 2:
        raise MeshError("grid2d needs n >= 2")
    if not (0.0 <= jitter < 0.3):
        raise MeshError("jitter must lie in [0, 0.3)")
    coords = grid2d_coords(n, jitter, seed)
    vid = np.arange(n * n, dtype=np.int64).reshape(n, n)
    horiz = np.column_stack([vid[:, :-1].ravel(), vid[:, 1:].ravel()])
    vert = np.column_stack([vid[:-1, :].ravel(), vid[1:, :].ravel()])
    rr, cc = np.meshgrid(np.arange(n - 1), np.arange(n - 1), indexing="ij")
    even = ((rr + cc) % 2 == 0).ravel()
    diag_a = np.column_stack([vid[:-1, :-1].ravel(), vid[1:, 1:].ravel()])
    diag_b = np.column_stack([vid[:-1, 1:].ravel(), vid[1:, :-1].ravel()])
    diag = np.where(even[:, None], diag_a, diag_b)
    pairs = np.concatenate([horiz, vert, diag])
    weights_col = np.ones((len(pairs), 1))
    return Mesh.from_edges(2, coords, np.concatenate([pairs, weights_col], axis=1))


_KUHN_TETS = [
    ((0, 0, 0), (1, 0, 0), (1, 1, 0), (1, 1, 1)),
    ((0, 0, 0), (1, 0, 0), (1, 0, 1), (1, 1, 1)),
    ((0, 0, 0), (0, 1, 0), (1, 1, 0), (1, 1, 1)),
    ((0, 0, 0), (0, 1, 0), (0, 1, 1), (1, 1, 1)),
    ((0, 0, 0), (0, 0, 1), (1, 0, 1), (1, 1, 1)),
    ((0, 0, 0), (0, 0, 1), (0, 1, 1), (1, 1, 1)),
]


def grid3d_tetrahedra(n: int) -> np.ndarray:
    """Vertex index quadruples of the tetrahedra gen_grid3d(n) is built from.

    Each unit cube is cut into the six tetrahedra around its main diagonal;
    cube-local axes are mirrored by base-coordinate parity so shared faces
    conform and every cube diagonal runs between the cube's all-even and
    all-odd corners.
    """

    def vid(x, y, z):
        return (x * n + y) * n + z

    tets = []
    for bx in range(n - 1):
        for by in range(n - 1):
            for bz in range(n - 1):
                base = (bx, by, bz)
                for tet in _KUHN_TETS:
                    quad = []
                    for local in tet:
                        g = [
                            base[i] + (local[i] if base[i] % 2 == 0 else 1 - local[i])
                            for i in range(3)
                        ]
                        quad.append(vid(*g))
                    tets.append(tuple(quad))
    return np.asarray(tets, dtype=np.int64)


def gen_grid3d(n: int) -> Mesh:
    """n x n x n grid, each unit cube subdivided into 6 tetrahedra.

    Bounded aspect ratio by construction; edge weights 1; degree bound 26
    once the grid has interior vertices.
    """
    if n < 2:
        raise MeshError("grid3d needs n >= 2")
    xs, ys, zs = np.meshgrid(np.arange(n), np.arange(n), np.arange(n), indexing="ij")
    coords = np.column_stack([xs.ravel(), ys.ravel(), zs.ravel()]).astype(np.float64)
    pairs = set()
    for quad in grid3d_tetrahedra(n):
        q = quad.tolist()
        for i in range(4):
            for j in range(i + 1, 4):
                a, b = q[i], q[j]
                pairs.add((a, b) if a < b else (b, a))
    edges = [(u, v, 1.0) for u, v in sorted(pairs)]
    return Mesh.from_edges(3, coords, edges)
