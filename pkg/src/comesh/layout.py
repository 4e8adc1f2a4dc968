"""Vertex orderings and the relabel/sort pipeline that materializes them.

A layout is a bijection from old vertex indices to new array positions.
The good ones come from the in-order leaf traversal of a balanced
decomposition tree; a random bijection serves as the locality baseline.
Relabeling a mesh is done with exactly two array scans, two sorts, and
one re-emission of the vertex records.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .decomp import DecompTree, build_decomposition_tree
from .mesh import Mesh
from .separator import SeparatorConfig


@dataclass(frozen=True)
class LayoutPermutation:
    """Bijection old vertex index -> new array position."""

    new_position: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.new_position, dtype=np.int64)
        object.__setattr__(self, "new_position", pos)
        n = len(pos)
        seen = np.zeros(n, dtype=bool)
        valid = (pos >= 0) & (pos < n)
        if not valid.all():
            raise ValueError("positions out of range")
        seen[pos] = True
        if not seen.all():
            raise ValueError("new_position is not a bijection")
        pos.flags.writeable = False

    def __len__(self) -> int:
        return len(self.new_position)

    def inverse(self) -> "LayoutPermutation":
        inv = np.empty(len(self.new_position), dtype=np.int64)
        inv[self.new_position] = np.arange(len(self.new_position))
        return LayoutPermutation(inv)

    @classmethod
    def identity(cls, n: int) -> "LayoutPermutation":
        return cls(np.arange(n, dtype=np.int64))

    @classmethod
    def from_order(cls, order) -> "LayoutPermutation":
        """Permutation placing order[i] at position i."""
        order = np.asarray(order, dtype=np.int64)
        pos = np.empty(len(order), dtype=np.int64)
        pos[order] = np.arange(len(order))
        return cls(pos)


def leaf_order(tree) -> LayoutPermutation:
    """Position of each vertex = rank of its leaf in the tree's leaf array."""
    from .relax import RelaxTree

    if isinstance(tree, RelaxTree) and any(leaf.length > 1 for leaf in tree.leaves):
        raise ValueError("tree has multi-vertex leaves; refine it before laying out")
    return LayoutPermutation.from_order(tree.leaf_array)


def random_permutation_layout(mesh: Mesh, seed=0) -> LayoutPermutation:
    """Uniform random bijection; deterministic given the seed."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return LayoutPermutation(rng.permutation(mesh.n_vertices).astype(np.int64))


def relabel_mesh(mesh: Mesh, perm: LayoutPermutation, _trace: Optional[list] = None) -> Mesh:
    """Materialize a layout: rename endpoints by scans, regroup by sorts.

    The half-edge list is relabeled on its first endpoint by a scan,
    sorted by second endpoint, relabeled on the second endpoint by another
    scan, and finally sorted by (first, second); vertex records are then
    re-emitted in the new order.
    """
    if len(perm) != mesh.n_vertices:
        raise ValueError("permutation size does not match the mesh")
    p = perm.new_position
    u, v, w = mesh.half_edge_arrays()

    u = p[u]
    if _trace is not None:
        _trace.append("scan-relabel-first")

    order = np.argsort(v, kind="stable")
    u, v, w = u[order], v[order], w[order]
    if _trace is not None:
        _trace.append("sort-by-second")

    v = p[v]
    if _trace is not None:
        _trace.append("scan-relabel-second")

    order = np.lexsort((v, u))
    u, v, w = u[order], v[order], w[order]
    if _trace is not None:
        _trace.append("sort-by-first")

    n = mesh.n_vertices
    coords = np.empty_like(mesh.coords)
    weights = np.empty_like(mesh.weights)
    coords[p] = mesh.coords
    weights[p] = mesh.weights
    if _trace is not None:
        _trace.append("re-emit-vertices")

    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(u, minlength=n), out=indptr[1:])
    return Mesh(mesh.dim, coords, weights, indptr, v, w)


def cache_oblivious_layout(
    mesh: Mesh,
    algo: str = "fb",
    cfg: Optional[SeparatorConfig] = None,
    rng=None,
):
    """Compute a locality-preserving layout and the relabeled mesh.

    algo "fb" orders by a fully-balanced tree, "rb" by a relax-balanced
    tree, and "geo" by a plain separator tree (no rebalancing; exposed for
    comparison).  Returns (relabeled mesh, permutation).
    """
    cfg = cfg or SeparatorConfig()
    tree = layout_tree(mesh, algo, cfg, rng)
    perm = leaf_order(tree)
    return relabel_mesh(mesh, perm), perm


def layout_tree(mesh: Mesh, algo: str, cfg: SeparatorConfig, rng=None) -> DecompTree:
    from .balanced import build_fb_tree
    from .relax import build_rb_tree

    if algo == "fb":
        return build_fb_tree(mesh, cfg, rng)
    if algo == "rb":
        return build_rb_tree(mesh, cfg, rng=rng)
    if algo == "geo":
        return build_decomposition_tree(mesh, cfg, rng=rng)
    raise ValueError(f"unknown layout algorithm {algo!r}")


@dataclass
class StatsReport:
    """Distribution of |pos(u) - pos(v)| over the edges of a laid-out mesh."""

    spans: np.ndarray

    @property
    def mean(self) -> float:
        return float(self.spans.mean()) if len(self.spans) else 0.0

    @property
    def median(self) -> float:
        return float(np.median(self.spans)) if len(self.spans) else 0.0

    @property
    def p99(self) -> float:
        return float(np.percentile(self.spans, 99)) if len(self.spans) else 0.0

    def histogram(self):
        """(span, count) pairs for every occurring span, ascending."""
        values, counts = np.unique(self.spans, return_counts=True)
        return list(zip(values.tolist(), counts.tolist()))


def layout_stats(mesh: Mesh) -> StatsReport:
    """Edge-span statistics of the mesh's current vertex order."""
    eu, ev, _ = mesh.edge_arrays()
    return StatsReport(spans=np.abs(eu - ev))
