"""Necklace bisection and fully-balanced partitions and trees.

A fully-balanced split of a subgraph equalizes three things at once: the
two sides' vertex counts (within one), their outgoing-edge counts (within
2b+1 for degree bound b), and it cuts few edges.  It is found by ordering
the subgraph's vertices with an ordinary decomposition tree, interleaving
a red marker per outgoing edge behind each vertex's blue marker, and
sliding a half-length window over the resulting two-colored array until
the blues split evenly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .decomp import ROOT, BitId, DecompTree, _BuildState
from .mesh import Mesh
from .separator import SeparatorConfig, _induced_edges


@dataclass(frozen=True)
class Window:
    """Contiguous, non-wrapping slice of a red-blue array."""

    start: int
    length: int

    @property
    def stop(self) -> int:
        return self.start + self.length


class RedBlueArray:
    """Blue marker per vertex in leaf order, red markers for outgoing edges.

    The reds for a vertex immediately follow its blue.  Stored compactly
    as the vertex order plus per-vertex red counts; element positions are
    derived, not materialized.
    """

    def __init__(self, vertices, red_counts):
        self.vertices = np.asarray(vertices, dtype=np.int64)
        self.red_counts = np.asarray(red_counts, dtype=np.int64)
        if self.red_counts.shape != self.vertices.shape:
            raise ValueError("one red count per blue required")
        if np.any(self.red_counts < 0):
            raise ValueError("red counts must be nonnegative")
        # element index of each blue: blues sit after all earlier elements
        shifted = np.concatenate([[0], self.red_counts[:-1]])
        self.blue_positions = np.arange(len(self.vertices)) + np.cumsum(shifted)

    @property
    def blue_count(self) -> int:
        return len(self.vertices)

    @property
    def red_count(self) -> int:
        return int(self.red_counts.sum())

    @property
    def total(self) -> int:
        return self.blue_count + self.red_count

    def is_blue(self, i: int) -> bool:
        j = np.searchsorted(self.blue_positions, i)
        return j < len(self.blue_positions) and self.blue_positions[j] == i

    def kinds(self) -> np.ndarray:
        """Materialized element colors (True = blue); for inspection only."""
        out = np.zeros(self.total, dtype=bool)
        out[self.blue_positions] = True
        return out

    def blues_in(self, window: Window):
        """Half-open range of blue indices whose elements fall in the window."""
        lo = int(np.searchsorted(self.blue_positions, window.start))
        hi = int(np.searchsorted(self.blue_positions, window.stop))
        return lo, hi


def _first_balanced_start(blue_prefix, total, blue_count):
    """First window start whose ceil(n/2)-length slice splits blues evenly."""
    length = (total + 1) // 2
    counts = blue_prefix[length:] - blue_prefix[: total - length + 1]
    lo_t, hi_t = blue_count // 2, (blue_count + 1) // 2
    ok = (counts == lo_t) | (counts == hi_t)
    idx = int(np.argmax(ok))
    if not ok[idx]:
        raise AssertionError("no balanced window exists; discrete continuity broken")
    return idx, length


def necklace_bisect(arr) -> Window:
    """Window of length ceil(n/2) holding half of the blues to within one.

    Accepts a RedBlueArray or a raw boolean color sequence (True = blue).
    Existence follows from a discrete continuity argument: sliding the
    window one step changes its blue count by at most one, and the first
    and last windows bracket half the blues.  The first qualifying start
    wins.  The red count of the returned window then sits within two of
    half the reds, by arithmetic on the fixed window length.
    """
    if isinstance(arr, RedBlueArray):
        total, blues = arr.total, arr.blue_count
        prefix = np.zeros(total + 1, dtype=np.int64)
        np.add.at(prefix, arr.blue_positions + 1, 1)
        np.cumsum(prefix, out=prefix)
    else:
        colors = np.asarray(arr, dtype=bool)
        total, blues = len(colors), int(np.count_nonzero(colors))
        prefix = np.concatenate([[0], np.cumsum(colors)])
    if total == 0:
        raise ValueError("empty array")
    start, length = _first_balanced_start(prefix, total, blues)
    return Window(start, length)


def build_red_blue_array(tree_or_order, outer_edges) -> RedBlueArray:
    """Red-blue array over a leaf order.

    outer_edges gives, per vertex (indexed by global vertex id), the count
    of edges leaving the subgraph; that many reds follow the vertex's blue.
    """
    if isinstance(tree_or_order, DecompTree):
        order = tree_or_order.leaf_array
    else:
        order = np.asarray(tree_or_order, dtype=np.int64)
    counts = np.asarray(outer_edges, dtype=np.int64)
    return RedBlueArray(order, counts[order])


def outer_edge_counts(mesh: Mesh, part: np.ndarray) -> np.ndarray:
    """Per-vertex count of edges from `part` to the rest of the mesh.

    Returned as a full-length array indexed by global vertex id; entries
    outside `part` are zero.
    """
    part = np.asarray(part, dtype=np.int64)
    inside = np.zeros(mesh.n_vertices, dtype=bool)
    inside[part] = True
    u, v, _ = mesh.half_edge_arrays()
    leaving = inside[u] & ~inside[v]
    out = np.zeros(mesh.n_vertices, dtype=np.int64)
    np.add.at(out, u[leaving], 1)
    return out


@dataclass
class FBPartition:
    """A fully-balanced split of a subgraph.

    Sides differ by at most one vertex and by at most 2b+1 outgoing
    edges; crossing_edges is the exact set of induced edges between the
    sides.
    """

    left_vertices: np.ndarray
    right_vertices: np.ndarray
    crossing_edges: list
    outgoing_left: int
    outgoing_right: int

    @property
    def size_diff(self) -> int:
        return abs(len(self.left_vertices) - len(self.right_vertices))

    @property
    def outgoing_diff(self) -> int:
        return abs(self.outgoing_left - self.outgoing_right)


def window_crossing_factor(cfg: SeparatorConfig, dim: int) -> float:
    """Ratio of the necklace-split crossing cap to the one-separator cap."""
    beta_a = cfg.beta(dim) ** cfg.alpha(dim)
    return (1.0 + beta_a) / (1.0 - beta_a)


def crossing_bound(cfg: SeparatorConfig, dim: int, n: int) -> float:
    """Closed-form cap on edges cut by a necklace split of an n-vertex subgraph.

    Both window cuts sever one root-to-leaf path of crossing sets whose
    sizes form a geometric series; the root term is shared.
    """
    return cfg.crossing_limit(dim, n) * window_crossing_factor(cfg, dim)


def split_by_blue_range(mesh: Mesh, arr: RedBlueArray, lo: int, hi: int) -> FBPartition:
    """Assemble the partition whose left side is the blues with index in [lo, hi)."""
    left = arr.vertices[lo:hi]
    right = np.concatenate([arr.vertices[:lo], arr.vertices[hi:]])
    outgoing_left = int(arr.red_counts[lo:hi].sum())
    outgoing_right = arr.red_count - outgoing_left
    part = arr.vertices
    eu, ev = _induced_edges(mesh, part)
    side = np.zeros(mesh.n_vertices, dtype=np.int8)
    side[right] = 1
    cross = side[eu] != side[ev]
    crossing = list(zip(eu[cross].tolist(), ev[cross].tolist()))
    return FBPartition(
        left_vertices=left,
        right_vertices=right,
        crossing_edges=crossing,
        outgoing_left=outgoing_left,
        outgoing_right=outgoing_right,
    )


def fully_balanced_partition(
    mesh: Mesh,
    part: Optional[np.ndarray] = None,
    cfg: Optional[SeparatorConfig] = None,
    rng=None,
) -> FBPartition:
    """Fully-balanced split of a mesh subset.

    Steps: order the subset by a plain decomposition tree; build the
    red-blue array from the subset's outgoing-edge counts; take the first
    balanced necklace window as the left side; rescan edges for the exact
    crossing set and outgoing totals.
    """
    from .decomp import build_decomposition_tree

    cfg = cfg or SeparatorConfig()
    if part is None:
        part = np.arange(mesh.n_vertices, dtype=np.int64)
    part = np.asarray(part, dtype=np.int64)
    if len(part) < 2:
        raise ValueError("cannot partition fewer than 2 vertices")
    tree = build_decomposition_tree(mesh, cfg, part, rng)
    counts = outer_edge_counts(mesh, part)
    arr = build_red_blue_array(tree, counts)
    win = necklace_bisect(arr)
    lo, hi = arr.blues_in(win)
    return split_by_blue_range(mesh, arr, lo, hi)


# -- fully-balanced trees ----------------------------------------------------


def _outer_counts_by_order(mesh: Mesh, part, eu, ev, order):
    """Outgoing-edge counts aligned with `order`, a permutation of `part`.

    eu/ev must be the part's induced edges; a vertex's outgoing count is
    its mesh degree minus its induced degree.
    """
    spart = np.sort(part)
    ideg = np.bincount(np.searchsorted(spart, eu), minlength=len(part))
    ideg += np.bincount(np.searchsorted(spart, ev), minlength=len(part))
    out_sorted = mesh.degrees[spart] - ideg
    return out_sorted[np.searchsorted(spart, order)]


def _fb_split_parts(state, part, eu, ev):
    """One fully-balanced split; returns sides in inner-tree leaf order."""
    from .decomp import order_by_separators

    inner_order = order_by_separators(state, part, eu, ev)
    red_counts = _outer_counts_by_order(state.mesh, part, eu, ev, inner_order)
    arr = RedBlueArray(inner_order, red_counts)
    win = necklace_bisect(arr)
    lo, hi = arr.blues_in(win)
    left = arr.vertices[lo:hi]
    right = np.concatenate([arr.vertices[:lo], arr.vertices[hi:]])
    return left, right


def build_fb_tree(
    mesh: Mesh,
    cfg: Optional[SeparatorConfig] = None,
    rng=None,
    part: Optional[np.ndarray] = None,
) -> DecompTree:
    """Fully-balanced decomposition tree: every split is fully balanced.

    Sibling sizes differ by at most one at every node, so the tree has
    ceil(log2 n) + O(1) levels.  Reuses the standard leaf-array encoding.
    """
    cfg = cfg or SeparatorConfig()
    state = _BuildState(mesh, cfg, rng)
    if part is None:
        order = np.arange(mesh.n_vertices, dtype=np.int64)
    else:
        order = np.array(part, dtype=np.int64)
    eu, ev = _induced_edges(mesh, order)
    tree = DecompTree(
        dim=mesh.dim, beta=cfg.beta(mesh.dim), c_cross=cfg.c_cross, leaf_array=order
    )
    _fb_build_range(state, tree, 0, len(order), eu, ev, ROOT)
    tree.leaf_array.flags.writeable = False
    return tree


def _stamp_and_partition_edges(state, tree, bit, left, right, eu, ev):
    side = state.side_buf
    side[left] = 0
    side[right] = 1
    su, sv = side[eu], side[ev]
    cross = su != sv
    for u, v in zip(eu[cross].tolist(), ev[cross].tolist()):
        tree.edge_owner[(u, v) if u < v else (v, u)] = bit
    both0 = ~cross & (su == 0)
    both1 = ~cross & (su == 1)
    n_cross = int(np.count_nonzero(cross))
    return (eu[both0], ev[both0]), (eu[both1], ev[both1]), n_cross


def _fb_build_range(state, tree, start, end, eu, ev, bit):
    n = end - start
    tree.node_range[bit] = (start, n)
    if n == 1:
        tree.vertex_id[int(tree.leaf_array[start])] = bit
        return
    part = tree.leaf_array[start:end]
    left, right = _fb_split_parts(state, part, eu, ev)
    assert abs(len(left) - len(right)) <= 1
    le, re_, _ = _stamp_and_partition_edges(state, tree, bit, left, right, eu, ev)
    tree.leaf_array[start : start + len(left)] = left
    tree.leaf_array[start + len(left) : end] = right
    _fb_build_range(state, tree, start, start + len(left), *le, bit.child(0))
    _fb_build_range(state, tree, start + len(left), end, *re_, bit.child(1))


def node_outgoing_counts(tree: DecompTree) -> dict:
    """Outgoing-edge count of every tree node, derived from bit strings.

    An edge owned at node p is outgoing for exactly the nodes strictly
    below p's children on its endpoints' leaf paths.
    """
    outgoing: dict[BitId, int] = {}
    for (u, v), owner in tree.edge_owner.items():
        for endpoint in (u, v):
            node = tree.vertex_id[endpoint]
            while node.length > owner.length + 1:
                outgoing[node] = outgoing.get(node, 0) + 1
                node = node.parent()
    return outgoing


def verify_fb_tree(tree: DecompTree, mesh: Mesh):
    """Per-node fully-balanced checks on top of the structural tree audit.

    Returns (violations, stats) where stats records the worst sibling size
    difference and outgoing-edge difference observed.
    """
    violations = []
    b = mesh.max_degree
    max_size_diff = 0
    max_out_diff = 0
    outgoing = node_outgoing_counts(tree)
    for node, (start, length) in tree.node_range.items():
        if length == 1:
            continue
        l = tree.node_range.get(node.child(0))
        r = tree.node_range.get(node.child(1))
        if l is None or r is None:
            violations.append(f"node {node!s} missing a child")
            continue
        sd = abs(l[1] - r[1])
        max_size_diff = max(max_size_diff, sd)
        if sd > 1:
            violations.append(f"node {node!s} sibling sizes differ by {sd}")
        od = abs(outgoing.get(node.child(0), 0) - outgoing.get(node.child(1), 0))
        max_out_diff = max(max_out_diff, od)
        if od > 2 * b + 1:
            violations.append(f"node {node!s} outgoing counts differ by {od}")
    return violations, {"max_size_diff": max_size_diff, "max_outgoing_diff": max_out_diff}


# -- k-way partitions ---------------------------------------------------------


def kway_boundaries(n: int, k: int) -> list:
    """Block boundaries giving k contiguous blocks of size floor/ceil(n/k)."""
    return [math.ceil(i * n / k) for i in range(k + 1)]


def kway_partition(
    mesh: Mesh,
    k: int,
    cfg: Optional[SeparatorConfig] = None,
    rng=None,
    *,
    full_tree: bool = False,
):
    """Split the mesh into k vertex blocks of near-equal size (within one).

    Blocks are contiguous runs of the fully-balanced leaf order.  By
    default only the top ceil(log2 k) + 2 tree levels are built and just
    the leaves straddling a block boundary are refined further; pass
    full_tree=True to build the whole tree first (same block sizes).
    """
    cfg = cfg or SeparatorConfig()
    n = mesh.n_vertices
    if not (2 <= k <= n):
        raise ValueError(f"k must lie in [2, {n}]")
    bounds = kway_boundaries(n, k)
    if full_tree:
        order = build_fb_tree(mesh, cfg, rng).leaf_array
        return [order[bounds[i] : bounds[i + 1]] for i in range(k)]

    state = _BuildState(mesh, cfg, rng)
    order = np.arange(n, dtype=np.int64)
    eu, ev = _induced_edges(mesh, order)
    depth_limit = math.ceil(math.log2(k)) + 2
    inner_bounds = set(bounds[1:-1])

    def straddled(start, end):
        return any(start < b < end for b in inner_bounds)

    def walk(start, end, eu, ev, depth, refine_only):
        n_here = end - start
        if n_here == 1 or (not refine_only and depth >= depth_limit):
            if refine_only or not straddled(start, end):
                return
            walk(start, end, eu, ev, depth, True)
            return
        if refine_only and not straddled(start, end):
            return
        part = order[start:end]
        left, right = _fb_split_parts(state, part, eu, ev)
        side = state.side_buf
        side[left] = 0
        side[right] = 1
        su, sv = side[eu], side[ev]
        both0 = (su == 0) & (sv == 0)
        both1 = (su == 1) & (sv == 1)
        order[start : start + len(left)] = left
        order[start + len(left) : end] = right
        mid = start + len(left)
        walk(start, mid, eu[both0], ev[both0], depth + 1, refine_only)
        walk(mid, end, eu[both1], ev[both1], depth + 1, refine_only)

    walk(0, n, eu, ev, 0, False)
    return [order[bounds[i] : bounds[i + 1]] for i in range(k)]
