"""Relaxed-balance partitions and trees: near-equal splits, built faster.

Instead of ordering every vertex of a subgraph before bisecting it, only
the top levels of its decomposition tree (the upper tree) are built; a
leaf of the upper tree is refined to single vertices only when it holds
many of the subgraph's outgoing edges.  The necklace window is then
snapped outward or inward so it never splits an unrefined leaf.  Sizes
and outgoing counts stay equal up to slack that shrinks polylog in the
top-level mesh size, which is enough for the same layout guarantees.

All thresholds are functions of the size of the top-level mesh, not of
the subgraph at hand.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .balanced import (
    RedBlueArray,
    _outer_counts_by_order,
    _stamp_and_partition_edges,
    necklace_bisect,
)
from .decomp import (
    ROOT,
    BitId,
    DecompTree,
    _BuildState,
    _build_range,
    _split_once,
    depth_budget,
)
from .mesh import Mesh
from .separator import SeparatorConfig, _induced_edges


@dataclass(frozen=True)
class RelaxContext:
    """Global quantities every relaxed split refers back to.

    global_n is the vertex count of the top-level mesh and stays fixed
    through the whole recursive build; beta is the separator balance.
    c_size and c_out are the audit constants of the deviation bounds.
    """

    global_n: int
    beta: float
    c_size: float = 4.0
    c_out: float = 4.0

    @classmethod
    def for_mesh(cls, mesh: Mesh, cfg: SeparatorConfig, **kw) -> "RelaxContext":
        return cls(global_n=mesh.n_vertices, beta=cfg.beta(mesh.dim), **kw)

    @property
    def log2n(self) -> float:
        return math.log2(max(self.global_n, 2))

    def upper_depth(self) -> int:
        """Levels of the upper tree; sized so worst-case leaves hold n/log^3 vertices."""
        lg = self.log2n
        if lg <= 1.0:
            return 1
        return max(1, math.ceil(3.0 * math.log(lg) / math.log(1.0 / self.beta)))

    def small_threshold(self) -> float:
        """Subgraphs below log2(global_n)^3 vertices get a plain full tree."""
        return self.log2n**3

    def refine_limit(self, outer_total: int) -> float:
        """An upper-tree leaf is refined when its outer-edge share exceeds this."""
        return outer_total / self.log2n**2

    def max_refined_leaves(self) -> float:
        return self.log2n**2

    def size_slack(self, n_part: int) -> float:
        return self.c_size * n_part / self.log2n**3 + 1.0

    def out_slack(self, outgoing_right: int, degree_bound: int) -> float:
        return self.c_out * outgoing_right / self.log2n**2 + 2 * degree_bound + 1


@dataclass(frozen=True)
class RelaxLeaf:
    """Upper-tree leaf record: its id, leaf-array chunk, and refinement flag."""

    bit: BitId
    start: int
    length: int
    refined: bool


@dataclass
class RelaxTree:
    """Relax partition tree: decomposition-tree encoding with truncated leaves.

    Vertices of an unrefined leaf share the leaf's bit id and are stored in
    arbitrary order inside the leaf's chunk.  Each edge is owned by at most
    one node; edges interior to unrefined leaves are owned by none.
    """

    dim: int
    beta: float
    c_cross: float
    leaf_array: np.ndarray
    vertex_id: dict = field(default_factory=dict)
    edge_owner: dict = field(default_factory=dict)
    node_range: dict = field(default_factory=dict)
    leaves: list = field(default_factory=list)
    small_case: bool = False

    @property
    def n_vertices(self) -> int:
        return len(self.leaf_array)

    def refined_leaf_count(self) -> int:
        return sum(1 for leaf in self.leaves if leaf.refined)

    def max_unrefined_leaf_size(self) -> int:
        return max((leaf.length for leaf in self.leaves if not leaf.refined), default=0)


def build_relax_partition_tree(
    mesh: Mesh,
    part: Optional[np.ndarray] = None,
    ctx: Optional[RelaxContext] = None,
    cfg: Optional[SeparatorConfig] = None,
    rng=None,
    *,
    upper_depth: Optional[int] = None,
    refine_limit: Optional[float] = None,
    small_threshold: Optional[float] = None,
    _state: Optional[_BuildState] = None,
    _edges=None,
) -> RelaxTree:
    """Build the relax partition tree of a mesh subset.

    The upper tree is cut off at a fixed depth; leaves holding more than
    their fair polylog share of the subset's outgoing edges are refined to
    single vertices, the rest stay as unordered blocks.  Subsets smaller
    than the cube-of-log threshold get a full plain tree instead.  The
    keyword overrides exist for tests that pin the thresholds explicitly.
    """
    cfg = cfg or SeparatorConfig()
    state = _state or _BuildState(mesh, cfg, rng)
    if part is None:
        part = np.arange(mesh.n_vertices, dtype=np.int64)
    order = np.array(part, dtype=np.int64)
    if len(order) < 2:
        raise ValueError("cannot build a partition tree on fewer than 2 vertices")
    if ctx is None:
        ctx = RelaxContext.for_mesh(mesh, cfg)
    eu, ev = _edges if _edges is not None else _induced_edges(mesh, order)
    depth = upper_depth if upper_depth is not None else ctx.upper_depth()
    small = small_threshold if small_threshold is not None else ctx.small_threshold()

    tree = RelaxTree(
        dim=mesh.dim, beta=cfg.beta(mesh.dim), c_cross=cfg.c_cross, leaf_array=order
    )
    n = len(order)
    if n < small:
        tree.small_case = True
        _build_range(state, tree, 0, n, eu, ev, ROOT, depth_budget(n, tree.beta))
        for pos in range(n):
            v = int(tree.leaf_array[pos])
            tree.leaves.append(RelaxLeaf(tree.vertex_id[v], pos, 1, False))
        return tree

    # outgoing counts keyed by vertex id survive in-place reordering
    out_counts = _outer_counts_by_order(mesh, order, eu, ev, np.sort(order))
    out_buf = np.zeros(mesh.n_vertices, dtype=np.int64)
    out_buf[np.sort(order)] = out_counts
    limit = (
        refine_limit
        if refine_limit is not None
        else ctx.refine_limit(int(out_counts.sum()))
    )
    _upper_build(state, tree, 0, n, eu, ev, ROOT, depth, out_buf, limit)
    return tree


def _upper_build(state, tree, start, end, eu, ev, bit, depth_left, out_buf, limit):
    n = end - start
    tree.node_range[bit] = (start, n)
    if n == 1:
        v = int(tree.leaf_array[start])
        tree.vertex_id[v] = bit
        tree.leaves.append(RelaxLeaf(bit, start, 1, False))
        return
    if depth_left == 0:
        chunk = tree.leaf_array[start:end]
        if float(out_buf[chunk].sum()) > limit:
            budget = bit.length + depth_budget(n, tree.beta)
            _build_range(state, tree, start, end, eu, ev, bit, budget)
            tree.leaves.append(RelaxLeaf(bit, start, n, True))
        else:
            for v in chunk.tolist():
                tree.vertex_id[int(v)] = bit
            tree.leaves.append(RelaxLeaf(bit, start, n, False))
        return
    part = tree.leaf_array[start:end]
    left, right, le, re_, crossing = _split_once(state, part, eu, ev)
    for u, v in crossing:
        tree.edge_owner[(u, v) if u < v else (v, u)] = bit
    tree.leaf_array[start : start + len(left)] = left
    tree.leaf_array[start + len(left) : end] = right
    mid = start + len(left)
    _upper_build(state, tree, start, mid, *le, bit.child(0), depth_left - 1, out_buf, limit)
    _upper_build(state, tree, mid, end, *re_, bit.child(1), depth_left - 1, out_buf, limit)


# -- window adjustment --------------------------------------------------------


def adjust_blue_range(lo: int, hi: int, leaf_ranges, n_blues: Optional[int] = None) -> tuple:
    """Snap window endpoints off the interior of unmovable leaf blocks.

    leaf_ranges lists (start, end, keep_together) blue-index ranges in
    order.  A boundary strictly inside a keep-together block moves to the
    block edge with the lower index first; if that would empty the window
    the boundary moves to the block's other edge instead.  Both the window
    and its complement are asserted nonempty, which holds whenever no
    block spans half the array.
    """
    starts = [r[0] for r in leaf_ranges]

    def snap(j):
        idx = bisect_right(starts, j - 1) - 1
        if idx < 0:
            return None
        s, e, keep = leaf_ranges[idx]
        if keep and s < j < e:
            return s, e
        return None

    target = snap(lo)
    if target is not None:
        lo = target[0]
    target = snap(hi)
    if target is not None:
        s, e = target
        hi = s if s > lo else e
    if not lo < hi or (n_blues is not None and hi - lo >= n_blues):
        raise AssertionError(
            "leaf adjustment emptied one side; an unrefined leaf spans half the array"
        )
    return lo, hi


def _movable_ranges(rtree: RelaxTree):
    return [
        (leaf.start, leaf.start + leaf.length, (not leaf.refined) and leaf.length > 1)
        for leaf in sorted(rtree.leaves, key=lambda l: l.start)
    ]


@dataclass
class RBPartition:
    """A relax-balanced split of a subgraph.

    Side sizes agree up to the part-size/log^3 slack, outgoing counts up
    to the outgoing/log^2 slack plus 2b+1; crossing_edges is exact.
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


def relax_balanced_partition(
    mesh: Mesh,
    part: Optional[np.ndarray] = None,
    ctx: Optional[RelaxContext] = None,
    cfg: Optional[SeparatorConfig] = None,
    rng=None,
    *,
    _tree: Optional[RelaxTree] = None,
) -> RBPartition:
    """Relax-balanced split of a mesh subset.

    As the fully-balanced split, but over the relax partition tree's leaf
    order, and with the necklace window snapped so vertices of an
    unrefined leaf travel together.
    """
    cfg = cfg or SeparatorConfig()
    if part is None:
        part = np.arange(mesh.n_vertices, dtype=np.int64)
    part = np.asarray(part, dtype=np.int64)
    if len(part) < 2:
        raise ValueError("cannot partition fewer than 2 vertices")
    if ctx is None:
        ctx = RelaxContext.for_mesh(mesh, cfg)
    rtree = _tree
    if rtree is None:
        rtree = build_relax_partition_tree(mesh, part, ctx, cfg, rng)
    eu, ev = _induced_edges(mesh, part)
    counts = _outer_counts_by_order(mesh, part, eu, ev, rtree.leaf_array)
    arr = RedBlueArray(rtree.leaf_array, counts)
    win = necklace_bisect(arr)
    lo, hi = arr.blues_in(win)
    lo, hi = adjust_blue_range(lo, hi, _movable_ranges(rtree), arr.blue_count)
    left = arr.vertices[lo:hi]
    right = np.concatenate([arr.vertices[:lo], arr.vertices[hi:]])
    outgoing_left = int(arr.red_counts[lo:hi].sum())
    side = np.zeros(mesh.n_vertices, dtype=np.int8)
    side[right] = 1
    cross = side[eu] != side[ev]
    crossing = list(zip(eu[cross].tolist(), ev[cross].tolist()))
    return RBPartition(
        left_vertices=left,
        right_vertices=right,
        crossing_edges=crossing,
        outgoing_left=outgoing_left,
        outgoing_right=arr.red_count - outgoing_left,
    )


# -- relax-balanced trees -----------------------------------------------------


@dataclass(frozen=True)
class RBNodeRecord:
    """Per-node audit row collected while building a relax-balanced tree."""

    bit: BitId
    n: int
    n_left: int
    n_right: int
    outgoing_left: int
    outgoing_right: int
    crossing: int
    refined_leaves: int
    max_unrefined_leaf: int
    small_case: bool


def build_rb_tree(
    mesh: Mesh,
    cfg: Optional[SeparatorConfig] = None,
    ctx: Optional[RelaxContext] = None,
    rng=None,
) -> DecompTree:
    """Relax-balanced decomposition tree, recursed to single-vertex leaves."""
    tree, _ = build_rb_tree_with_report(mesh, cfg, ctx, rng)
    return tree


def build_rb_tree_with_report(
    mesh: Mesh,
    cfg: Optional[SeparatorConfig] = None,
    ctx: Optional[RelaxContext] = None,
    rng=None,
):
    """As build_rb_tree, but also returns the per-node audit records."""
    cfg = cfg or SeparatorConfig()
    if ctx is None:
        ctx = RelaxContext.for_mesh(mesh, cfg)
    state = _BuildState(mesh, cfg, rng)
    order = np.arange(mesh.n_vertices, dtype=np.int64)
    eu, ev = _induced_edges(mesh, order)
    tree = DecompTree(
        dim=mesh.dim, beta=cfg.beta(mesh.dim), c_cross=cfg.c_cross, leaf_array=order
    )
    records: list[RBNodeRecord] = []
    _rb_build_range(state, ctx, tree, 0, len(order), eu, ev, ROOT, records)
    tree.leaf_array.flags.writeable = False
    return tree, records


def _relax_order_split(state, ctx, part, eu, ev):
    """Leaf order plus leaf grouping of a relax partition tree, no tree dicts.

    Same recursion and separator draws as build_relax_partition_tree, kept
    lean for the inner loop of build_rb_tree.  Returns (order, red_counts,
    movable blue ranges, refined count, max unrefined size, small_case).
    """
    from .decomp import _order_range, order_by_separators

    mesh = state.mesh
    n = len(part)
    if getattr(state, "out_buf", None) is None:
        state.out_buf = np.zeros(mesh.n_vertices, dtype=np.int64)
    out_buf = state.out_buf
    spart = np.sort(part)
    ideg = np.bincount(np.searchsorted(spart, eu), minlength=n)
    ideg += np.bincount(np.searchsorted(spart, ev), minlength=n)
    out_buf[spart] = mesh.degrees[spart] - ideg

    if n < ctx.small_threshold():
        order = order_by_separators(state, part, eu, ev)
        return order, out_buf[order], [], 0, 0, True

    limit = ctx.refine_limit(int(out_buf[spart].sum()))
    order = np.array(part, dtype=np.int64)
    leaves = []

    def rec(start, end, eu, ev, depth_left):
        size = end - start
        if size == 1:
            leaves.append((start, end, False))
            return
        if depth_left == 0:
            chunk = order[start:end]
            if float(out_buf[chunk].sum()) > limit:
                budget = depth_budget(size, state.cfg.beta(mesh.dim))
                _order_range(state, order, start, end, eu, ev, 0, budget)
                leaves.append((start, end, True))
            else:
                leaves.append((start, end, False))
            return
        part_view = order[start:end]
        left, right, le, re_, _cross = _split_once(state, part_view, eu, ev)
        order[start : start + len(left)] = left
        order[start + len(left) : end] = right
        mid = start + len(left)
        rec(start, mid, *le, depth_left - 1)
        rec(mid, end, *re_, depth_left - 1)

    rec(0, n, eu, ev, ctx.upper_depth())
    movable = [(s, e, True) for s, e, refined in leaves if not refined and e - s > 1]
    refined_count = sum(1 for _, _, r in leaves if r)
    max_unref = max((e - s for s, e, r in leaves if not r), default=0)
    return order, out_buf[order], movable, refined_count, max_unref, False


def _rb_build_range(state, ctx, tree, start, end, eu, ev, bit, records):
    n = end - start
    tree.node_range[bit] = (start, n)
    if n == 1:
        tree.vertex_id[int(tree.leaf_array[start])] = bit
        return
    part = tree.leaf_array[start:end]
    order, red_counts, movable, refined_count, max_unref, small_case = (
        _relax_order_split(state, ctx, part, eu, ev)
    )
    arr = RedBlueArray(order, red_counts)
    win = necklace_bisect(arr)
    lo, hi = arr.blues_in(win)
    lo, hi = adjust_blue_range(lo, hi, movable, arr.blue_count)
    left = arr.vertices[lo:hi]
    right = np.concatenate([arr.vertices[:lo], arr.vertices[hi:]])
    le, re_, n_cross = _stamp_and_partition_edges(state, tree, bit, left, right, eu, ev)
    out_left = int(arr.red_counts[lo:hi].sum())
    records.append(
        RBNodeRecord(
            bit=bit,
            n=n,
            n_left=len(left),
            n_right=len(right),
            outgoing_left=out_left,
            outgoing_right=arr.red_count - out_left,
            crossing=n_cross,
            refined_leaves=refined_count,
            max_unrefined_leaf=max_unref,
            small_case=small_case,
        )
    )
    tree.leaf_array[start : start + len(left)] = left
    tree.leaf_array[start + len(left) : end] = right
    mid = start + len(left)
    _rb_build_range(state, ctx, tree, start, mid, *le, bit.child(0), records)
    _rb_build_range(state, ctx, tree, mid, end, *re_, bit.child(1), records)


def verify_rb_records(records, ctx: RelaxContext, mesh: Mesh, cfg: SeparatorConfig):
    """Check every collected split against the relax-balanced bounds."""
    from .balanced import crossing_bound

    violations = []
    b = mesh.max_degree
    for rec in records:
        if abs(rec.n_left - rec.n_right) > ctx.size_slack(rec.n):
            violations.append(f"node {rec.bit!s}: size diff {abs(rec.n_left - rec.n_right)}")
        out_diff = abs(rec.outgoing_left - rec.outgoing_right)
        if out_diff > ctx.out_slack(rec.outgoing_right, b):
            violations.append(f"node {rec.bit!s}: outgoing diff {out_diff}")
        if rec.crossing > crossing_bound(cfg, mesh.dim, rec.n):
            violations.append(f"node {rec.bit!s}: crossing {rec.crossing}")
        if rec.refined_leaves > ctx.max_refined_leaves():
            violations.append(f"node {rec.bit!s}: {rec.refined_leaves} refined leaves")
        if not rec.small_case and rec.max_unrefined_leaf > max(
            1.0, rec.n / ctx.log2n**3
        ):
            violations.append(
                f"node {rec.bit!s}: unrefined leaf of {rec.max_unrefined_leaf} vertices"
            )
    return violations


def verify_rb_tree(tree: DecompTree, mesh: Mesh, ctx: RelaxContext):
    """Relax-balanced checks on a finished tree (e.g. one read from a dump).

    Sibling sizes and outgoing counts must agree within the polylog slack
    of the context.  Returns (violations, stats).
    """
    from .balanced import node_outgoing_counts

    violations = []
    b = mesh.max_degree
    outgoing = node_outgoing_counts(tree)
    max_size_diff = 0
    max_out_diff = 0
    for node, (_, length) in tree.node_range.items():
        if length == 1:
            continue
        l = tree.node_range.get(node.child(0))
        r = tree.node_range.get(node.child(1))
        if l is None or r is None:
            violations.append(f"node {node!s} missing a child")
            continue
        sd = abs(l[1] - r[1])
        max_size_diff = max(max_size_diff, sd)
        if sd > ctx.size_slack(length):
            violations.append(f"node {node!s} sibling sizes differ by {sd}")
        out_l = outgoing.get(node.child(0), 0)
        out_r = outgoing.get(node.child(1), 0)
        od = abs(out_l - out_r)
        max_out_diff = max(max_out_diff, od)
        if od > ctx.out_slack(out_r, b):
            violations.append(f"node {node!s} outgoing counts differ by {od}")
    return violations, {"max_size_diff": max_size_diff, "max_outgoing_diff": max_out_diff}


def per_level_size_stats(tree: DecompTree):
    """Per-level (node count, min size, max size) of a decomposition tree."""
    by_level: dict[int, list] = {}
    for node, (_, length) in tree.node_range.items():
        by_level.setdefault(node.length, []).append(length)
    return [
        (lvl, len(sizes), min(sizes), max(sizes))
        for lvl, sizes in sorted(by_level.items())
    ]
