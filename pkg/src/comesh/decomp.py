"""Recursive decomposition trees with bit-string ids and in-array leaves.

A tree is never materialized as linked nodes.  It is an ordered vertex
array plus, per vertex, the bit string of its root-to-leaf path and, per
edge, the id of the unique node where the edge crosses between the two
children.  Vertices under any node occupy one contiguous chunk of the
array, so subtree lookups are ranges.

Construction mutates one working array single-threaded; finished trees
are immutable and shareable.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .mesh import Mesh
from .separator import SeparatorConfig, find_separator, stereo_project


@dataclass(frozen=True)
class BitId:
    """Root-to-node path as a bit string; the empty string is the root.

    Bits are packed into an int with the first branch in the most
    significant position, so prefix tests are shifts.
    """

    length: int = 0
    bits: int = 0

    def child(self, b: int) -> "BitId":
        return BitId(self.length + 1, (self.bits << 1) | (b & 1))

    def parent(self) -> "BitId":
        if self.length == 0:
            raise ValueError("root has no parent")
        return BitId(self.length - 1, self.bits >> 1)

    def bit_at(self, i: int) -> int:
        if not (0 <= i < self.length):
            raise IndexError(f"bit {i} of a {self.length}-bit id")
        return (self.bits >> (self.length - 1 - i)) & 1

    def is_prefix_of(self, other: "BitId") -> bool:
        return (
            other.length >= self.length
            and (other.bits >> (other.length - self.length)) == self.bits
        )

    def is_strict_prefix_of(self, other: "BitId") -> bool:
        return other.length > self.length and self.is_prefix_of(other)

    def __str__(self) -> str:
        return format(self.bits, f"0{self.length}b") if self.length else ""

    @classmethod
    def from_string(cls, s: str) -> "BitId":
        s = s.strip()
        if s in ("", "-"):
            return cls()
        if any(ch not in "01" for ch in s):
            raise ValueError(f"not a bit string: {s!r}")
        return cls(len(s), int(s, 2))


ROOT = BitId()


class EdgeClass(enum.Enum):
    INNER = "inner"
    CROSSING = "crossing"
    OUTGOING = "outgoing"
    OUTER = "outer"
    UNRELATED = "unrelated"


def is_outer(cls: EdgeClass) -> bool:
    """Outer edges leave a node: crossing at the parent or outgoing."""
    return cls in (EdgeClass.OUTER, EdgeClass.OUTGOING)


@dataclass
class DecompTree:
    """Decomposition tree of a vertex subset in leaf-array encoding.

    leaf_array orders the vertices; vertex_id maps each vertex to its leaf
    path; edge_owner maps each induced edge to the single node where it is
    a crossing edge; node_range locates every node's contiguous chunk as
    (start, length).
    """

    dim: int
    beta: float
    c_cross: float
    leaf_array: np.ndarray
    vertex_id: dict = field(default_factory=dict)
    edge_owner: dict = field(default_factory=dict)
    node_range: dict = field(default_factory=dict)

    @property
    def n_vertices(self) -> int:
        return len(self.leaf_array)

    def has_node(self, node_id: BitId) -> bool:
        return node_id in self.node_range

    @property
    def depth(self) -> int:
        return max((v.length for v in self.vertex_id.values()), default=0)


def subtree_range(tree: DecompTree, node_id: BitId):
    """Half-open leaf_array range of the vertices under node_id."""
    try:
        start, length = tree.node_range[node_id]
    except KeyError:
        raise KeyError(f"unknown node id {node_id!s}") from None
    return start, start + length


def classify_edge(tree: DecompTree, edge, node_id: BitId) -> EdgeClass:
    """Class of an edge relative to a tree node, from bit strings alone.

    crossing when the node owns the edge; inner when the node is a strict
    ancestor of the owner; outer/outgoing when the owner is a strict
    ancestor and the node contains one endpoint (outgoing when the edge
    already crossed above the node's parent); unrelated otherwise.
    """
    u, v = edge
    key = (u, v) if u < v else (v, u)
    try:
        owner = tree.edge_owner[key]
    except KeyError:
        raise KeyError(f"edge {key} has no owner in this tree") from None
    if not tree.has_node(node_id):
        raise KeyError(f"unknown node id {node_id!s}")
    if node_id == owner:
        return EdgeClass.CROSSING
    if node_id.is_strict_prefix_of(owner):
        return EdgeClass.INNER
    if owner.is_strict_prefix_of(node_id):
        leaf_u = tree.vertex_id[key[0]]
        leaf_v = tree.vertex_id[key[1]]
        if node_id.is_prefix_of(leaf_u) or node_id.is_prefix_of(leaf_v):
            if owner.length < node_id.length - 1:
                return EdgeClass.OUTGOING
            return EdgeClass.OUTER
    return EdgeClass.UNRELATED


def depth_budget(n: int, beta: float) -> int:
    """Structural depth bound of a beta-balanced tree, with slack."""
    if n <= 1:
        return 1
    return math.ceil(math.log(n) / math.log(1.0 / beta)) + 4


class _BuildState:
    """Per-build scratch shared down the recursion (single-threaded)."""

    def __init__(self, mesh: Mesh, cfg: SeparatorConfig, rng):
        self.mesh = mesh
        self.cfg = cfg
        self.rng = rng if rng is not None else np.random.default_rng(cfg.seed)
        self.proj = stereo_project(mesh.coords)
        self.side_buf = np.empty(mesh.n_vertices, dtype=np.int8)


def _split_once(state: _BuildState, part: np.ndarray, eu, ev):
    """One separator application; returns (left, right, edge splits, crossing pairs)."""
    res = find_separator(
        state.mesh,
        part,
        state.cfg,
        state.rng,
        proj=state.proj,
        part_edges=(eu, ev),
        side_buf=state.side_buf,
    )
    side = state.side_buf
    left = part[res.side_of == 0]
    right = part[res.side_of == 1]
    su, sv = side[eu], side[ev]
    cross = su != sv
    both0 = ~cross & (su == 0)
    both1 = ~cross & (su == 1)
    crossing = list(zip(eu[cross].tolist(), ev[cross].tolist()))
    return left, right, (eu[both0], ev[both0]), (eu[both1], ev[both1]), crossing


def order_by_separators(state: _BuildState, part: np.ndarray, eu, ev) -> np.ndarray:
    """Leaf order of a decomposition tree of `part`, without tree bookkeeping.

    Same recursion and same separator draws as build_decomposition_tree,
    so the order matches what that tree's leaf_array would be; used where
    only the order is consumed.
    """
    order = np.array(part, dtype=np.int64)
    _order_range(state, order, 0, len(order), eu, ev, 0, depth_budget(len(order), state.cfg.beta(state.mesh.dim)))
    return order


def _order_range(state, order, start, end, eu, ev, depth, budget):
    if end - start == 1:
        return
    if depth >= budget:
        raise RuntimeError("decomposition recursion exceeded its depth budget")
    part = order[start:end]
    res = find_separator(
        state.mesh,
        part,
        state.cfg,
        state.rng,
        proj=state.proj,
        part_edges=(eu, ev),
        side_buf=state.side_buf,
    )
    side = state.side_buf
    left = part[res.side_of == 0]
    right = part[res.side_of == 1]
    su, sv = side[eu], side[ev]
    both0 = (su == 0) & (sv == 0)
    both1 = (su == 1) & (sv == 1)
    order[start : start + len(left)] = left
    order[start + len(left) : end] = right
    mid = start + len(left)
    _order_range(state, order, start, mid, eu[both0], ev[both0], depth + 1, budget)
    _order_range(state, order, mid, end, eu[both1], ev[both1], depth + 1, budget)


def build_decomposition_tree(
    mesh: Mesh,
    cfg: SeparatorConfig | None = None,
    part: np.ndarray | None = None,
    rng=None,
    *,
    _state: _BuildState | None = None,
) -> DecompTree:
    """Recursively split a mesh subset down to single-vertex leaves.

    After each split the chunk is reordered in place so side 0 precedes
    side 1, vertex ids grow by one bit per level, and crossing edges are
    stamped with the current node id.  The left subtree is fully built
    before the right one.
    """
    cfg = cfg or SeparatorConfig()
    state = _state or _BuildState(mesh, cfg, rng)
    if part is None:
        order = np.arange(mesh.n_vertices, dtype=np.int64)
    else:
        order = np.array(part, dtype=np.int64)
    from .separator import _induced_edges

    eu, ev = _induced_edges(mesh, order)
    tree = DecompTree(
        dim=mesh.dim,
        beta=cfg.beta(mesh.dim),
        c_cross=cfg.c_cross,
        leaf_array=order,
    )
    budget = depth_budget(len(order), tree.beta)
    _build_range(state, tree, 0, len(order), eu, ev, ROOT, budget)
    tree.leaf_array.flags.writeable = False
    return tree


def _build_range(state, tree, start, end, eu, ev, bit, budget):
    n = end - start
    tree.node_range[bit] = (start, n)
    if n == 1:
        tree.vertex_id[int(tree.leaf_array[start])] = bit
        return
    if bit.length >= budget:
        raise RuntimeError("decomposition recursion exceeded its depth budget")
    part = tree.leaf_array[start:end]
    left, right, le, re_, crossing = _split_once(state, part, eu, ev)
    for u, v in crossing:
        tree.edge_owner[(u, v) if u < v else (v, u)] = bit
    tree.leaf_array[start : start + len(left)] = left
    tree.leaf_array[start + len(left) : end] = right
    _build_range(state, tree, start, start + len(left), *le, bit.child(0), budget)
    _build_range(state, tree, start + len(left), end, *re_, bit.child(1), budget)


@dataclass
class TreeAudit:
    ok: bool
    violations: list
    n_nodes: int
    depth: int
    max_balance: float
    balance_envelope: float
    owned_edges: int
    max_crossing_ratio: float


def verify_tree(
    tree: DecompTree,
    mesh: Mesh,
    cfg: SeparatorConfig | None = None,
    crossing_factor: float = 1.0,
) -> TreeAudit:
    """Structural audit of a built tree; violations are listed, not raised.

    Checks leaf_array bijectivity, prefix-contiguity of every node chunk,
    unique edge ownership at the endpoints' divergence node, per-node
    balance against the tree's beta, and per-node crossing counts against
    crossing_factor * c_cross * n^(1-1/d).  Trees whose splits come from
    necklace windows (fully- or relax-balanced) should pass the
    geometric-series factor (1+beta^a)/(1-beta^a) here, since each window
    cut severs a whole root-to-leaf path of separator cuts.
    """
    v: list[str] = []
    beta = cfg.beta(mesh.dim) if cfg else tree.beta
    c_cross = (cfg.c_cross if cfg else tree.c_cross) * crossing_factor
    alpha = 1.0 - 1.0 / mesh.dim
    leaf = tree.leaf_array
    n = len(leaf)
    if len(np.unique(leaf)) != n:
        v.append("leaf_array is not a permutation")
    if set(tree.vertex_id) != set(int(x) for x in leaf):
        v.append("vertex_id does not cover exactly the leaf vertices")

    # contiguity: every vertex sits inside the range of each of its prefixes
    for pos, vert in enumerate(leaf.tolist()):
        vid = tree.vertex_id.get(vert)
        if vid is None:
            continue
        if tree.node_range.get(vid) != (pos, 1):
            v.append(f"leaf range of vertex {vert} disagrees with its position")
            continue
        node = vid
        while node.length > 0:
            node = node.parent()
            rng = tree.node_range.get(node)
            if rng is None or not (rng[0] <= pos < rng[0] + rng[1]):
                v.append(f"vertex {vert} outside the chunk of its ancestor {node!s}")
                break

    # ownership: every induced edge owned exactly once, at the divergence node
    inside = set(int(x) for x in leaf)
    eu, ev, _ = mesh.edge_arrays()
    expected = 0
    for u, vtx in zip(eu.tolist(), ev.tolist()):
        if u not in inside or vtx not in inside:
            continue
        expected += 1
        owner = tree.edge_owner.get((u, vtx))
        if owner is None:
            v.append(f"edge ({u},{vtx}) has no owner")
            continue
        bu, bv = tree.vertex_id[u], tree.vertex_id[vtx]
        if not (owner.is_strict_prefix_of(bu) and owner.is_strict_prefix_of(bv)):
            v.append(f"edge ({u},{vtx}) owner is not an ancestor of both endpoints")
        elif bu.bit_at(owner.length) == bv.bit_at(owner.length):
            v.append(f"edge ({u},{vtx}) does not cross at its owner")
    if len(tree.edge_owner) != expected:
        v.append(
            f"owned-edge count {len(tree.edge_owner)} != induced edge count {expected}"
        )

    # balance and crossing bounds per internal node
    crossing_per_node: dict[BitId, int] = {}
    for owner in tree.edge_owner.values():
        crossing_per_node[owner] = crossing_per_node.get(owner, 0) + 1
    max_balance = 0.0
    max_cross_ratio = 0.0
    for node, (start, length) in tree.node_range.items():
        if length == 1:
            continue
        for b in (0, 1):
            child = tree.node_range.get(node.child(b))
            if child is None:
                v.append(f"internal node {node!s} missing child {b}")
                continue
            frac = child[1] / length
            max_balance = max(max_balance, frac)
            if child[1] > math.ceil(beta * length):
                v.append(f"node {node!s} child {b} breaks the balance bound")
        limit = c_cross * length**alpha
        got = crossing_per_node.get(node, 0)
        max_cross_ratio = max(max_cross_ratio, got / limit)
        if got > limit:
            v.append(f"node {node!s} owns {got} crossing edges > {limit:.3g}")

    depth = tree.depth
    if n > 1 and depth > depth_budget(n, beta):
        v.append(f"depth {depth} exceeds the structural budget")
    return TreeAudit(
        ok=not v,
        violations=v,
        n_nodes=len(tree.node_range),
        depth=depth,
        max_balance=max_balance,
        balance_envelope=(2 * mesh.dim + 3) / (2 * mesh.dim + 4),
        owned_edges=len(tree.edge_owner),
        max_crossing_ratio=max_cross_ratio,
    )
