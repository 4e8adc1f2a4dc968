"""Text formats: mesh files, layout files, tree dumps, and part files.

All formats are ASCII with LF line endings and space-separated fields,
0-based vertex ids, and reals printed with 17 significant digits so they
round-trip exactly.
"""

from __future__ import annotations

import io as _io

import numpy as np

from .decomp import BitId, DecompTree
from .layout import LayoutPermutation
from .mesh import Mesh


class MeshFormatError(ValueError):
    """Malformed input file; the message carries the offending line number."""


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _open(path_or_file, mode):
    if hasattr(path_or_file, "read") or hasattr(path_or_file, "write"):
        return path_or_file, False
    return open(path_or_file, mode, newline="\n"), True


# -- mesh files ---------------------------------------------------------------


def emit_mesh_file(mesh: Mesh, path_or_file) -> None:
    """Write `comesh 1 <d> <nv> <ne>`, vertex lines, then one line per edge."""
    f, close = _open(path_or_file, "w")
    try:
        f.write(f"comesh 1 {mesh.dim} {mesh.n_vertices} {mesh.n_edges}\n")
        for i in range(mesh.n_vertices):
            coords = " ".join(_fmt(c) for c in mesh.coords[i])
            f.write(f"v {i} {coords} {_fmt(mesh.weights[i])}\n")
        eu, ev, ew = mesh.edge_arrays()
        for u, v, w in zip(eu.tolist(), ev.tolist(), ew.tolist()):
            f.write(f"e {u} {v} {_fmt(w)}\n")
    finally:
        if close:
            f.close()


def parse_mesh_file(path_or_file) -> Mesh:
    """Parse a comesh file; raises MeshFormatError with the bad line number."""
    f, close = _open(path_or_file, "r")
    try:
        lines = f.read().splitlines()
    finally:
        if close:
            f.close()

    def fail(lineno, msg):
        raise MeshFormatError(f"line {lineno}: {msg}")

    if not lines:
        fail(1, "empty file")
    head = lines[0].split()
    if len(head) != 5 or head[0] != "comesh" or head[1] != "1":
        fail(1, "expected header 'comesh 1 <d> <n_vertices> <n_edges>'")
    try:
        dim, nv, ne = int(head[2]), int(head[3]), int(head[4])
    except ValueError:
        fail(1, "non-integer header field")
    if dim < 1 or nv < 0 or ne < 0:
        fail(1, "nonsensical header values")
    if len(lines) < 1 + nv + ne:
        fail(len(lines), f"expected {1 + nv + ne} lines, file has {len(lines)}")

    coords = np.zeros((nv, dim), dtype=np.float64)
    weights = np.zeros(nv, dtype=np.float64)
    seen = np.zeros(nv, dtype=bool)
    for k in range(nv):
        lineno = 2 + k
        parts = lines[1 + k].split()
        if len(parts) != 3 + dim or parts[0] != "v":
            fail(lineno, f"expected 'v <id> <{dim} coords> <weight>'")
        try:
            vid = int(parts[1])
            vals = [float(x) for x in parts[2:]]
        except ValueError:
            fail(lineno, "non-numeric field")
        if not (0 <= vid < nv):
            fail(lineno, f"vertex id {vid} out of range [0, {nv})")
        if seen[vid]:
            fail(lineno, f"duplicate vertex id {vid}")
        seen[vid] = True
        coords[vid] = vals[:dim]
        weights[vid] = vals[dim]

    edges = []
    edge_seen = set()
    for k in range(ne):
        lineno = 2 + nv + k
        parts = lines[1 + nv + k].split()
        if len(parts) != 4 or parts[0] != "e":
            fail(lineno, "expected 'e <u> <v> <weight>'")
        try:
            u, v, w = int(parts[1]), int(parts[2]), float(parts[3])
        except ValueError:
            fail(lineno, "non-numeric field")
        if not (0 <= u < nv) or not (0 <= v < nv):
            fail(lineno, f"edge endpoint out of range [0, {nv})")
        if u == v:
            fail(lineno, "self-loop")
        if w <= 0.0:
            fail(lineno, "edge weight must be positive")
        key = (u, v) if u < v else (v, u)
        if key in edge_seen:
            fail(lineno, f"duplicate edge {key}")
        edge_seen.add(key)
        edges.append((u, v, w))
    for k in range(1 + nv + ne, len(lines)):
        if lines[k].strip():
            fail(k + 1, "unexpected trailing content")
    return Mesh.from_edges(dim, coords, edges, weights)


def mesh_to_string(mesh: Mesh) -> str:
    buf = _io.StringIO()
    emit_mesh_file(mesh, buf)
    return buf.getvalue()


def mesh_from_string(text: str) -> Mesh:
    return parse_mesh_file(_io.StringIO(text))


# -- layout files -------------------------------------------------------------


def emit_layout_file(perm: LayoutPermutation, path_or_file) -> None:
    f, close = _open(path_or_file, "w")
    try:
        f.write(f"colayout 1 {len(perm)}\n")
        for old, new in enumerate(perm.new_position.tolist()):
            f.write(f"l {old} {new}\n")
    finally:
        if close:
            f.close()


def parse_layout_file(path_or_file) -> LayoutPermutation:
    f, close = _open(path_or_file, "r")
    try:
        lines = f.read().splitlines()
    finally:
        if close:
            f.close()
    if not lines:
        raise MeshFormatError("line 1: empty file")
    head = lines[0].split()
    if len(head) != 3 or head[0] != "colayout" or head[1] != "1":
        raise MeshFormatError("line 1: expected header 'colayout 1 <n>'")
    n = int(head[2])
    pos = np.full(n, -1, dtype=np.int64)
    for k in range(n):
        parts = lines[1 + k].split()
        if len(parts) != 3 or parts[0] != "l":
            raise MeshFormatError(f"line {2 + k}: expected 'l <old_id> <new_pos>'")
        old, new = int(parts[1]), int(parts[2])
        if not (0 <= old < n):
            raise MeshFormatError(f"line {2 + k}: id {old} out of range")
        pos[old] = new
    try:
        return LayoutPermutation(pos)
    except ValueError as exc:
        raise MeshFormatError(f"layout is not a bijection: {exc}") from exc


# -- tree dumps ---------------------------------------------------------------


def _bit_str(bit: BitId) -> str:
    return str(bit) if bit.length else "-"


def emit_tree_file(tree, path_or_file) -> None:
    """Dump `t <vertex> <bits>` and `o <u> <v> <bits>` lines.

    Relax partition trees additionally dump `r <bits> <refined:0|1>` per
    upper-tree leaf.  The root's empty bit string prints as '-'.
    """
    f, close = _open(path_or_file, "w")
    try:
        for v in tree.leaf_array.tolist():
            f.write(f"t {v} {_bit_str(tree.vertex_id[v])}\n")
        for (u, v), bit in sorted(tree.edge_owner.items()):
            f.write(f"o {u} {v} {_bit_str(bit)}\n")
        for leaf in getattr(tree, "leaves", []):
            f.write(f"r {_bit_str(leaf.bit)} {int(leaf.refined)}\n")
    finally:
        if close:
            f.close()


def parse_tree_file(path_or_file):
    """Read a tree dump back as (vertex_bits, edge_owner, leaf_flags)."""
    f, close = _open(path_or_file, "r")
    try:
        lines = f.read().splitlines()
    finally:
        if close:
            f.close()
    vertex_bits: dict[int, BitId] = {}
    edge_owner: dict[tuple, BitId] = {}
    leaf_flags: dict[BitId, bool] = {}
    for k, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        parts = line.split()
        try:
            if parts[0] == "t" and len(parts) == 3:
                vertex_bits[int(parts[1])] = BitId.from_string(parts[2])
            elif parts[0] == "o" and len(parts) == 4:
                u, v = int(parts[1]), int(parts[2])
                key = (u, v) if u < v else (v, u)
                edge_owner[key] = BitId.from_string(parts[3])
            elif parts[0] == "r" and len(parts) == 3:
                leaf_flags[BitId.from_string(parts[1])] = bool(int(parts[2]))
            else:
                raise ValueError("unrecognized record")
        except ValueError as exc:
            raise MeshFormatError(f"line {k}: {exc}") from exc
    return vertex_bits, edge_owner, leaf_flags


def tree_from_dump(vertex_bits, edge_owner, dim, beta, c_cross) -> DecompTree:
    """Rebuild a DecompTree from dump records.

    Leaf order is recovered from the bit strings (in-order traversal =
    lexicographic order of the prefix-free leaf ids); node ranges follow
    from prefix counting.
    """
    items = sorted(vertex_bits.items(), key=lambda kv: str(kv[1]))
    leaf_array = np.asarray([v for v, _ in items], dtype=np.int64)
    node_range: dict[BitId, tuple] = {}
    firsts: dict[BitId, int] = {}
    counts: dict[BitId, int] = {}
    for pos, (_, bit) in enumerate(items):
        node = bit
        while True:
            firsts.setdefault(node, pos)
            counts[node] = counts.get(node, 0) + 1
            if node.length == 0:
                break
            node = node.parent()
    for node, start in firsts.items():
        node_range[node] = (start, counts[node])
    return DecompTree(
        dim=dim,
        beta=beta,
        c_cross=c_cross,
        leaf_array=leaf_array,
        vertex_id=dict(vertex_bits),
        edge_owner=dict(edge_owner),
        node_range=node_range,
    )


# -- k-way part files ---------------------------------------------------------


def emit_parts_file(parts, path_or_file) -> None:
    f, close = _open(path_or_file, "w")
    try:
        for i, part in enumerate(parts):
            for v in np.asarray(part).tolist():
                f.write(f"p {v} {i}\n")
    finally:
        if close:
            f.close()


def parse_parts_file(path_or_file):
    f, close = _open(path_or_file, "r")
    try:
        lines = f.read().splitlines()
    finally:
        if close:
            f.close()
    groups: dict[int, list] = {}
    for k, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 3 or parts[0] != "p":
            raise MeshFormatError(f"line {k}: expected 'p <vertex> <part>'")
        groups.setdefault(int(parts[2]), []).append(int(parts[1]))
    return [np.asarray(groups[i], dtype=np.int64) for i in sorted(groups)]
