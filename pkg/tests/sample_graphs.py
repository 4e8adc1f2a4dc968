"""Hand-built 8-vertex sample graph with a known decomposition tree.

Vertices carry 1-based display labels 1..8 mapped to indices 0..7.  The
tree splits {1,6,5,7} | {2,4,8,3}, then {1,6} | {5,7} and {2,4,8} | {3},
and so on; leaf ids follow that structure.  Optional boundary vertices
realize a prescribed count of outgoing edges per sample vertex.
"""

import numpy as np

from comesh import DecompTree, Mesh
from comesh.decomp import BitId

# 1-based undirected edges of the sample graph
SAMPLE_EDGES = [(1, 2), (1, 5), (1, 6), (2, 3), (2, 4), (2, 8), (3, 8), (4, 7), (4, 8), (6, 7)]

SAMPLE_COORDS = {
    1: (1.58, -2.31),
    2: (1.94, -1.35),
    3: (3.20, -1.43),
    4: (2.44, -2.21),
    5: (0.76, -1.64),
    6: (1.33, -3.09),
    7: (2.05, -3.32),
    8: (3.60, -2.42),
}

LEAF_ORDER = [1, 6, 5, 7, 2, 4, 8, 3]

LEAF_BITS = {
    1: "000",
    6: "001",
    5: "010",
    7: "011",
    2: "100",
    4: "1010",
    8: "1011",
    3: "11",
}


def sample_mesh(outer_counts=None):
    """The sample graph, plus boundary vertices when outer_counts is given.

    outer_counts maps 1-based labels to the number of edges the vertex
    should have toward the outside of the 8-vertex part.  Returns
    (mesh, part) where part indexes the sample vertices.
    """
    coords = [SAMPLE_COORDS[i] for i in range(1, 9)]
    edges = [(u - 1, v - 1, 1.0) for u, v in SAMPLE_EDGES]
    n_extra = 0
    if outer_counts:
        n_extra = max(outer_counts.values())
        for i in range(n_extra):
            coords.append((10.0 + i, 0.0))
        for label, count in outer_counts.items():
            for k in range(count):
                edges.append((label - 1, 8 + k, 1.0))
    mesh = Mesh.from_edges(2, np.asarray(coords), edges)
    return mesh, np.arange(8, dtype=np.int64)


def sample_tree(mesh) -> DecompTree:
    """The known decomposition tree of the sample part, assembled by hand."""
    leaf_array = np.asarray([v - 1 for v in LEAF_ORDER], dtype=np.int64)
    vertex_id = {v - 1: BitId.from_string(bits) for v, bits in LEAF_BITS.items()}
    edge_owner = {}
    for u1, v1 in SAMPLE_EDGES:
        bu, bv = LEAF_BITS[u1], LEAF_BITS[v1]
        k = 0
        while k < min(len(bu), len(bv)) and bu[k] == bv[k]:
            k += 1
        edge_owner[(u1 - 1, v1 - 1)] = BitId.from_string(bu[:k]) if k else BitId()
    node_range = {}
    for pos, bits in enumerate(LEAF_BITS[v] for v in LEAF_ORDER):
        for k in range(len(bits) + 1):
            node = BitId.from_string(bits[:k]) if k else BitId()
            start, length = node_range.get(node, (pos, 0))
            node_range[node] = (min(start, pos), length + 1)
    return DecompTree(
        dim=2,
        beta=0.8,
        c_cross=6.0,
        leaf_array=leaf_array,
        vertex_id=vertex_id,
        edge_owner=edge_owner,
        node_range=node_range,
    )
