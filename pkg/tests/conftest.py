import numpy as np
import pytest

import comesh


@pytest.fixture(scope="session")
def grid16():
    return comesh.gen_grid2d(16)


@pytest.fixture(scope="session")
def grid32():
    return comesh.gen_grid2d(32)


@pytest.fixture(scope="session")
def grid64():
    return comesh.gen_grid2d(64)


@pytest.fixture(scope="session")
def cfg():
    return comesh.SeparatorConfig()


def random_connected_subgraph(mesh, size, rng):
    """Vertex set grown by breadth-first search from a random start."""
    start = int(rng.integers(mesh.n_vertices))
    seen = {start}
    frontier = [start]
    order = [start]
    while frontier and len(order) < size:
        v = frontier.pop(0)
        nbrs, _ = mesh.neighbors(v)
        for u in nbrs.tolist():
            if u not in seen:
                seen.add(u)
                order.append(u)
                frontier.append(u)
                if len(order) >= size:
                    break
    return np.asarray(order[:size], dtype=np.int64)


def brute_partition_counts(mesh, left, right):
    """Independent recount of crossing and outgoing edges of a bipartition."""
    side = {}
    for v in np.asarray(left).tolist():
        side[v] = 0
    for v in np.asarray(right).tolist():
        side[v] = 1
    crossing = 0
    out_left = 0
    out_right = 0
    for u, v, _ in mesh.edges():
        su, sv = side.get(u), side.get(v)
        if su is None and sv is None:
            continue
        if su is not None and sv is not None:
            if su != sv:
                crossing += 1
        elif su is not None:
            out_left += su == 0
            out_right += su == 1
        else:
            out_left += sv == 0
            out_right += sv == 1
    return crossing, out_left, out_right
