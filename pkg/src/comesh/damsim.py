"""Two-level memory simulator for the mesh-update kernel.

The mesh is serialized as fixed-size vertex records in layout order; the
update touches, for each vertex in order, its own record's block and then
each neighbor's block.  An LRU cache of M/B block frames counts the
fetches.  B and M are measured in records, so the scan bound is exactly
1 + n/B.  Output writes are modeled as a separate non-cached stream and
cost nothing here.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .mesh import Mesh


@dataclass(frozen=True)
class DamConfig:
    """Block size B and cache capacity M, both counted in vertex records."""

    B: int
    M: int

    def __post_init__(self):
        if self.B < 1:
            raise ValueError("block size must be at least 1 record")
        if self.M < 2 * self.B:
            raise ValueError("cache must hold at least two blocks")

    @property
    def frames(self) -> int:
        return self.M // self.B


@dataclass
class MemoryImage:
    """Vertex records in layout order, padded to the degree bound.

    Every record occupies one record unit regardless of actual degree, so
    the image is exactly n records long.  Neighbor slots store layout
    positions (not original ids) plus edge weights; unused slots are -1.
    Coordinates ride along for round-tripping but are never charged.
    """

    dim: int
    degree_bound: int
    weights: np.ndarray
    coords: np.ndarray
    nbr_pos: np.ndarray
    nbr_weight: np.ndarray

    @property
    def n(self) -> int:
        return len(self.weights)


def serialize_layout(mesh: Mesh, degree_bound: Optional[int] = None) -> MemoryImage:
    """Pack a mesh into uniform records in its current vertex order."""
    b = mesh.max_degree if degree_bound is None else degree_bound
    if mesh.max_degree > b:
        raise ValueError(f"mesh degree {mesh.max_degree} exceeds record bound {b}")
    n = mesh.n_vertices
    nbr_pos = np.full((n, b), -1, dtype=np.int64)
    nbr_w = np.zeros((n, b), dtype=np.float64)
    degrees = mesh.degrees
    cols = np.concatenate([np.arange(d) for d in degrees]) if n else np.empty(0, int)
    rows = np.repeat(np.arange(n), degrees)
    nbr_pos[rows, cols] = mesh.indices
    nbr_w[rows, cols] = mesh.eweights
    return MemoryImage(
        dim=mesh.dim,
        degree_bound=b,
        weights=mesh.weights.copy(),
        coords=mesh.coords.copy(),
        nbr_pos=nbr_pos,
        nbr_weight=nbr_w,
    )


def image_to_mesh(image: MemoryImage) -> Mesh:
    """Rebuild the mesh a MemoryImage was serialized from."""
    n = image.n
    valid = image.nbr_pos >= 0
    u = np.repeat(np.arange(n, dtype=np.int64), valid.sum(axis=1))
    v = image.nbr_pos[valid]
    w = image.nbr_weight[valid]
    order = np.lexsort((v, u))
    u, v, w = u[order], v[order], w[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(u, minlength=n), out=indptr[1:])
    return Mesh(image.dim, image.coords.copy(), image.weights.copy(), indptr, v, w)


def mesh_update(image: MemoryImage) -> np.ndarray:
    """One update round: every weight becomes the edge-weighted neighbor sum.

    Double-buffered: all new weights are computed from the old vector, in
    neighbor-slot order per vertex.
    """
    pos = np.maximum(image.nbr_pos, 0)
    vals = image.weights[pos] * image.nbr_weight
    vals[image.nbr_pos < 0] = 0.0
    return vals.sum(axis=1)


def access_sequence(image: MemoryImage, block_size: int) -> np.ndarray:
    """Block ids touched by the update: home block, then neighbor blocks."""
    n = image.n
    full = np.concatenate(
        [np.arange(n, dtype=np.int64)[:, None], image.nbr_pos], axis=1
    ).ravel()
    return full[full >= 0] // block_size


@dataclass(frozen=True)
class SimResult:
    """Transfer count against the sequential-scan bound 1 + n/B."""

    transfers: int
    scan_bound: float

    @property
    def ratio(self) -> float:
        return self.transfers / self.scan_bound


def simulate_update(image: MemoryImage, cfg: DamConfig) -> SimResult:
    """Count LRU block fetches over the update's exact access sequence."""
    seq = access_sequence(image, cfg.B)
    frames = cfg.frames
    cache: OrderedDict = OrderedDict()
    misses = 0
    for blk in seq.tolist():
        if blk in cache:
            cache.move_to_end(blk)
        else:
            misses += 1
            if len(cache) >= frames:
                cache.popitem(last=False)
            cache[blk] = None
    return SimResult(transfers=misses, scan_bound=1.0 + image.n / cfg.B)


SWEEP_HEADER = "n,d,layout,B,M,transfers,scan_bound,ratio"


def sweep(images, Bs, Ms) -> list:
    """Cross-product sweep of simulate_update over labeled images.

    images is a sequence of (label, MemoryImage).  Combinations with
    M < 2B are skipped (they violate the cache-config invariant).
    Returns one row dict per simulation.
    """
    rows = []
    for label, image in images:
        for B in Bs:
            for M in Ms:
                if M < 2 * B:
                    continue
                res = simulate_update(image, DamConfig(B=B, M=M))
                rows.append(
                    {
                        "n": image.n,
                        "d": image.dim,
                        "layout": label,
                        "B": B,
                        "M": M,
                        "transfers": res.transfers,
                        "scan_bound": res.scan_bound,
                        "ratio": res.ratio,
                    }
                )
    return rows


def sweep_csv(rows) -> str:
    """Render sweep rows as CSV with exact integer transfer counts."""
    lines = [SWEEP_HEADER]
    for r in rows:
        lines.append(
            f"{r['n']},{r['d']},{r['layout']},{r['B']},{r['M']},"
            f"{r['transfers']},{r['scan_bound']:.10g},{r['ratio']:.10g}"
        )
    return "\n".join(lines) + "\n"
