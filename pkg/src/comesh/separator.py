"""Randomized geometric sphere separator for well-shaped meshes.

Vertices are lifted onto the unit sphere in R^(d+1) by stereographic
projection; an approximate centerpoint of a sample steers a conformal map
(rotation plus dilation) that recenters the point cloud, and a random
great circle of the mapped sphere is pulled back to a d-sphere or
hyperplane cut in the original space.  Candidate cuts are retried until
both the balance and the crossing-count targets hold.

Everything is deterministic given the configured seed.  Calls on disjoint
vertex subsets are independent and may run concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import lapack as _scipy_lapack

from .mesh import Mesh

_lapack_gesdd = _scipy_lapack.dgesdd


class RetriesExhausted(RuntimeError):
    """No acceptable cut within the retry budget.

    Signals a miscalibrated crossing constant or pathological geometry.
    """


@dataclass
class SeparatorConfig:
    """Tuning knobs for the separator and everything built on top of it.

    epsilon sets the balance target (d+1+epsilon)/(d+2); c_cross is the
    constant in the accepted crossing bound c_cross * n^(1-1/d).
    """

    epsilon: float = 0.2
    sample_size: int = 200
    c_cross: float = 6.0
    max_retries: int = 64
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.epsilon < 1.0):
            raise ValueError("epsilon must lie in (0, 1)")
        if self.c_cross <= 0.0:
            raise ValueError("c_cross must be positive")
        if self.max_retries < 1:
            raise ValueError("max_retries must be at least 1")
        if self.sample_size < 4:
            raise ValueError("sample_size too small")

    def beta(self, dim: int) -> float:
        """Balance fraction: each accepted side holds at most beta * n vertices."""
        return (dim + 1 + self.epsilon) / (dim + 2)

    def alpha(self, dim: int) -> float:
        """Exponent of the crossing bound, 1 - 1/d."""
        return 1.0 - 1.0 / dim

    def crossing_limit(self, dim: int, n: int) -> float:
        return self.c_cross * n ** self.alpha(dim)


@dataclass(frozen=True)
class SeparatorCut:
    """A d-sphere (center, radius) or hyperplane (normal, offset) in R^d.

    Side 0 is the closed inside / lower halfspace; points exactly on the
    surface are assigned inside, which keeps classification deterministic.
    """

    kind: str  # "sphere" | "hyperplane"
    center: Optional[np.ndarray] = None
    radius: Optional[float] = None
    normal: Optional[np.ndarray] = None
    offset: Optional[float] = None

    def side_of_points(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.float64)
        if self.kind == "sphere":
            d2 = np.sum((pts - self.center) ** 2, axis=1)
            return (d2 > self.radius * self.radius).astype(np.int8)
        return (pts @ self.normal > self.offset).astype(np.int8)

    def contains(self, pt) -> bool:
        return bool(self.side_of_points(np.asarray(pt)[None, :])[0] == 0)

    def to_csv_row(self) -> str:
        """`cut,<kind>,<center...>,<radius>` row for plotting tools."""
        if self.kind == "sphere":
            fields = [format(c, ".17g") for c in self.center] + [
                format(self.radius, ".17g")
            ]
        else:
            fields = [format(c, ".17g") for c in self.normal] + [
                format(self.offset, ".17g")
            ]
        return ",".join(["cut", self.kind] + fields)


@dataclass
class SeparatorResult:
    """Accepted cut plus the vertex sides it induces.

    side_of is aligned with the part array passed to find_separator;
    cut is None when the small-subset enumeration branch produced the
    split.  retries_used counts failed candidate cuts before acceptance.
    """

    cut: Optional[SeparatorCut]
    side_of: np.ndarray
    crossing_count: int
    retries_used: int


# -- stereographic lift ----------------------------------------------------


def stereo_project(points) -> np.ndarray:
    """Lift points of R^d onto the unit sphere in R^(d+1).

    x maps to (2x, |x|^2 - 1) / (|x|^2 + 1): the origin goes to the south
    pole and |x| -> inf approaches the north pole, so the map is a
    bijection onto the sphere minus the north pole.
    """
    pts = np.asarray(points, dtype=np.float64)
    single = pts.ndim == 1
    if single:
        pts = pts[None, :]
    sq = np.sum(pts * pts, axis=1)
    denom = sq + 1.0
    out = np.empty((pts.shape[0], pts.shape[1] + 1), dtype=np.float64)
    out[:, :-1] = 2.0 * pts / denom[:, None]
    out[:, -1] = (sq - 1.0) / denom
    return out[0] if single else out


# -- approximate centerpoint ------------------------------------------------


def _radon_points(groups: np.ndarray) -> np.ndarray:
    """Radon point of each group of n+2 points in R^n, batched.

    A nonzero affine dependence splits each group in two subsets whose
    convex hulls intersect; the returned point lies in that intersection.
    """
    k, g, n = groups.shape
    sys = np.empty((k, n + 1, g), dtype=np.float64)
    sys[:, :n, :] = np.transpose(groups, (0, 2, 1))
    sys[:, n, :] = 1.0
    # right-singular vector of the smallest singular value spans the null space
    if k <= 3:
        lam = np.empty((k, g), dtype=np.float64)
        for i in range(k):
            _, _, vt, info = _lapack_gesdd(sys[i])
            if info != 0:
                _, _, vh = np.linalg.svd(sys[i])
                vt = vh
            lam[i] = vt[-1]
    else:
        _, _, vh = np.linalg.svd(sys)
        lam = vh[:, -1, :]
    # the dependence sums to zero, so both sign choices yield the same point
    pos = np.maximum(lam, 0.0)
    pos_sum = pos.sum(axis=1)
    pos_sum[pos_sum == 0.0] = 1.0
    return np.einsum("kg,kgn->kn", pos, groups) / pos_sum[:, None]


def _iterated_radon(points: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    n = pts.shape[1]
    group = n + 2
    pool = pts
    while len(pool) >= group:
        perm = rng.permutation(len(pool))
        k = len(pool) // group
        grouped = pool[perm[: k * group]].reshape(k, group, n)
        rest = pool[perm[k * group :]]
        pool = np.concatenate([_radon_points(grouped), rest], axis=0)
    return pool.mean(axis=0)


def approx_centerpoint(points, seed=0) -> np.ndarray:
    """Approximate centerpoint of a point sample by iterated Radon points.

    Random groups of n+2 points are repeatedly replaced by their Radon
    point until few points remain; the survivors are averaged.  Every
    halfspace containing the result covers roughly a 1/(n+1) fraction of
    the sample.  Deterministic given the seed.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] < pts.shape[1] + 2:
        raise ValueError("need at least n+2 sample points in R^n")
    if np.ptp(pts, axis=0).max(initial=0.0) == 0.0:
        return pts[0].copy()
    return _iterated_radon(pts, rng)


# -- conformal recentering ---------------------------------------------------


@dataclass(frozen=True)
class ConformalMap:
    """Orthogonal rotation of the sphere followed by a stereographic dilation."""

    rotation: np.ndarray  # (d+1, d+1), sends the centerpoint direction to +e_last
    alpha: float  # dilation factor applied in the projection plane

    def apply(self, sphere_pts: np.ndarray) -> np.ndarray:
        """Map points on the unit sphere through rotation + dilation."""
        pts = np.asarray(sphere_pts, dtype=np.float64)
        single = pts.ndim == 1
        if single:
            pts = pts[None, :]
        rot = pts @ self.rotation.T
        plane = rot[:, :-1] / (1.0 - rot[:, -1])[:, None] * self.alpha
        out = stereo_project(plane)
        return out[0] if single else out


def conformal_map(centerpoint) -> ConformalMap:
    """Conformal sphere map that rebalances a cloud around its centerpoint.

    The rotation takes the centerpoint to (0, ..., 0, r) with r = |cp|;
    the dilation factor sqrt((1-r)/(1+r)) then drags the sphere circle at
    height r onto the equator, so random great circles of the image split
    the original cloud evenly.
    """
    cp = np.asarray(centerpoint, dtype=np.float64)
    r = math.sqrt(float(cp @ cp))
    if r >= 1.0:
        raise ValueError("centerpoint must lie strictly inside the unit ball")
    m = len(cp)
    rot = np.eye(m)
    if r > 1e-15:
        # Householder reflection swapping cp/r and e_last
        v = cp / r
        v[-1] -= 1.0
        vnorm = float(v @ v)
        if vnorm > 1e-30:
            rot -= (2.0 / vnorm) * np.outer(v, v)
    alpha = math.sqrt((1.0 - r) / (1.0 + r))
    return ConformalMap(rotation=rot, alpha=alpha)


def great_circle_to_cut(normal, cmap: ConformalMap) -> SeparatorCut:
    """Pull a great circle of the mapped sphere back to a cut in R^d.

    The preimage under dilation, rotation, and stereographic projection is
    computed in closed form.  It is a d-sphere except when the circle
    passes through the projection pole, where it degenerates to a
    hyperplane.
    """
    nvec = np.asarray(normal, dtype=np.float64)
    norm = math.sqrt(float(nvec @ nvec))
    if norm == 0.0:
        raise ValueError("great-circle normal must be nonzero")
    nvec = nvec / norm
    a = cmap.alpha
    nz = float(nvec[-1])
    # great circle n.w = 0 pulled through the dilation becomes the sphere
    # circle A.v = off on the rotated sphere
    plane = np.empty(len(nvec))
    plane[:-1] = (2.0 * a) * nvec[:-1]
    plane[-1] = nz * (a * a + 1.0)
    off = nz * (1.0 - a * a)
    back = cmap.rotation.T @ plane
    ay, az = back[:-1], float(back[-1])
    denom = az - off
    if abs(denom) <= 1e-12:
        scale = math.sqrt(float(ay @ ay))
        return SeparatorCut(
            kind="hyperplane", normal=ay / scale, offset=(az + off) / (2.0 * scale)
        )
    return SeparatorCut(
        kind="sphere",
        center=-ay / denom,
        radius=2.0 * a / abs(denom),
    )


# -- the separator proper -----------------------------------------------------


def _induced_edges(mesh: Mesh, part: np.ndarray):
    eu, ev, _ = mesh.edge_arrays()
    inside = np.zeros(mesh.n_vertices, dtype=bool)
    inside[part] = True
    keep = inside[eu] & inside[ev]
    return eu[keep], ev[keep]


_POP8 = np.array([bin(i).count("1") for i in range(256)], dtype=np.int64)
_PAR8 = (_POP8 & 1).astype(np.int64)
_SIDE8 = ((np.arange(256)[:, None] >> np.arange(8)[None, :]) & 1).astype(np.int8)
_BIG = np.int64(2**62)
_MASK_CACHE: dict = {}


def _mask_tables(n: int, cap: int):
    """Enumeration tables for n <= 8: masks with local vertex 0 on side 0,
    pre-penalized for imbalance, with out-of-balance masks knocked out."""
    cached = _MASK_CACHE.get((n, cap))
    if cached is None:
        masks = np.arange(2, 1 << n, 2, dtype=np.int64)
        sizes = _POP8[masks]
        base = np.abs(2 * sizes - n)
        bad = (sizes < max(1, n - cap)) | (sizes > min(cap, n - 1))
        base = np.where(bad, _BIG, base)
        cached = (masks, base, bool((~bad).any()))
        _MASK_CACHE[(n, cap)] = cached
    return cached


def _brute_force_split(part, eu, ev, beta, limit):
    """Minimum-crossing balanced bipartition by mask enumeration (n <= 8).

    Ties go to the most balanced candidate, then the smallest mask.
    """
    n = len(part)
    cap = math.ceil(beta * n)
    local = {int(v): i for i, v in enumerate(part.tolist())}
    edge_masks = [
        (1 << local[u]) | (1 << local[v]) for u, v in zip(eu.tolist(), ev.tolist())
    ]
    if n <= 4 or len(edge_masks) <= 3:
        # tiny case: plain python beats array setup
        lo_size = max(1, n - cap)
        hi_size = min(cap, n - 1)
        best = None
        pop = _POP8
        for mask in range(2, 1 << n, 2):
            size = int(pop[mask])
            if size < lo_size or size > hi_size:
                continue
            cross = 0
            for em in edge_masks:
                cross += int(_PAR8[mask & em])
            score = (cross, abs(2 * size - n), mask)
            if best is None or score < best:
                best = score
        if best is None:
            raise RetriesExhausted(f"no balanced bipartition of {n} vertices")
        best_cross, _, mask = best
    else:
        masks, key_base, feasible = _mask_tables(n, cap)
        if not feasible:
            raise RetriesExhausted(f"no balanced bipartition of {n} vertices")
        em = np.asarray(edge_masks, dtype=np.int64)
        crossing = _PAR8[masks[:, None] & em[None, :]].sum(axis=1)
        pick = int(np.argmin(crossing * (4 * n) + key_base))
        best_cross = int(crossing[pick])
        mask = int(masks[pick])
    if best_cross > limit:
        raise RetriesExhausted(
            f"best balanced cut crosses {best_cross} > limit {limit:.3g}"
        )
    return _SIDE8[mask, :n].copy(), best_cross


def find_separator(
    mesh: Mesh,
    part: Optional[np.ndarray] = None,
    cfg: Optional[SeparatorConfig] = None,
    rng: Optional[np.random.Generator] = None,
    *,
    proj: Optional[np.ndarray] = None,
    part_edges=None,
    side_buf: Optional[np.ndarray] = None,
) -> SeparatorResult:
    """Split a vertex subset by an accepted geometric cut.

    A candidate is accepted when each side holds at most ceil(beta * n)
    vertices, both sides are nonempty, and at most c_cross * n^(1-1/d)
    induced edges cross.  Each trial draws a fresh sample and a fresh
    great circle; one trial is a single linear scan of the subset.
    Subsets of at most 8 vertices skip straight to exact enumeration.

    proj / part_edges / side_buf let tree builders share precomputed
    projections, induced edge arrays (global ids), and a full-length side
    scratch buffer; on return side_buf[part] holds the accepted sides.
    """
    cfg = cfg or SeparatorConfig()
    if part is None:
        part = np.arange(mesh.n_vertices, dtype=np.int64)
    else:
        part = np.asarray(part, dtype=np.int64)
    n = len(part)
    if n < 2:
        raise ValueError("cannot separate fewer than 2 vertices")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    if part_edges is None:
        eu, ev = _induced_edges(mesh, part)
    else:
        eu, ev = part_edges
    if side_buf is None:
        side_buf = np.empty(mesh.n_vertices, dtype=np.int8)

    d = mesh.dim
    beta = cfg.beta(d)
    limit = cfg.crossing_limit(d, n)

    if n <= 8:
        side, crossing = _brute_force_split(part, eu, ev, beta, limit)
        side_buf[part] = side
        return SeparatorResult(cut=None, side_of=side, crossing_count=crossing, retries_used=0)

    pts = mesh.coords[part]
    if proj is None:
        lifted = stereo_project(pts)
    else:
        lifted = proj[part]
    cap = math.ceil(beta * n)
    m = min(cfg.sample_size, n)

    for trial in range(cfg.max_retries):
        if m < n:
            sample = lifted[rng.choice(n, size=m, replace=False)]
        else:
            sample = lifted
        cp = _iterated_radon(sample, rng)
        if float(cp @ cp) >= (1.0 - 1e-12) ** 2:
            continue
        cmap = conformal_map(cp)
        normal = rng.normal(size=d + 1)
        if float(normal @ normal) < 1e-24:
            continue
        cut = great_circle_to_cut(normal, cmap)
        side = cut.side_of_points(pts)
        n0 = int(np.count_nonzero(side == 0))
        n1 = n - n0
        if n0 == 0 or n1 == 0 or max(n0, n1) > cap:
            continue
        side_buf[part] = side
        crossing = int(np.count_nonzero(side_buf[eu] != side_buf[ev]))
        if crossing > limit:
            continue
        return SeparatorResult(
            cut=cut, side_of=side, crossing_count=crossing, retries_used=trial
        )
    raise RetriesExhausted(
        f"no acceptable cut for {n} vertices after {cfg.max_retries} trials"
    )
