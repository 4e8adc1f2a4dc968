"""Acceptance suite: one test per shipped claim, one printed verdict each.

The 256x256 layouts are built once per session and shared; run with
`pytest tests/test_acceptance.py -v -s` to watch the verdict lines.
"""

import math

import numpy as np
import pytest

import comesh
from comesh import (
    DamConfig,
    LayoutPermutation,
    Mesh,
    RelaxContext,
    SeparatorConfig,
    build_fb_tree,
    build_rb_tree_with_report,
    crossing_bound,
    find_separator,
    fully_balanced_partition,
    kway_partition,
    leaf_order,
    mesh_update,
    necklace_bisect,
    random_permutation_layout,
    relabel_mesh,
    serialize_layout,
    simulate_update,
)
from comesh.relax import verify_rb_records

from .conftest import brute_partition_counts, random_connected_subgraph
from .test_damsim import dense_matvec_oracle, random_mesh


def verdict(num, ok, detail):
    flag = "PASS" if ok else "FAIL"
    print(f"ACCEPTANCE {num:2d} {flag}  {detail}")
    assert ok, f"criterion {num}: {detail}"


@pytest.fixture(scope="module")
def grid256():
    return comesh.gen_grid2d(256)


@pytest.fixture(scope="module")
def fb_image_256(grid256):
    tree = build_fb_tree(grid256, SeparatorConfig())
    return serialize_layout(relabel_mesh(grid256, leaf_order(tree)))


@pytest.fixture(scope="module")
def rb_image_256(grid256):
    tree, _ = build_rb_tree_with_report(grid256, SeparatorConfig())
    return serialize_layout(relabel_mesh(grid256, leaf_order(tree)))


@pytest.fixture(scope="module")
def random_image_256(grid256):
    perm = random_permutation_layout(grid256, seed=1)
    return serialize_layout(relabel_mesh(grid256, perm))


@pytest.fixture(scope="module")
def fb_tree_64(grid64):
    return build_fb_tree(grid64, SeparatorConfig())


def test_c01_worked_example_golden():
    coords = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)]
    mesh = Mesh.from_edges(2, coords, [(0, 2, 1.0), (0, 3, 1.0), (1, 2, 1.0), (2, 3, 1.0)])
    out = relabel_mesh(mesh, LayoutPermutation.from_order([0, 2, 3, 1]))
    u, v, _ = out.half_edge_arrays()
    got = list(zip((u + 1).tolist(), (v + 1).tolist()))  # 1-based display labels
    want = [(1, 2), (1, 3), (2, 1), (2, 3), (2, 4), (3, 1), (3, 2), (4, 2)]
    verdict(1, got == want, f"forced-order relabel produced {got}")


def test_c02_necklace_exhaustive():
    bad = 0
    for n in range(1, 17):
        for bits in range(1 << n):
            colors = np.zeros(n, dtype=bool)
            for i in range(n):
                if (bits >> i) & 1:
                    colors[i] = True
            win = necklace_bisect(colors)
            blues = int(colors.sum())
            got = int(colors[win.start : win.stop].sum())
            if abs(2 * got - blues) > 1 or win.length != (n + 1) // 2:
                bad += 1
    verdict(2, bad == 0, f"all colorings of lengths 1..16 bisect within one ({bad} failures)")


def test_c03_fully_balanced_invariants(grid32, grid64):
    cfg = SeparatorConfig()
    rng = np.random.default_rng(12)
    b32, b64 = grid32.max_degree, grid64.max_degree
    worst_out = 0
    checked = 0
    for trial in range(500):
        mesh, b = (grid32, b32) if trial % 2 == 0 else (grid64, b64)
        size = int(rng.integers(10, 200))
        part = random_connected_subgraph(mesh, size, rng)
        fb = fully_balanced_partition(mesh, part, cfg, rng=np.random.default_rng(trial))
        n = len(part)
        assert fb.size_diff <= 1
        assert fb.outgoing_diff <= 2 * b + 1
        assert len(fb.crossing_edges) <= crossing_bound(cfg, 2, n)
        crossing, out_l, out_r = brute_partition_counts(mesh, fb.left_vertices, fb.right_vertices)
        assert crossing == len(fb.crossing_edges)
        assert (out_l, out_r) == (fb.outgoing_left, fb.outgoing_right)
        worst_out = max(worst_out, fb.outgoing_diff)
        checked += 1
    verdict(3, checked == 500, f"500 partitions within bounds (worst outgoing diff {worst_out})")


def test_c04_update_cost_tall_cache(fb_image_256, rb_image_256):
    ratios = {}
    for label, image in (("fb", fb_image_256), ("rb", rb_image_256)):
        for B in (8, 32, 128):
            res = simulate_update(image, DamConfig(B=B, M=4 * B * B))
            ratios[(label, B)] = res.ratio
    ok = all(r <= 10.0 for r in ratios.values())
    detail = ", ".join(f"{l}/B={B}: {r:.2f}" for (l, B), r in ratios.items())
    verdict(4, ok, f"update ratios at M=4B^2 (cap 10): {detail}")


def test_c05_baseline_separation(fb_image_256, random_image_256):
    # M = B^2 keeps the tall-cache regime without swallowing the whole
    # mesh (M = 4B^2 equals n here, which would cache both layouts fully)
    B = 128
    dam = DamConfig(B=B, M=B * B)
    t_fb = simulate_update(fb_image_256, dam).transfers
    t_rnd = simulate_update(random_image_256, dam).transfers
    margin = t_rnd / t_fb
    verdict(5, margin >= 5.0, f"random/fb transfer margin at B=128: {margin:.1f}x (need >= 5)")


def test_c06_scan_scaling(fb_image_256, random_image_256):
    dam = DamConfig(B=64, M=16384)
    cfg = SeparatorConfig()
    fb_ratios = {}
    rnd_ratios = {}
    for n_side in (64, 128):
        mesh = comesh.gen_grid2d(n_side)
        tree = build_fb_tree(mesh, cfg)
        img = serialize_layout(relabel_mesh(mesh, leaf_order(tree)))
        fb_ratios[n_side * n_side] = simulate_update(img, dam).ratio
        rnd = serialize_layout(relabel_mesh(mesh, random_permutation_layout(mesh, 1)))
        rnd_ratios[n_side * n_side] = simulate_update(rnd, dam).ratio
    fb_ratios[65536] = simulate_update(fb_image_256, dam).ratio
    rnd_ratios[65536] = simulate_update(random_image_256, dam).ratio
    spread = max(fb_ratios.values()) / min(fb_ratios.values())
    growth = rnd_ratios[65536] / rnd_ratios[4096]
    ok = spread <= 2.0 and growth >= 2.0
    verdict(
        6,
        ok,
        f"fb ratio spread across n: {spread:.2f}x (cap 2); random growth {growth:.1f}x (need >= 2)",
    )


def test_c07_small_cache_degradation(fb_image_256):
    B = 128
    ms = [4 * B * B, 2 * B * B, B * B, 8192, 4096, 2048, int(B**1.5), 1024, 512, 2 * B]
    ratios = {}
    for M in ms:
        ratios[M] = simulate_update(fb_image_256, DamConfig(B=B, M=M)).ratio
    monotone = all(ratios[ms[i]] <= ratios[ms[i + 1]] + 1e-12 for i in range(len(ms) - 1))
    factor = ratios[int(B**1.5)] / ratios[4 * B * B]
    cap = 4 * B**0.25
    ok = monotone and factor <= cap
    verdict(
        7,
        ok,
        f"monotone={monotone}; degradation ratio(B^1.5)/ratio(4B^2) = {factor:.2f} vs cap {cap:.2f}",
    )


def test_c08_separator_behavior(grid32):
    beta = SeparatorConfig().beta(2)
    n = grid32.n_vertices
    retries = []
    for seed in range(100):
        cfg = SeparatorConfig(seed=seed)
        res = find_separator(grid32, cfg=cfg)
        sides = np.bincount(res.side_of, minlength=2)
        assert sides.min() >= 1
        assert sides.max() <= math.ceil(beta * n)
        assert res.crossing_count <= cfg.c_cross * n ** 0.5
        retries.append(res.retries_used)
    mean = sum(retries) / len(retries)
    verdict(8, mean <= 4.0, f"mean retries over 100 seeds: {mean:.2f} (cap 4)")


def test_c09_kway(grid64):
    cfg = SeparatorConfig()
    ok = True
    details = []
    for k in (2, 3, 7, 16):
        partial = kway_partition(grid64, k, cfg)
        full = kway_partition(grid64, k, cfg, full_tree=True)
        sizes_p = [len(p) for p in partial]
        sizes_f = [len(p) for p in full]
        ok = ok and max(sizes_p) - min(sizes_p) <= 1 and sizes_p == sizes_f
        details.append(f"k={k}: {min(sizes_p)}..{max(sizes_p)}")
    verdict(9, ok, "; ".join(details))


def test_c10_relax_balanced_audits(grid64, fb_tree_64):
    cfg = SeparatorConfig()
    tree, records = build_rb_tree_with_report(grid64, cfg)
    ctx = RelaxContext.for_mesh(grid64, cfg)
    violations = verify_rb_records(records, ctx, grid64, cfg)
    max_refined = max(rec.refined_leaves for rec in records)
    dam = DamConfig(B=64, M=16384)
    t_rb = simulate_update(serialize_layout(relabel_mesh(grid64, leaf_order(tree))), dam).transfers
    t_fb = simulate_update(
        serialize_layout(relabel_mesh(grid64, leaf_order(fb_tree_64))), dam
    ).transfers
    rel = t_rb / t_fb
    ok = not violations and max_refined <= ctx.max_refined_leaves() and rel <= 1.25
    verdict(
        10,
        ok,
        f"{len(violations)} bound violations; refined leaves <= {max_refined} "
        f"(cap {ctx.max_refined_leaves():.0f}); rb/fb transfers {rel:.3f} (cap 1.25)",
    )


def test_c11_kernel_correctness():
    rng = np.random.default_rng(42)
    worst = 0.0
    for _ in range(100):
        mesh = random_mesh(int(rng.integers(2, 51)), rng)
        got = mesh_update(serialize_layout(mesh))
        want = dense_matvec_oracle(mesh)
        scale = max(1.0, float(np.abs(want).max()))
        worst = max(worst, float(np.abs(got - want).max()) / scale)
        perm = random_permutation_layout(mesh, 7)
        permuted = mesh_update(serialize_layout(relabel_mesh(mesh, perm)))
        reordered = np.empty_like(got)
        reordered[perm.new_position] = got
        worst = max(
            worst,
            float(np.abs(permuted - reordered).max()) / max(1.0, float(np.abs(got).max())),
        )
    verdict(11, worst <= 1e-12, f"kernel vs dense oracle, worst relative error {worst:.2e}")
