"""Command-line front door: generate, layout, simulate, audit, k-way.

Exit codes: 0 success, 1 runtime failure or audit violation, 2 usage
error.  All randomness of a subcommand flows from its --seed.  CSV goes
to stdout, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import io as cio
from .balanced import kway_partition, verify_fb_tree, window_crossing_factor
from .damsim import DamConfig, serialize_layout, simulate_update, sweep, sweep_csv
from .decomp import verify_tree
from .layout import (
    LayoutPermutation,
    layout_stats,
    layout_tree,
    leaf_order,
    random_permutation_layout,
    relabel_mesh,
)
from .mesh import gen_grid2d, gen_grid3d, validate_mesh
from .relax import RelaxContext, verify_rb_tree
from .separator import SeparatorConfig


class CliError(RuntimeError):
    pass


def _sep_config(args) -> SeparatorConfig:
    return SeparatorConfig(
        epsilon=args.epsilon,
        sample_size=args.sample_size,
        c_cross=args.c_cross,
        max_retries=args.max_retries,
        seed=args.seed,
    )


def _add_sep_options(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=0, help="root seed (default 0)")
    p.add_argument("--epsilon", type=float, default=0.2, help="balance slack")
    p.add_argument("--c-cross", dest="c_cross", type=float, default=6.0,
                   help="crossing-bound constant")
    p.add_argument("--sample-size", dest="sample_size", type=int, default=200)
    p.add_argument("--max-retries", dest="max_retries", type=int, default=64)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="comesh", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic mesh")
    p.add_argument("family", choices=["grid2d", "grid3d"])
    p.add_argument("--n", type=int, required=True, help="vertices per side")
    p.add_argument("--jitter", type=float, default=0.0, help="grid2d only")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("layout", help="compute a vertex layout")
    p.add_argument("mesh")
    p.add_argument("--algo", choices=["fb", "rb", "geo"], default="fb")
    p.add_argument("-o", "--output", required=True, help="layout file")
    p.add_argument("--emit-mesh", help="also write the relabeled mesh")
    p.add_argument("--dump-tree", help="also write the decomposition tree")
    p.add_argument("--force-order",
                   help="comma-separated leaf order of old ids (testing)")
    _add_sep_options(p)

    p = sub.add_parser("simulate", help="run one cache simulation")
    p.add_argument("mesh")
    p.add_argument("--B", type=int, required=True, help="block size, in records")
    p.add_argument("--M", type=int, required=True, help="cache size, in records")
    p.add_argument("--layout", help="layout file applied before simulating")

    p = sub.add_parser("sweep", help="cross-product of simulations, CSV out")
    p.add_argument("mesh")
    p.add_argument("--B-list", dest="b_list", required=True)
    p.add_argument("--M-list", dest="m_list", required=True)
    p.add_argument("--layouts", default="fb",
                   help="comma list of fb,rb,geo,random,none")
    _add_sep_options(p)

    p = sub.add_parser("verify", help="audit an artifact; exit 1 on violation")
    p.add_argument("--what", choices=["mesh", "tree", "fb", "rb"], required=True)
    p.add_argument("files", nargs="+",
                   help="mesh file, plus a tree dump for tree/fb/rb")
    p.add_argument("--global-n", dest="global_n", type=int,
                   help="top-level mesh size for rb bounds (defaults to n)")
    _add_sep_options(p)

    p = sub.add_parser("kway", help="k-way partition of near-equal blocks")
    p.add_argument("mesh")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--full-tree", action="store_true",
                   help="build the whole tree instead of the partial one")
    _add_sep_options(p)

    p = sub.add_parser("stats", help="edge-span histogram of a layout")
    p.add_argument("mesh")
    p.add_argument("layout", nargs="?", help="layout file; identity if omitted")
    return ap


def _load_mesh(path):
    try:
        return cio.parse_mesh_file(path)
    except FileNotFoundError:
        raise CliError(f"cannot open {path}")


def _cmd_gen(args) -> int:
    if args.family == "grid2d":
        mesh = gen_grid2d(args.n, args.jitter, args.seed)
    else:
        if args.jitter:
            raise CliError("grid3d does not take --jitter")
        mesh = gen_grid3d(args.n)
    cio.emit_mesh_file(mesh, args.output)
    print(f"wrote {mesh.n_vertices} vertices, {mesh.n_edges} edges to {args.output}",
          file=sys.stderr)
    return 0


def _cmd_layout(args) -> int:
    mesh = _load_mesh(args.mesh)
    cfg = _sep_config(args)
    tree = None
    if args.force_order:
        order = [int(x) for x in args.force_order.split(",")]
        if sorted(order) != list(range(mesh.n_vertices)):
            raise CliError("--force-order must list every vertex id exactly once")
        perm = LayoutPermutation.from_order(np.asarray(order))
    else:
        tree = layout_tree(mesh, args.algo, cfg)
        perm = leaf_order(tree)
    cio.emit_layout_file(perm, args.output)
    if args.dump_tree:
        if tree is None:
            raise CliError("--dump-tree is meaningless with --force-order")
        cio.emit_tree_file(tree, args.dump_tree)
    if args.emit_mesh:
        cio.emit_mesh_file(relabel_mesh(mesh, perm), args.emit_mesh)
    return 0


def _cmd_simulate(args) -> int:
    mesh = _load_mesh(args.mesh)
    label = "as-is"
    if args.layout:
        perm = cio.parse_layout_file(args.layout)
        mesh = relabel_mesh(mesh, perm)
        label = args.layout
    image = serialize_layout(mesh)
    res = simulate_update(image, DamConfig(B=args.B, M=args.M))
    print(f"{image.n},{image.dim},{label},{args.B},{args.M},"
          f"{res.transfers},{res.scan_bound:.10g},{res.ratio:.10g}")
    return 0


def _cmd_sweep(args) -> int:
    mesh = _load_mesh(args.mesh)
    cfg = _sep_config(args)
    bs = [int(x) for x in args.b_list.split(",")]
    ms = [int(x) for x in args.m_list.split(",")]
    images = []
    for kind in args.layouts.split(","):
        kind = kind.strip()
        if kind == "none":
            laid = mesh
        elif kind == "random":
            laid = relabel_mesh(mesh, random_permutation_layout(mesh, args.seed))
        elif kind in ("fb", "rb", "geo"):
            laid = relabel_mesh(mesh, leaf_order(layout_tree(mesh, kind, cfg)))
        else:
            raise CliError(f"unknown layout kind {kind!r}")
        images.append((kind, serialize_layout(laid)))
    sys.stdout.write(sweep_csv(sweep(images, bs, ms)))
    return 0


def _cmd_verify(args) -> int:
    mesh = _load_mesh(args.files[0])
    cfg = _sep_config(args)
    if args.what == "mesh":
        report = validate_mesh(mesh)
        for issue in report.issues:
            print(f"violation: {issue}", file=sys.stderr)
        print(f"mesh: n={report.n_vertices} edges={report.n_edges} "
              f"b={report.max_degree} valid={report.valid}", file=sys.stderr)
        return 0 if report.valid else 1
    if len(args.files) < 2:
        raise CliError(f"verify --what {args.what} needs a mesh and a tree dump")
    vertex_bits, edge_owner, _ = cio.parse_tree_file(args.files[1])
    tree = cio.tree_from_dump(
        vertex_bits, edge_owner, mesh.dim, cfg.beta(mesh.dim), cfg.c_cross
    )
    factor = 1.0
    if args.what in ("fb", "rb"):
        factor = window_crossing_factor(cfg, mesh.dim)
    audit = verify_tree(tree, mesh, cfg, crossing_factor=factor)
    violations = list(audit.violations)
    if args.what == "fb":
        extra, _stats = verify_fb_tree(tree, mesh)
        violations += extra
    elif args.what == "rb":
        ctx = RelaxContext(
            global_n=args.global_n or mesh.n_vertices, beta=cfg.beta(mesh.dim)
        )
        extra, _stats = verify_rb_tree(tree, mesh, ctx)
        violations += extra
    for vi in violations:
        print(f"violation: {vi}", file=sys.stderr)
    print(f"tree: nodes={audit.n_nodes} depth={audit.depth} "
          f"violations={len(violations)}", file=sys.stderr)
    return 0 if not violations else 1


def _cmd_kway(args) -> int:
    mesh = _load_mesh(args.mesh)
    parts = kway_partition(mesh, args.k, _sep_config(args), full_tree=args.full_tree)
    cio.emit_parts_file(parts, args.output)
    sizes = [len(p) for p in parts]
    print(f"wrote {args.k} parts, sizes {min(sizes)}..{max(sizes)}", file=sys.stderr)
    return 0


def _cmd_stats(args) -> int:
    mesh = _load_mesh(args.mesh)
    if args.layout:
        mesh = relabel_mesh(mesh, cio.parse_layout_file(args.layout))
    report = layout_stats(mesh)
    print("span,count")
    for span, count in report.histogram():
        print(f"{span},{count}")
    print(f"mean={report.mean:.6g} median={report.median:.6g} p99={report.p99:.6g}",
          file=sys.stderr)
    return 0


_COMMANDS = {
    "gen": _cmd_gen,
    "layout": _cmd_layout,
    "simulate": _cmd_simulate,
    "sweep": _cmd_sweep,
    "verify": _cmd_verify,
    "kway": _cmd_kway,
    "stats": _cmd_stats,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (CliError, cio.MeshFormatError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
