import numpy as np
import pytest

import comesh
from comesh import SeparatorConfig, build_fb_tree, meshes_equal, validate_mesh
from comesh.cli import main
from comesh.io import (
    MeshFormatError,
    emit_layout_file,
    emit_mesh_file,
    emit_parts_file,
    emit_tree_file,
    mesh_from_string,
    mesh_to_string,
    parse_layout_file,
    parse_mesh_file,
    parse_parts_file,
    parse_tree_file,
    tree_from_dump,
)
from comesh.layout import LayoutPermutation, random_permutation_layout


def test_mesh_roundtrip_small():
    m = comesh.gen_grid2d(2)
    text = mesh_to_string(m)
    lines = text.splitlines()
    assert lines[0] == "comesh 1 2 4 5"
    assert meshes_equal(mesh_from_string(text), m)


def test_mesh_roundtrip_jittered_reals():
    m = comesh.gen_grid2d(5, jitter=0.25, seed=3)
    assert meshes_equal(mesh_from_string(mesh_to_string(m)), m)


def test_mesh_roundtrip_3d():
    m = comesh.gen_grid3d(2)
    assert meshes_equal(mesh_from_string(mesh_to_string(m)), m)


def test_parse_errors_carry_line_numbers():
    with pytest.raises(MeshFormatError, match="line 1"):
        mesh_from_string("comesh 2 2 1 0\n")
    good = "comesh 1 2 4 5"
    vs = "\n".join(f"v {i} {i}.0 0.0 1.0" for i in range(4))
    # edge endpoint out of range on the first edge line (line 6)
    with pytest.raises(MeshFormatError, match="line 6"):
        mesh_from_string(f"{good}\n{vs}\ne 0 9 1.0\ne 0 1 1.0\ne 1 2 1.0\ne 2 3 1.0\ne 0 2 1.0\n")
    with pytest.raises(MeshFormatError, match="duplicate vertex"):
        mesh_from_string("comesh 1 2 2 0\nv 0 0.0 0.0 1.0\nv 0 1.0 0.0 1.0\n")
    with pytest.raises(MeshFormatError, match="self-loop"):
        mesh_from_string(
            "comesh 1 2 2 1\nv 0 0.0 0.0 1.0\nv 1 1.0 0.0 1.0\ne 1 1 1.0\n"
        )


def test_header_valid_shape():
    text = "comesh 1 2 4 5\n" + "\n".join(
        f"v {i} {float(i)} 0.0 1.0" for i in range(4)
    ) + "\ne 0 1 1.0\ne 1 2 1.0\ne 2 3 1.0\ne 0 2 1.0\ne 0 3 1.0\n"
    mesh = mesh_from_string(text)
    assert mesh.n_vertices == 4 and mesh.n_edges == 5


def test_layout_file_roundtrip(tmp_path):
    perm = LayoutPermutation(np.array([2, 0, 3, 1]))
    path = tmp_path / "p.layout"
    emit_layout_file(perm, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "colayout 1 4"
    back = parse_layout_file(path)
    np.testing.assert_array_equal(back.new_position, perm.new_position)


def test_tree_dump_roundtrip(grid16, cfg, tmp_path):
    tree = build_fb_tree(grid16, cfg)
    path = tmp_path / "t.tree"
    emit_tree_file(tree, path)
    bits, owners, flags = parse_tree_file(path)
    rebuilt = tree_from_dump(bits, owners, 2, cfg.beta(2), cfg.c_cross)
    assert np.array_equal(rebuilt.leaf_array, tree.leaf_array)
    assert rebuilt.vertex_id == tree.vertex_id
    assert rebuilt.edge_owner == tree.edge_owner
    assert rebuilt.node_range == tree.node_range
    assert flags == {}


def test_relax_tree_dump_carries_leaf_flags(grid16, tmp_path):
    from comesh import RelaxContext, build_relax_partition_tree

    ctx = RelaxContext(global_n=grid16.n_vertices, beta=0.8)
    tree = build_relax_partition_tree(
        grid16, None, ctx, upper_depth=2, small_threshold=0.0, refine_limit=1e18
    )
    path = tmp_path / "r.tree"
    emit_tree_file(tree, path)
    _, _, flags = parse_tree_file(path)
    assert len(flags) == len(tree.leaves)
    assert set(flags.values()) == {False}


def test_cut_csv_row():
    mesh = comesh.gen_grid2d(6)
    res = comesh.find_separator(mesh, cfg=SeparatorConfig(seed=1))
    row = res.cut.to_csv_row()
    assert row.startswith("cut,") and row.split(",")[1] in ("sphere", "hyperplane")
    assert len(row.split(",")) == 2 + 2 + 1  # kind + d coords + radius/offset


def test_parts_file_roundtrip(tmp_path):
    parts = [np.array([0, 2]), np.array([1, 3, 4])]
    path = tmp_path / "parts.txt"
    emit_parts_file(parts, path)
    back = parse_parts_file(path)
    assert [p.tolist() for p in back] == [p.tolist() for p in parts]


# -- CLI ----------------------------------------------------------------------


def test_cli_gen_and_verify_roundtrip(tmp_path, capsys):
    mesh_path = str(tmp_path / "m.mesh")
    assert main(["gen", "grid2d", "--n", "2", "-o", mesh_path]) == 0
    assert main(["verify", "--what", "mesh", mesh_path]) == 0
    m = parse_mesh_file(mesh_path)
    assert m.n_vertices == 4 and m.n_edges == 5


def test_cli_gen_grid3d(tmp_path):
    mesh_path = str(tmp_path / "m3.mesh")
    assert main(["gen", "grid3d", "--n", "2", "-o", mesh_path]) == 0
    assert parse_mesh_file(mesh_path).dim == 3


def test_cli_unknown_subcommand_exits_2():
    with pytest.raises(SystemExit) as err:
        main(["frobnicate"])
    assert err.value.code == 2
    with pytest.raises(SystemExit) as err:
        main(["gen", "grid2d", "--n", "2", "--bogus-flag", "-o", "x"])
    assert err.value.code == 2


def test_cli_verify_rejects_invalid_mesh(tmp_path):
    bad = tmp_path / "bad.mesh"
    bad.write_text("comesh 1 2 1 0\nv 0 nan 0.0 1.0\n")
    assert main(["verify", "--what", "mesh", str(bad)]) == 1


def test_cli_layout_force_order_reproduces_worked_example(tmp_path, capsys):
    mesh_path = tmp_path / "g.mesh"
    text = (
        "comesh 1 2 4 4\n"
        "v 0 0.0 0.0 1.0\n"
        "v 1 1.0 0.0 2.0\n"
        "v 2 0.0 1.0 3.0\n"
        "v 3 1.0 1.0 4.0\n"
        "e 0 2 1.0\ne 0 3 1.0\ne 1 2 1.0\ne 2 3 1.0\n"
    )
    mesh_path.write_text(text)
    out_layout = str(tmp_path / "o.layout")
    out_mesh = str(tmp_path / "o.mesh")
    code = main(
        [
            "layout",
            str(mesh_path),
            "--force-order",
            "0,2,3,1",
            "-o",
            out_layout,
            "--emit-mesh",
            out_mesh,
        ]
    )
    assert code == 0
    relabeled = parse_mesh_file(out_mesh)
    u, v, _ = relabeled.half_edge_arrays()
    assert list(zip(u.tolist(), v.tolist())) == [
        (0, 1), (0, 2), (1, 0), (1, 2), (1, 3), (2, 0), (2, 1), (3, 1)
    ]
    perm = parse_layout_file(out_layout)
    assert perm.new_position.tolist() == [0, 3, 1, 2]


def test_cli_layout_and_verify_tree_kinds(tmp_path):
    mesh_path = str(tmp_path / "m.mesh")
    main(["gen", "grid2d", "--n", "8", "-o", mesh_path])
    layout_path = str(tmp_path / "m.layout")
    tree_path = str(tmp_path / "m.tree")
    for algo, what in (("fb", "fb"), ("rb", "rb"), ("geo", "tree")):
        assert (
            main(
                [
                    "layout",
                    mesh_path,
                    "--algo",
                    algo,
                    "--seed",
                    "1",
                    "-o",
                    layout_path,
                    "--dump-tree",
                    tree_path,
                ]
            )
            == 0
        )
        assert main(["verify", "--what", what, mesh_path, tree_path]) == 0


def test_cli_verify_flags_corrupted_tree(tmp_path):
    mesh_path = str(tmp_path / "m.mesh")
    main(["gen", "grid2d", "--n", "6", "-o", mesh_path])
    layout_path = str(tmp_path / "m.layout")
    tree_path = tmp_path / "m.tree"
    main(["layout", mesh_path, "--algo", "geo", "-o", layout_path, "--dump-tree", str(tree_path)])
    lines = tree_path.read_text().splitlines()
    # drop an ownership record: the edge loses its owner
    dropped = next(i for i, l in enumerate(lines) if l.startswith("o "))
    tree_path.write_text("\n".join(lines[:dropped] + lines[dropped + 1 :]) + "\n")
    assert main(["verify", "--what", "tree", mesh_path, str(tree_path)]) == 1


def test_cli_simulate_row(tmp_path, capsys):
    mesh_path = str(tmp_path / "m.mesh")
    main(["gen", "grid2d", "--n", "8", "-o", mesh_path])
    capsys.readouterr()
    assert main(["simulate", mesh_path, "--B", "8", "--M", "64"]) == 0
    row = capsys.readouterr().out.strip().splitlines()
    assert len(row) == 1
    fields = row[0].split(",")
    assert fields[0] == "64" and fields[3] == "8" and fields[4] == "64"
    assert int(fields[5]) >= 8


def test_cli_simulate_with_layout_file(tmp_path, capsys):
    mesh_path = str(tmp_path / "m.mesh")
    main(["gen", "grid2d", "--n", "8", "-o", mesh_path])
    layout_path = str(tmp_path / "m.layout")
    main(["layout", mesh_path, "--algo", "fb", "-o", layout_path])
    capsys.readouterr()
    assert main(["simulate", mesh_path, "--B", "8", "--M", "64", "--layout", layout_path]) == 0
    out = capsys.readouterr().out.strip()
    assert out.count("\n") == 0 and layout_path in out


def test_cli_sweep(tmp_path, capsys):
    mesh_path = str(tmp_path / "m.mesh")
    main(["gen", "grid2d", "--n", "8", "-o", mesh_path])
    capsys.readouterr()
    code = main(
        ["sweep", mesh_path, "--B-list", "4,8", "--M-list", "32,64", "--layouts", "fb,random,none"]
    )
    assert code == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "n,d,layout,B,M,transfers,scan_bound,ratio"
    assert len(lines) == 1 + 3 * 4


def test_cli_kway(tmp_path, capsys):
    mesh_path = str(tmp_path / "m.mesh")
    main(["gen", "grid2d", "--n", "6", "-o", mesh_path])
    parts_path = str(tmp_path / "m.parts")
    assert main(["kway", mesh_path, "--k", "5", "-o", parts_path]) == 0
    parts = parse_parts_file(parts_path)
    sizes = sorted(len(p) for p in parts)
    assert len(parts) == 5 and sizes[-1] - sizes[0] <= 1
    assert sorted(v for p in parts for v in p.tolist()) == list(range(36))


def test_cli_stats(tmp_path, capsys):
    mesh_path = str(tmp_path / "m.mesh")
    main(["gen", "grid2d", "--n", "4", "-o", mesh_path])
    capsys.readouterr()
    assert main(["stats", mesh_path]) == 0
    out = capsys.readouterr().out.strip().splitlines()
    assert out[0] == "span,count"
    total = sum(int(line.split(",")[1]) for line in out[1:])
    assert total == 33  # every edge counted once


def test_cli_missing_file_is_runtime_error():
    assert main(["verify", "--what", "mesh", "/nonexistent/x.mesh"]) == 1
