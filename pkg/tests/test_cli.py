import numpy as np

from rtrecovery.cli import (RUN_DEFAULTS, RunConfig, _merge_options,
                            _read_config_file, build_parser, main)
from rtrecovery.mesh import unit_square_mesh, write_mesh_text


def run_main(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


# -- parsing and option merging -----------------------------------------------


def test_parser_subcommands():
    parser = build_parser()
    args = parser.parse_args(["run", "--problem", "3", "--r", "2"])
    assert args.command == "run"
    assert args.problem == 3 and args.r == 2
    assert args.levels is None  # unset flags must not shadow config values
    args = parser.parse_args(["verify", "--samples", "120"])
    assert args.command == "verify"
    assert args.samples == 120


def test_config_file_layering(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment only line\nproblem = 2\nr = 3\nmax-ndof = 5e4\n")
    parsed = _read_config_file(cfg)
    assert parsed == {"problem": "2", "r": "3", "max_ndof": "5e4"}

    parser = build_parser()
    args = parser.parse_args(["run", "--config", str(cfg), "--r", "1"])
    merged = _merge_options(args, RUN_DEFAULTS)
    assert merged["problem"] == 2      # from the file
    assert merged["r"] == 1            # explicit flag wins over the file
    assert merged["max_ndof"] == 5e4
    assert merged["levels"] == RUN_DEFAULTS["levels"]


def test_unknown_config_key_fails(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("order = 2\n")
    code, _, err = run_main(["run", "--config", str(cfg)], capsys)
    assert code == 1
    assert "unknown config key" in err


def test_malformed_config_line_fails(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("problem 2\n")
    code, _, err = run_main(["run", "--config", str(cfg)], capsys)
    assert code == 1
    assert "expected key=value" in err


def test_run_config_validation():
    good = RunConfig(**RUN_DEFAULTS)
    good.validate()
    assert good.resolved_refine() == "regular"
    assert RunConfig(**{**RUN_DEFAULTS, "problem": 3}).resolved_refine() == "adaptive"


# -- run subcommand -----------------------------------------------------------


def test_run_writes_outputs(tmp_path, capsys):
    out = tmp_path / "results"
    code, stdout, _ = run_main(
        ["run", "--problem", "1", "--r", "0", "--levels", "2",
         "--out", str(out)], capsys)
    assert code == 0
    assert (out / "table.csv").is_file()
    assert (out / "orders.txt").is_file()
    assert (out / "convergence.svg").is_file()
    lines = (out / "table.csv").read_text().splitlines()
    assert lines[0] == "level,nt,ndof,e_p,e_div,e_close,e_rec,e_u,eta,efficiency"
    assert len(lines) == 3
    assert lines[1].split(",")[1] == "86"
    assert lines[2].split(",")[1] == "344"
    assert "fitted orders" in stdout
    assert (out / "convergence.svg").read_text().lstrip().startswith("<?xml")


def test_run_deterministic(tmp_path, capsys):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        code, _, _ = run_main(
            ["run", "--problem", "1", "--r", "0", "--levels", "2",
             "--out", str(out)], capsys)
        assert code == 0
        outs.append((out / "table.csv").read_bytes())
    assert outs[0] == outs[1]


def test_run_with_mesh_file(tmp_path, capsys):
    mesh = unit_square_mesh(40, seed=3)
    path = tmp_path / "mesh.txt"
    write_mesh_text(mesh, path)
    out = tmp_path / "results"
    code, _, _ = run_main(
        ["run", "--problem", "1", "--r", "0", "--levels", "1",
         "--mesh", str(path), "--out", str(out)], capsys)
    assert code == 0
    row = (out / "table.csv").read_text().splitlines()[1].split(",")
    assert int(row[1]) == mesh.num_triangles


def test_run_adaptive_default_for_singular_problem(tmp_path, capsys):
    out = tmp_path / "adaptive"
    code, stdout, _ = run_main(
        ["run", "--problem", "3", "--r", "0", "--max-ndof", "1500",
         "--out", str(out)], capsys)
    assert code == 0
    rows = (out / "table.csv").read_text().splitlines()[1:]
    ndofs = [int(r.split(",")[2]) for r in rows]
    assert len(ndofs) >= 2
    assert all(b > a for a, b in zip(ndofs, ndofs[1:]))


def test_run_rejects_bad_levels(capsys):
    code, _, err = run_main(["run", "--levels", "0"], capsys)
    assert code == 1
    assert "level count" in err


# -- verify subcommand --------------------------------------------------------


def test_verify_passes_and_prints_table(capsys):
    code, stdout, _ = run_main(["verify", "--samples", "40", "--seed", "3"], capsys)
    assert code == 0
    lines = stdout.splitlines()
    assert lines[0].split() == ["check", "max", "residual", "tolerance", "status"]
    body = [l for l in lines[1:] if l.strip()]
    assert len(body) == 7
    assert all(l.split()[-1] == "pass" for l in body)


def test_verify_config_file(tmp_path, capsys):
    cfg = tmp_path / "verify.cfg"
    cfg.write_text("samples = 30\nseed = 11\n")
    code, stdout, _ = run_main(["verify", "--config", str(cfg)], capsys)
    assert code == 0
