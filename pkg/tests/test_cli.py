import io
import subprocess
import sys

import numpy as np
import pytest

from stochfem.cli import main
from stochfem.config import ConfigError, RunConfig, builtin_configs, load_config, parse_config
from stochfem.mesh import write_mesh
from stochfem.postproc import read_error_csv, read_levelset_csv, read_moment_csv

SMALL = """
[mesh]
nx = 4
ny = 4
[model]
delta = {delta}
[scheme]
tau = 0.01
n_steps = 6
[ensemble]
samples = {samples}
seed = {seed}
[initial]
kind = {kind}
epsilon = 0.3
[output]
dir = {out}
snapshots = {snaps}
"""


def write_cfg(tmp_path, name="c.ini", delta=1.0, samples=3, seed=5, kind="test1", out=None, snaps="0 6"):
    out = tmp_path / "out" if out is None else out
    p = tmp_path / name
    p.write_text(SMALL.format(delta=delta, samples=samples, seed=seed, kind=kind, out=out, snaps=snaps))
    return p


def run(*args):
    buf = io.StringIO()
    code = main(list(args), out=buf)
    return code, buf.getvalue()


def test_builtin_configs_parse():
    names = builtin_configs()
    for want in ("test1_small", "test1_paper", "test2", "test3", "test4", "test5"):
        assert want in names
    for n in names:
        assert isinstance(load_config(n), RunConfig)


def test_mesh_check_default():
    code, out = run("mesh-check")
    assert code == 0 and "PASS" in out


def test_mesh_check_non_delaunay(tmp_path, non_delaunay_mesh, capsys):
    write_mesh(non_delaunay_mesh, tmp_path / "bad.mesh")
    (tmp_path / "c.ini").write_text(f"[mesh]\nmesh_file = {tmp_path / 'bad.mesh'}\n")
    code, out = run("mesh-check", "--config", str(tmp_path / "c.ini"))
    assert code == 1
    assert "FAIL" in out and "violating edge 0 1" in out


def test_mesh_check_zero_cells(tmp_path, capsys):
    (tmp_path / "c.ini").write_text("[mesh]\nnx = 0\n")
    code, _ = run("mesh-check", "--config", str(tmp_path / "c.ini"))
    assert code == 2
    assert "nx" in capsys.readouterr().err


def test_usage_errors(tmp_path, capsys):
    (tmp_path / "a.ini").write_text("[mesh]\ncolour = red\n")
    assert run("mesh-check", "--config", str(tmp_path / "a.ini"))[0] == 2
    (tmp_path / "b.ini").write_text("[widgets]\nx = 1\n")
    assert run("mesh-check", "--config", str(tmp_path / "b.ini"))[0] == 2
    assert run("mesh-check", "--config", str(tmp_path / "missing.ini"))[0] == 2
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_mismatched_level_tau_rejected():
    with pytest.raises(ConfigError):
        parse_config("[mesh]\nlevel_taus = 1e-6 2e-6\n[scheme]\ntau = 1e-6\n")
    assert parse_config("[mesh]\nlevel_taus = 1e-6 1e-6\n[scheme]\ntau = 1e-6\n").tau == 1e-6


def test_model_validation_exit_1(tmp_path, capsys):
    (tmp_path / "c.ini").write_text("[model]\ndrift = template\ncoefficients = 1 -1\n")
    assert run("solve", "--config", str(tmp_path / "c.ini"), "--out", str(tmp_path))[0] == 1


def test_stability_rows(tmp_path):
    cfg = write_cfg(tmp_path)
    code, out = run("stability", "--config", str(cfg))
    assert code == 0
    data = read_moment_csv(tmp_path / "out" / "moments.csv")
    assert len(data["step"]) == 7


def test_stability_without_noise_matches_solve(tmp_path):
    cfg = write_cfg(tmp_path, delta=0.0, samples=4)
    assert run("stability", "--config", str(cfg), "--out", str(tmp_path / "a"))[0] == 0
    assert run("solve", "--config", str(cfg), "--out", str(tmp_path / "b"))[0] == 0
    a = read_moment_csv(tmp_path / "a" / "moments.csv")
    b = read_moment_csv(tmp_path / "b" / "moments.csv")
    np.testing.assert_array_equal(a["E_H1sq"], b["E_H1sq"])
    np.testing.assert_array_equal(a["E_H1sq_se"], 0.0)
    sol = (tmp_path / "b" / "solution.csv").read_text().splitlines()
    assert sol[0] == "x,y,u" and len(sol) == 26


def test_test5_interface(tmp_path):
    code, out = run("stability", "--config", "test5", "--samples", "2", "--out", str(tmp_path))
    assert code == 0
    cfg = load_config("test5")
    assert cfg.diffusion == "sqrt_shift"
    assert len(read_moment_csv(tmp_path / "moments.csv")["step"]) == cfg.resolved_steps() + 1


def test_convergence_two_rows(tmp_path):
    code, out = run("convergence", "--config", "test1_small", "--out", str(tmp_path))
    assert code == 0
    rows = read_error_csv(tmp_path / "errors.csv")
    assert len(rows) == 2
    assert rows[0].orders == (None, None, None)
    assert all(o is not None for o in rows[1].orders)


def test_levelset_step0_is_circle(tmp_path):
    cfg = tmp_path / "ls.ini"
    cfg.write_text(
        "[mesh]\nnx = 50\nny = 50\n[scheme]\ntau = 1e-3\nn_steps = 1\n"
        f"[initial]\nkind = test2\nepsilon = 0.04\n[output]\ndir = {tmp_path}\nsnapshots = 0 1\n"
    )
    code, out = run("levelset", "--config", str(cfg))
    assert code == 0
    seg = read_levelset_csv(tmp_path / "levelset_0.csv")
    r = np.linalg.norm(seg.reshape(-1, 2), axis=1)
    assert len(seg) > 50 and np.mean(np.abs(r - 0.6)) < 0.04
    assert (tmp_path / "levelset_1.csv").exists()


def test_levelset_constant_ic_empty(tmp_path):
    cfg = write_cfg(tmp_path, kind="constant:1")
    assert run("levelset", "--config", str(cfg))[0] == 0
    for s in (0, 6):
        assert (tmp_path / "out" / f"levelset_{s}.csv").read_text() == "x1,y1,x2,y2\n"


def test_levelset_snapshot_out_of_range(tmp_path):
    cfg = write_cfg(tmp_path, snaps="0 7")
    assert run("levelset", "--config", str(cfg))[0] == 2


def test_flag_precedence(tmp_path):
    cfg = write_cfg(tmp_path, samples=3, seed=5)
    # --samples beats the file
    _, out = run("stability", "--config", str(cfg), "--samples", "2", "--out", str(tmp_path / "s"))
    assert out.startswith("2 samples")
    _, out = run("stability", "--config", str(cfg), "--out", str(tmp_path / "f"))
    assert out.startswith("3 samples")
    # --seed beats the file: same bytes as a file that names that seed
    run("stability", "--config", str(cfg), "--seed", "9", "--out", str(tmp_path / "x"))
    cfg9 = write_cfg(tmp_path, name="c9.ini", samples=3, seed=9)
    run("stability", "--config", str(cfg9), "--out", str(tmp_path / "y"))
    x = (tmp_path / "x" / "moments.csv").read_bytes()
    assert x == (tmp_path / "y" / "moments.csv").read_bytes()
    assert x != (tmp_path / "f" / "moments.csv").read_bytes()
    # --out beats the file; the file beats the default
    assert (tmp_path / "s" / "moments.csv").exists()
    run("stability", "--config", str(cfg))
    assert (tmp_path / "out" / "moments.csv").exists()
    assert RunConfig().samples == 10 and load_config(cfg).samples == 3


def test_workers_do_not_change_output(tmp_path):
    cfg = write_cfg(tmp_path, samples=6)
    run("stability", "--config", str(cfg), "--workers", "1", "--out", str(tmp_path / "w1"))
    run("stability", "--config", str(cfg), "--workers", "3", "--out", str(tmp_path / "w3"))
    assert (tmp_path / "w1" / "moments.csv").read_bytes() == (tmp_path / "w3" / "moments.csv").read_bytes()


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "stochfem", "mesh-check"], capture_output=True, text=True)
    assert res.returncode == 0 and "level 0" in res.stdout
