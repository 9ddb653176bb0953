import subprocess
import sys

import pytest

from gradiv.cli import UsageError, main, read_config
from gradiv.fespace import build_space
from gradiv.mesh import build_mesh


def run(capsys, *argv: str) -> tuple[int, str]:
    code = main(list(argv))
    return code, capsys.readouterr().out


def test_element_check_tet(capsys):
    code, out = run(capsys, "element-check", "--cell", "tet", "--k", "2", "--family", "all")
    assert code == 0
    assert [line.split(":")[1].split("(")[0].strip() for line in out.splitlines()] == ["dim 8", "dim 16", "dim 31"]
    assert all(line.startswith("PASS") for line in out.splitlines())


def test_element_check_hex(capsys):
    code, out = run(capsys, "element-check", "--cell", "hex", "--k", "2", "--family", "-1")
    assert code == 0 and "dim 14 " in out


@pytest.mark.parametrize("argv", [
    ["element-check", "--k", "1"],
    ["convergence", "--N", ""],
    ["convergence"],
    ["convergence", "--N", "8,4"],
    ["convergence", "--N", "4,4"],
    ["convergence", "--N", "0,2"],
    ["convergence", "--cell", "tet", "--h", "1/4"],
    ["convergence", "--cell", "hex", "--h", "0.3"],
    ["convergence", "--N", "2", "--h", "1/2"],
    ["convergence", "--N", "2", "--tol", "1e-3"],
    ["convergence", "--N", "2", "--format", "png"],
    ["convergence", "--N", "2", "--family", "2"],
    ["convergence", "--N", "2", "--solver", "lu"],
    ["superconvergence", "--cell", "tet", "--N", "2,4"],
    ["bogus"],
    [],
])
def test_usage_errors(capsys, argv):
    assert main(argv) == 2


def test_missing_config_is_usage_error(tmp_path):
    assert main(["element-check", "--config", str(tmp_path / "nope.cfg")]) == 2


def test_read_config(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\ncell = hex\nk=3  # trailing\n\nfamily=-1\n")
    assert read_config(str(cfg)) == ["--cell=hex", "--k=3", "--family=-1"]
    cfg.write_text("no equals sign\n")
    with pytest.raises(UsageError):
        read_config(str(cfg))
    cfg.write_text("config=other\n")
    with pytest.raises(UsageError):
        read_config(str(cfg))


def test_flags_override_config(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("cell=hex\nk=2\nfamily=all\n")
    code, out = run(capsys, "element-check", "--config", str(cfg), "--family", "-1")
    assert code == 0
    assert out.count("PASS hex r=1 k=2") == 1 and len(out.splitlines()) == 1


def test_complex_check(capsys):
    code, out = run(capsys, "complex-check", "--cell", "tet", "--N", "2", "--family", "-1")
    assert code == 0
    row = [c.strip() for c in out.splitlines()[2].split("|")[1:-1]]
    assert row[:4] == ["tet", "2", "1", "2"] and row[5] == "0" and row[-1] == "PASS"
    assert float(row[6]) == 0.0 and float(row[7]) == 0.0


def test_complex_check_hex_rank_div(capsys):
    code, out = run(capsys, "complex-check", "--cell", "hex", "--N", "2", "--family", "0")
    assert code == 0
    row = [c.strip() for c in out.splitlines()[2].split("|")[1:-1]]
    assert int(row[10]) == build_space("Sigma+", build_mesh("hex", 2), 2, 2).dim


def test_convergence_outputs(capsys, tmp_path):
    out_dir = tmp_path / "res"
    code, out = run(capsys, "convergence", "--cell", "tet", "--family", "-1", "--N", "2,4",
                    "--out", str(out_dir), "--format", "csv,md,dat")
    assert code == 0
    stem = out_dir / "convergence_tet_k2_r1"
    lines = (stem.with_suffix(".csv")).read_text().splitlines()
    assert lines[0] == "N,h,norm,value,rate"
    assert [ln.split(",")[2] for ln in lines[1:4]] == ["e", "div_e", "graddiv_e"]
    assert (stem.with_suffix(".md")).read_text().startswith("**tet, k=2, r=1 (family -1)**")
    assert (stem.with_suffix(".dat")).read_text().startswith("# h e div_e graddiv_e")
    assert not list(out_dir.glob("*.tmp"))


def test_csv_is_deterministic(capsys, tmp_path):
    argv = ["convergence", "--cell", "hex", "--family", "0", "--N", "2,3", "--format", "csv"]
    assert main(argv + ["--out", str(tmp_path / "a")]) == 0
    assert main(argv + ["--out", str(tmp_path / "b")]) == 0
    name = "convergence_hex_k2_r2.csv"
    assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_cg_solver_and_h_list(capsys, tmp_path):
    code, out = run(capsys, "convergence", "--cell", "hex", "--family", "-1", "--h", "1/2,1/4", "--solver", "cg",
                    "--out", str(tmp_path), "--format", "csv")
    assert code == 0 and "cg-jacobi" in out
    lines = (tmp_path / "convergence_hex_k2_r1.csv").read_text().splitlines()
    assert {ln.split(",")[2] for ln in lines[1:]} == {"e", "V_e", "div_e", "U_div_e", "graddiv_e", "W_graddiv_e"}
    assert lines[1].startswith("2,0.5,")


def test_degenerate_row_reported(capsys, tmp_path):
    code, out = run(capsys, "convergence", "--cell", "hex", "--family", "-1", "--N", "1,2",
                    "--out", str(tmp_path), "--format", "csv")
    assert code == 1
    assert "N=1: FAILED" in out and "N=2: " in out
    assert (tmp_path / "convergence_hex_k2_r1.csv").exists()


def test_superconvergence_needs_two_meshes(capsys, tmp_path):
    code, out = run(capsys, "superconvergence", "--cell", "hex", "--family", "-1", "--N", "2",
                    "--out", str(tmp_path))
    assert code == 1 and "needs two solved meshes" in out


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "gradiv", "element-check", "--cell", "hex", "--k", "2",
                           "--family", "-1"], capture_output=True, text=True, cwd=tmp_path)
    assert proc.returncode == 0 and proc.stdout.startswith("PASS")
    proc = subprocess.run([sys.executable, "-m", "gradiv", "element-check", "--k", "1"], capture_output=True,
                          text=True, cwd=tmp_path)
    assert proc.returncode == 2 and "k must be at least 2" in proc.stderr
