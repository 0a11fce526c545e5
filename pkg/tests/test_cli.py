import json
import subprocess
import sys

import pytest

from bayespurify.cli import main
from bayespurify.fixtures import fixture
from bayespurify.game import save_game


def run(tmp_path, *argv):
    return main([*argv, "--out-dir", str(tmp_path)])


def test_fixtures_list(capsys):
    assert main(["fixtures", "list"]) == 0
    assert capsys.readouterr().out.split() == ["example1", "cournot", "allpay", "cyclic", "necessity"]


def test_solve_writes_outputs(tmp_path):
    assert run(tmp_path, "solve", "--fixture", "necessity", "--cells", "8") == 0
    doc = json.loads((tmp_path / "solve_report.json").read_text())
    assert doc["converged"] and max(doc["gaps"]) <= 1e-3
    header = (tmp_path / "strategy.csv").read_text().splitlines()[0]
    assert header == "player,cell_index,action_index,probability"


def test_solve_nonconvergence_exit_code(tmp_path):
    assert run(tmp_path, "solve", "--fixture", "cournot",
               "--tol", "1e-12", "--max-iters", "3") == 1
    doc = json.loads((tmp_path / "solve_report.json").read_text())
    assert not doc["converged"] and doc["iterations"] == 3


def test_purify_from_solved_strategy(tmp_path):
    assert run(tmp_path, "solve", "--fixture", "necessity", "--cells", "8") == 0
    code = run(tmp_path, "purify", "--fixture", "necessity", "--cells", "8",
               "--profile", str(tmp_path / "strategy.csv"))
    assert code in (0, 1)
    doc = json.loads((tmp_path / "purify_report.json").read_text())
    assert doc["verification"]["passed"] == (code == 0)
    assert (tmp_path / "pure_strategy.csv").exists()


def test_purify_canonical(tmp_path):
    assert run(tmp_path, "purify", "--fixture", "necessity", "--profile", "canonical",
               "--purify-tol", "1e-9") == 0


def test_verify_dcpi(tmp_path):
    assert run(tmp_path, "verify-dcpi", "--fixture", "example1", "--cells", "16") == 0
    assert json.loads((tmp_path / "dcpi_report.json").read_text())["passed"]
    assert run(tmp_path, "verify-dcpi", "--fixture", "example1", "--cells", "16", "--identity") == 1


def test_probe_security(tmp_path):
    assert run(tmp_path, "probe-security", "--fixture", "allpay", "--samples", "300") == 0
    assert json.loads((tmp_path / "security_report.json").read_text())["violations"] == 0
    assert run(tmp_path, "probe-security", "--fixture", "cyclic") == 2


@pytest.mark.parametrize("argv", [
    ["solve"],
    ["solve", "--fixture", "nope"],
    ["solve", "--fixture", "cyclic", "--param", "colour=1"],
    ["solve", "--fixture", "cyclic", "--param", "noequals"],
    ["solve", "--game", "/nonexistent/game.json"],
    ["solve", "--fixture", "dominant", "--damping", "0"],
    ["solve", "--fixture", "dominant", "--threads", "0"],
])
def test_invalid_input_exit_2(tmp_path, argv):
    assert run(tmp_path, *argv) == 2


def test_wrong_shape_profile_exit_2(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("player,cell_index,action_index,probability\n0,999,0,1.0\n")
    assert run(tmp_path, "purify", "--fixture", "necessity", "--profile", str(bad)) == 2
    assert run(tmp_path, "purify", "--fixture", "necessity", "--profile", str(tmp_path / "none.csv")) == 2
    assert run(tmp_path, "purify", "--fixture", "dominant", "--profile", "canonical") == 2


def test_missing_decomposition_exit_3(tmp_path):
    assert run(tmp_path, "purify", "--fixture", "example1", "--cells", "16", "--identity") == 3
    assert run(tmp_path, "verify-dcpi", "--fixture", "cyclic") == 3


def test_game_file_input(tmp_path):
    f = fixture("necessity", cells_per_coarse=8)
    path = tmp_path / "g.json"
    save_game(f.game, path)
    assert run(tmp_path, "solve", "--game", str(path)) == 0


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "bayespurify", "fixtures", "list"],
                         capture_output=True, text=True, timeout=120)
    assert res.returncode == 0 and "necessity" in res.stdout


def test_out_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("BAYESPURIFY_OUT_DIR", str(tmp_path / "env"))
    assert main(["verify-dcpi", "--fixture", "necessity", "--cells", "8"]) == 0
    assert (tmp_path / "env" / "dcpi_report.json").exists()
