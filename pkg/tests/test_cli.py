import subprocess
import sys

import numpy as np
import pytest

from gndg.cli import EXIT_ABORT, EXIT_CONFIG, EXIT_OK, main
from gndg.mesh import save_mesh
from gndg.meshgen import rectangle_mesh

CFG = """
[scenario]
bathymetry = flat
initial = gaussian
[initial]
a = 0.05
xc = 0.5
yc = 0.5
length = 0.2
[mesh]
type = rectangle
x0 = 0
x1 = 1
y0 = 0
y1 = 1
nx = 4
ny = 4
[physics]
h0 = 1.0
[discretization]
k = 1
[time]
t_max = 0.004
[gauges]
points = 0.5 0.5
"""


@pytest.fixture
def cfg(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text(CFG)
    return p


def test_basis_info(capsys):
    assert main(["basis", "info", "-k", "2"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "node_coordinates:" in out
    rows = out.split("node_coordinates:")[1].strip().splitlines()
    assert len(rows) == 6


def test_bad_degree_exit_code(capsys):
    assert main(["basis", "info", "-k", "7"]) == EXIT_CONFIG
    assert "outside" in capsys.readouterr().err


def test_mesh_check(tmp_path, capsys):
    p = tmp_path / "m.tri"
    save_mesh(rectangle_mesh(0, 1, 0, 1, 3, 3), p)
    assert main(["mesh", "check", str(p)]) == EXIT_OK
    assert "18" in capsys.readouterr().out
    assert main(["mesh", "check", str(tmp_path / "none.tri")]) == EXIT_CONFIG


def test_operator_stats(cfg, tmp_path, capsys):
    dump = tmp_path / "A.mtx"
    assert main(["operator", "stats", str(cfg), "--dump", str(dump)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "unknowns: 96" in out and "fill_ratio" in out
    assert dump.exists()


def test_run_writes_artifacts(cfg, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", str(cfg), "--out", str(out)]) == EXIT_OK
    text = capsys.readouterr().out
    assert '"completed": true' in text
    for name in ("summary.txt", "history.csv", "restart.npz", "gauges/gauge_00.csv", "snapshot_0000.vtk"):
        assert (out / name).exists()


def test_run_config_error(cfg, capsys):
    assert main(["run", str(cfg), "--set", "discretization.k=9"]) == EXIT_CONFIG


def test_run_numerical_abort(cfg, tmp_path):
    # a fixed step far above the stability limit drives a cell mean negative
    code = main(["run", str(cfg), "--out", str(tmp_path / "o"), "--no-snapshots",
                 "--set", "discretization.dt=0.5", "--set", "time.t_max=2"])
    assert code == EXIT_ABORT
    assert (tmp_path / "o" / "abort_state.npz").exists()


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "gndg.cli", "basis", "info", "-k", "1"], capture_output=True, text=True)
    assert r.returncode == 0 and "node_coordinates" in r.stdout
