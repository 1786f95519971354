import numpy as np
import pytest

from gndg.meshgen import rectangle_mesh
from gndg.output import (format_summary, load_restart, read_gauge, save_restart, write_gauges, write_history,
                         write_vtk)
from gndg.solver import Simulation, SolverOptions
from gndg.space import DGSpace
from gndg.swe import make_bathymetry


def small_sim(n=4, k=2):
    space = DGSpace(rectangle_mesh(0, 1, 0, 1, n, n), k)
    bathy = make_bathymetry(space, lambda x, y: 0.1 * x, h0=1.0)
    W0 = np.zeros((3, space.K, space.Np))
    W0[0] = space.project(lambda x, y: 1.0 + 0.01 * np.exp(-20 * ((x - 0.5) ** 2 + (y - 0.5) ** 2)))
    return Simulation(space, bathy, W0, SolverOptions(breaking=False), gauges=[(0.5, 0.5), (0.2, 0.7)])


def test_vtk_layout(tmp_path):
    sim = small_sim()
    sim.step()
    path = tmp_path / "s.vtk"
    write_vtk(path, sim)
    text = path.read_text().splitlines()
    K = sim.space.K
    assert text[0].startswith("# vtk") and f"POINTS {3 * K} double" in text
    assert f"CELLS {K} {4 * K}" in text and f"CELL_DATA {K}" in text
    i = text.index("SCALARS eta double 1") + 2
    eta = np.array(text[i:i + 3 * K], dtype=float)
    # vertex values of element 0 match the nodal field at the vertex nodes
    x, y = sim.space.x[0], sim.space.y[0]
    verts = sim.space.mesh.vertices[sim.space.mesh.elements[0]]
    for j, v in enumerate(verts):
        node = np.argmin((x - v[0]) ** 2 + (y - v[1]) ** 2)
        assert eta[j] == pytest.approx(sim.W[0, 0, node], abs=1e-11)


def test_gauges_roundtrip(tmp_path):
    sim = small_sim()
    for _ in range(3):
        sim.step()
    paths = write_gauges(tmp_path / "g", sim.gauges)
    assert len(paths) == 2
    t, eta, qx, qy = read_gauge(paths[0])
    t0, e0, _, _ = sim.gauges[0].arrays()
    assert np.allclose(t, t0) and np.allclose(eta, e0, atol=1e-12)
    assert len(t) == sim.n_steps + 1
    t2, *_ = read_gauge(write_gauges(tmp_path / "h", sim.gauges, every=2)[0])
    assert np.allclose(t2, t0[::2])


def test_history_and_summary(tmp_path):
    sim = small_sim()
    sim.step()
    write_history(tmp_path / "h.csv", sim.history)
    data = np.loadtxt(tmp_path / "h.csv", delimiter=",", skiprows=1, ndmin=2)
    assert data.shape == (1, 5) and data[0, 0] == pytest.approx(sim.t)
    s = format_summary({"a": 1.5, "b": True, "c": 3, "d": None, "e": 'x"y'})
    assert '"a": 1.5,' in s and '"b": true' in s and '"d": null' in s and "x'y" in s


def test_restart_roundtrip(tmp_path):
    sim = small_sim()
    sim.step()
    save_restart(tmp_path / "r.npz", sim)
    W, t = sim.W.copy(), sim.t
    sim.step()
    fresh = small_sim()
    load_restart(tmp_path / "r.npz", fresh)
    assert np.array_equal(fresh.W, W) and fresh.t == t and fresh.n_steps == 1
    fresh.step()
    assert np.array_equal(fresh.W, sim.W)
    with pytest.raises(ValueError):
        load_restart(tmp_path / "r.npz", small_sim(n=5))
