import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gndg.boundary import SpongeLayer, UnpairedPeriodicFace, apply_sponge, ghost_trace, relaxation_profile
from gndg.meshgen import rectangle_mesh
from gndg.space import DGSpace
from gndg.swe import make_bathymetry
from gndg.waves import MonochromaticWave


@settings(max_examples=50, deadline=None)
@given(st.floats(0.1, 3), st.floats(-2, 2), st.floats(-2, 2), st.floats(0, 2 * np.pi))
def test_wall_ghost_mirrors_normal_discharge(eta, qx, qy, theta):
    nx, ny = np.cos(theta), np.sin(theta)
    Wm = np.array([eta, qx, qy])
    Wp, bp = ghost_trace(Wm, 0.1, nx, ny, "wall")
    assert Wp[0] == eta and bp == 0.1
    assert Wp[1] * nx + Wp[2] * ny == pytest.approx(-(qx * nx + qy * ny), abs=1e-13)
    assert -Wp[1] * ny + Wp[2] * nx == pytest.approx(-qx * ny + qy * nx, abs=1e-13)
    # mean of both sides has no normal mass flux
    assert (Wm[1] + Wp[1]) * nx + (Wm[2] + Wp[2]) * ny == pytest.approx(0.0, abs=1e-12)


def test_open_and_periodic_ghosts():
    Wm = np.array([1.0, 0.2, 0.3])
    Wp, bp = ghost_trace(Wm, 0.5, 1.0, 0.0, "open")
    assert np.array_equal(Wp, Wm) and Wp is not Wm
    partner = (np.array([2.0, 0.0, 0.1]), 0.2)
    Wp, bp = ghost_trace(Wm, 0.5, 1.0, 0.0, "periodic", partner=partner)
    assert np.array_equal(Wp, partner[0]) and bp == 0.2
    with pytest.raises(UnpairedPeriodicFace):
        ghost_trace(Wm, 0.5, 1.0, 0.0, "periodic")
    with pytest.raises(ValueError):
        ghost_trace(Wm, 0.5, 1.0, 0.0, "inflow")


def test_relaxation_profile():
    assert relaxation_profile(0.0) == 0.0
    assert relaxation_profile(1.0) == pytest.approx(1.0, abs=1e-15)
    s = np.linspace(0, 1, 101)
    assert np.all(np.diff(relaxation_profile(s)) >= 0)
    assert relaxation_profile(-1.0) == 0.0 and relaxation_profile(2.0) == pytest.approx(1.0)


def test_sponge_validation():
    with pytest.raises(ValueError):
        SpongeLayer(axis=2, inner=0, outer=1)
    with pytest.raises(ValueError):
        SpongeLayer(axis=0, inner=1, outer=1)
    with pytest.raises(ValueError):
        SpongeLayer(axis=0, inner=0, outer=1, mode="reflect")
    with pytest.raises(ValueError):
        SpongeLayer(axis=0, inner=0, outer=1, mode="generate")
    layer = SpongeLayer(axis=1, inner=2.0, outer=1.0, eta_rest=0.4)
    assert layer.width == 1.0
    assert layer.relative_depth(0.0, 1.0) == 1.0 and layer.relative_depth(0.0, 3.0) < 0
    assert np.allclose(layer.target(np.zeros(2), np.zeros(2), 0.0)[0], 0.4)


def test_apply_sponge():
    space = DGSpace(rectangle_mesh(0, 4, 0, 1, 8, 2), 2)
    bathy = make_bathymetry(space, lambda x, y: 0 * x + 0.2 * (x > 3.9), h0=1.0)
    W = np.zeros((3, space.K, space.Np))
    W[0] = 1.3
    W[1] = 0.5
    layer = SpongeLayer(axis=0, inner=3.0, outer=4.0, eta_rest=0.1)
    with pytest.raises(RuntimeError):
        apply_sponge(W, [layer], 0.0)
    layer.bind(space)
    Wn = apply_sponge(W, [layer], 0.0, bathy)
    inside = space.x < 3.0
    assert np.array_equal(Wn[:, inside], W[:, inside])
    edge = np.isclose(space.x, 4.0)
    # at the outer boundary the state equals the target, raised to the bed
    assert np.allclose(Wn[0][edge], np.maximum(0.1, bathy.b[edge]))
    assert np.allclose(Wn[1][edge], 0.0)
    assert apply_sponge(W, [], 0.0) is W


def test_generating_sponge_imposes_wave():
    space = DGSpace(rectangle_mesh(-2, 2, 0, 1, 8, 2), 2)
    wave = MonochromaticWave(amplitude=0.01, period=2.0, h0=0.4, eta_rest=0.0)
    layer = SpongeLayer(axis=0, inner=0.0, outer=-2.0, mode="generate", target=wave).bind(space)
    W = np.zeros((3, space.K, space.Np))
    Wn = apply_sponge(W, [layer], 0.7)
    edge = np.isclose(space.x, -2.0)
    tgt = wave(space.x[edge], space.y[edge], 0.7)
    assert np.allclose(Wn[0][edge], tgt[0]) and np.allclose(Wn[1][edge], tgt[1])
