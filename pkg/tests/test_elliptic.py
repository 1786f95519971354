import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gndg.elliptic import assemble_diff_matrices, assemble_elliptic_operator, upwind_sign
from gndg.meshgen import delaunay_rectangle_mesh, rectangle_mesh
from gndg.space import DGSpace

ALPHA = 1.159


def deep_interior(mesh, layers=2):
    """Elements whose distance (in face hops) to the physical boundary is >= layers."""
    near = np.any(mesh.neighbor < 0, axis=1)
    for _ in range(layers - 1):
        nb = np.where(mesh.neighbor >= 0, mesh.neighbor, 0)
        near = near | np.any(near[nb] & (mesh.neighbor >= 0), axis=1)
    return ~near


@pytest.mark.parametrize("k", [1, 2, 3])
def test_first_derivative_exact_interior(k):
    mesh = delaunay_rectangle_mesh(0, 1, 0, 1, 0.2, seed=3)
    space = DGSpace(mesh, k)
    D = assemble_diff_matrices(space)
    inner = deep_interior(mesh, 1)
    x, y = space.x, space.y
    for a in range(k + 1):
        for b in range(k + 1 - a):
            u = x ** a * y ** b
            ux = a * x ** max(a - 1, 0) * y ** b
            uy = b * x ** a * y ** max(b - 1, 0)
            assert np.abs(D.dx(u) - ux)[inner].max() < 1e-10
            assert np.abs(D.dy(u) - uy)[inner].max() < 1e-10


@pytest.mark.parametrize("k", [2, 3])
def test_second_derivative_exact_interior(k):
    mesh = delaunay_rectangle_mesh(0, 1, 0, 1, 0.15, seed=5)
    space = DGSpace(mesh, k)
    D = assemble_diff_matrices(space)
    inner = deep_interior(mesh, 2)
    x, y = space.x, space.y
    for a in range(k + 1):
        for b in range(k + 1 - a):
            u = x ** a * y ** b
            uxx = a * (a - 1) * x ** max(a - 2, 0) * y ** b
            uyy = b * (b - 1) * x ** a * y ** max(b - 2, 0)
            assert np.abs(D.dxx(u) - uxx)[inner].max() < 1e-8
            assert np.abs(D.dyy(u) - uyy)[inner].max() < 1e-8


def test_periodic_derivatives_of_constants_vanish_everywhere():
    space = DGSpace(rectangle_mesh(0, 1, 0, 1, 4, 4, periodic=["x", "y"]), 2)
    D = assemble_diff_matrices(space)
    one = np.ones((space.K, space.Np))
    for op in (D.dx, D.dy, D.dxx, D.dyy, D.dxy):
        assert np.abs(op(one)).max() < 1e-11


def test_upwind_sign_antisymmetric():
    rng = np.random.default_rng(0)
    n = rng.standard_normal((100, 2))
    n /= np.linalg.norm(n, axis=1)[:, None]
    n[0] = (1 / np.sqrt(2), -1 / np.sqrt(2))  # tie with beta
    s1 = upwind_sign(n[:, 0], n[:, 1])
    s2 = upwind_sign(-n[:, 0], -n[:, 1])
    assert np.allclose(s1, -s2) and np.all(np.abs(s1) == 0.5)


def sin_mode_setup(n, k, H=1.0):
    space = DGSpace(rectangle_mesh(0, 1, 0, 1, n, n, periodic=["x", "y"]), k)
    Hb = np.full((space.K, space.Np), H)
    zero = np.zeros_like(Hb)
    return space, assemble_elliptic_operator(space, Hb, (zero, zero), ALPHA)


def sin_mode_error(n, k, hb, direction=(1, 0)):
    space, sys_ = sin_mode_setup(n, k, H=hb ** 2)
    kx, ky = 2 * np.pi * direction[0], 2 * np.pi * direction[1]
    w = np.sin(kx * space.x + ky * space.y)
    lam = 1 + ALPHA * hb ** 2 / 3 * (kx ** 2 + ky ** 2)
    return space.broken_l2(sys_.solve(lam * w) - w) / space.broken_l2(w)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_sin_mode_converges(k):
    e = [sin_mode_error(n, k, 0.5) for n in (4, 8)]
    assert np.log2(e[0] / e[1]) >= k


def test_solve_batched_matches_single():
    space, sys_ = sin_mode_setup(3, 2)
    f = np.random.default_rng(1).standard_normal((2, space.K, space.Np))
    both = sys_.solve(f)
    assert np.allclose(both[0], sys_.solve(f[0]), atol=1e-13)
    assert np.allclose(sys_.apply(both), f, atol=1e-10)
    with pytest.raises(ValueError):
        sys_.solve(np.ones(7))


def manufactured(space):
    """w, H = h_b^2, grad H and f = w + alpha T[H] w with T w = -HΔw/3 - ∇H·∇w/6 + wΔH/6."""
    x, y = space.x, space.y
    p = 2 * np.pi
    w = np.sin(p * x) * np.sin(p * y)
    wx = p * np.cos(p * x) * np.sin(p * y)
    wy = p * np.sin(p * x) * np.cos(p * y)
    lapw = -2 * p * p * w
    H = 1.0 + 0.3 * np.cos(p * x) * np.sin(p * y)
    Hx = -0.3 * p * np.sin(p * x) * np.sin(p * y)
    Hy = 0.3 * p * np.cos(p * x) * np.cos(p * y)
    lapH = -2 * p * p * (H - 1.0)
    Tw = -H * lapw / 3 - (Hx * wx + Hy * wy) / 6 + w * lapH / 6
    return w, H, (Hx, Hy), w + ALPHA * Tw


@pytest.mark.parametrize("k", [1, 2])
def test_manufactured_variable_depth_converges(k):
    errs = []
    for n in (4, 8, 16):
        space = DGSpace(rectangle_mesh(0, 1, 0, 1, n, n, periodic=["x", "y"]), k)
        w, H, gH, f = manufactured(space)
        sys_ = assemble_elliptic_operator(space, H, gH, ALPHA)
        errs.append(space.broken_l2(sys_.solve(f) - w))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert rates[-1] >= k


def test_operator_stats_are_reported():
    _, sys_ = sin_mode_setup(4, 2)
    st_ = sys_.stats
    assert st_.n == 32 * 6 and st_.nnz > st_.n and st_.fill_ratio >= 1.0
    assert 0 < st_.min_pivot_ratio <= 1.0


@settings(max_examples=6, deadline=None)
@given(st.floats(0.1, 1.5), st.integers(0, 1), st.integers(0, 1))
def test_sin_mode_property(hb, mx, my):
    if mx == my == 0:
        mx = 1
    # low modes on 8 and 16 cells per side are in the asymptotic range
    e = [sin_mode_error(n, 2, hb, (mx, my)) for n in (8, 16)]
    assert e[1] < e[0] / 4
