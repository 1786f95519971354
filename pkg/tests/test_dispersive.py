import numpy as np
import pytest
import sympy as sym

from gndg.dispersive import (BathymetryDerivatives, bathymetry_derivatives, compute_dispersive_correction,
                             eval_Q1, eval_Q2, eval_Q3, eval_R)
from gndg.elliptic import assemble_diff_matrices, assemble_elliptic_operator
from gndg.meshgen import rectangle_mesh
from gndg.scenarios import bump_hollow
from gndg.space import DGSpace
from gndg.swe import G, make_bathymetry

X, Y = sym.symbols("x y")
ALPHA = 1.159


def grad(f):
    return sym.diff(f, X), sym.diff(f, Y)


def lam(expr):
    f = sym.lambdify((X, Y), expr, "numpy")
    return lambda x, y: f(x, y) + 0 * x


@pytest.fixture(scope="module")
def poly_space():
    # k = 4 keeps every product below of degree <= 4, so weak derivatives are exact inside
    mesh = rectangle_mesh(0, 1, 0, 1, 6, 6, diagonal="alternate")
    space = DGSpace(mesh, 4)
    diff = assemble_diff_matrices(space)
    near = np.any(mesh.neighbor < 0, axis=1)
    nb = np.where(mesh.neighbor >= 0, mesh.neighbor, 0)
    for _ in range(2):
        near = near | np.any(near[nb] & (mesh.neighbor >= 0), axis=1)
    return space, diff, ~near


def nodal(space, expr):
    return lam(expr)(space.x, space.y)


def bd_from(space, diff, b):
    bn = nodal(space, b)
    return BathymetryDerivatives(bx=diff.dx(bn), by=diff.dy(bn), bxx=diff.dxx(bn), byy=diff.dyy(bn),
                                 bxy=diff.dxy(bn))


def test_R_symbolic(poly_space):
    space, diff, inner = poly_space
    h = 1 + sym.Rational(1, 10) * X
    w = X
    R1 = [-d / (3 * h) for d in grad(h ** 3 * w)]
    R2 = [d / (2 * h) for d in grad(h ** 2 * w)]
    hn, wn = nodal(space, h), nodal(space, w)
    z = np.zeros_like(hn)
    r1 = eval_R("R1", hn, z, z, wn, diff, 0.1)
    r2 = eval_R("R2", hn, z, z, wn, diff, 0.1)
    for c in range(2):
        assert np.abs(r1[c] - nodal(space, R1[c]))[inner].max() < 1e-6
        assert np.abs(r2[c] - nodal(space, R2[c]))[inner].max() < 1e-6
    with pytest.raises(ValueError):
        eval_R("R3", hn, z, z, wn, diff, 0.1)


def test_R_trivial(poly_space):
    space, diff, _ = poly_space
    one = np.ones((space.K, space.Np))
    z = 0 * one
    assert np.abs(eval_R("R1", one, z, z, z, diff, 0.1)).max() == 0
    assert np.abs(eval_R("R1", one, z, z, one, diff, 0.1)).max() < 1e-10
    assert np.abs(eval_R("R2", one, z, z, one, diff, 0.1)).max() < 1e-10


def test_Q1_symbolic(poly_space):
    space, diff, inner = poly_space
    h = 1 + sym.Rational(1, 10) * X
    b = sym.Rational(1, 20) * X
    u, v = Y, X
    ux, uy = grad(u)
    vx, vy = grad(v)
    w1 = -ux * vy + vx * uy + (ux + vy) ** 2
    bx, by = grad(b)
    bxx, bxy = grad(bx)
    _, byy = grad(by)
    w2 = u * u * bxx + 2 * u * v * bxy + v * v * byy
    R1 = [-d / (3 * h) - h / 2 * w1 * gb for d, gb in zip(grad(h ** 3 * w1), (bx, by))]
    R2 = [d / (2 * h) + w2 * gb for d, gb in zip(grad(h ** 2 * w2), (bx, by))]
    Q1 = [-2 * a + c for a, c in zip(R1, R2)]
    out = eval_Q1(nodal(space, h), nodal(space, u), nodal(space, v), bd_from(space, diff, b), diff, 0.1)
    for c in range(2):
        assert np.abs(out[c] - nodal(space, Q1[c]))[inner].max() < 1e-6


def test_Q1_zero_velocity(poly_space):
    space, diff, _ = poly_space
    z = np.zeros((space.K, space.Np))
    bd = bd_from(space, diff, X * Y)
    assert np.abs(eval_Q1(1 + z, z, z, bd, diff, 0.1)).max() == 0


def q2_symbolic(h, eta, b):
    hx, hy = grad(h)
    zx, zy = grad(eta)
    bx, by = grad(b)
    # -h (grad_perp h . grad) grad_perp zeta, grad_perp = (-d_y, d_x)
    op = lambda f: -hy * sym.diff(f, X) + hx * sym.diff(f, Y)
    t1 = (op(-zy), op(zx))
    s = h ** 2 * (bx * zx + by * zy)
    c = h / 2 * (sym.diff(zx, X) + sym.diff(zy, Y)) - (bx * zx + by * zy)
    return [-h * t1[0] - sym.diff(s, X) / (2 * h) + c * bx,
            -h * t1[1] - sym.diff(s, Y) / (2 * h) + c * by]


def test_Q2_symbolic(poly_space):
    space, diff, inner = poly_space
    b = sym.Rational(1, 10) * X
    eta = 1 + sym.Rational(1, 20) * Y ** 2 + sym.Rational(1, 50) * X
    h = eta - b
    Q2 = q2_symbolic(h, eta, b)
    out = eval_Q2(nodal(space, h), nodal(space, eta), bd_from(space, diff, b), diff, 0.1)
    for c in range(2):
        assert np.abs(out[c] - nodal(space, Q2[c]))[inner].max() < 1e-6


def test_Q2_constant_eta_and_flat(poly_space):
    space, diff, inner = poly_space
    b = sym.Rational(1, 10) * X * Y
    eta = sym.Integer(2)
    out = eval_Q2(nodal(space, eta - b), nodal(space, eta), bd_from(space, diff, b), diff, 0.1)
    assert np.abs(out).max() < 1e-9
    # flat bottom keeps only the first term
    eta = 1 + sym.Rational(1, 20) * X * Y
    Q2 = q2_symbolic(eta, eta, sym.Integer(0))
    out = eval_Q2(nodal(space, eta), nodal(space, eta), bd_from(space, diff, sym.Integer(0)), diff, 0.1)
    for c in range(2):
        assert np.abs(out[c] - nodal(space, Q2[c]))[inner].max() < 1e-6


def test_Q3_symbolic(poly_space):
    space, diff, inner = poly_space
    h = 1 + sym.Rational(1, 10) * X
    hb = sym.Integer(1)
    S = h ** 2 - hb ** 2
    w = [X * Y, Y ** 2]
    Sx, Sy = grad(S)
    lapS = sym.diff(Sx, X) + sym.diff(Sy, Y)
    Q3 = [Sx * sym.diff(wc, X) / 6 + Sy * sym.diff(wc, Y) / 6
          + S / 3 * (sym.diff(wc, X, 2) + sym.diff(wc, Y, 2)) - lapS * wc / 6 for wc in w]
    out = eval_Q3(nodal(space, h), nodal(space, hb), np.array([nodal(space, wc) for wc in w]), diff)
    for c in range(2):
        assert np.abs(out[c] - nodal(space, Q3[c]))[inner].max() < 1e-6
    # h = h_b gives zero
    hn = nodal(space, h)
    assert np.abs(eval_Q3(hn, hn, out, diff)).max() == 0


def rest_setup(k=2, n=6):
    space = DGSpace(rectangle_mesh(-1, 1, -1, 1, n, n), k)
    bathy = make_bathymetry(space, bump_hollow, h0=1.5)
    diff = assemble_diff_matrices(space)
    system = assemble_elliptic_operator(space, bathy.Hb, bathy.gradHb, ALPHA, diff=diff)
    return space, bathy, diff, system, bathymetry_derivatives(bathy, diff)


def test_correction_vanishes_at_rest():
    space, bathy, diff, system, bd = rest_setup()
    W = np.zeros((3, space.K, space.Np))
    W[0] = 1.5
    work = compute_dispersive_correction(W, bathy, system, diff, bd, return_work=True)
    assert np.abs(work.K).max() <= 1e-10
    assert np.abs(work.Dc).max() <= 1e-10


def test_correction_mask_zeroes_elements():
    space, bathy, diff, system, bd = rest_setup()
    W = np.zeros((3, space.K, space.Np))
    W[0] = space.project(lambda x, y: 1.5 + 0.05 * np.exp(-10 * (x * x + y * y)))
    mask = np.zeros(space.K, dtype=bool)
    mask[::3] = True
    Dc = compute_dispersive_correction(W, bathy, system, diff, bd, mask=mask)
    full = compute_dispersive_correction(W, bathy, system, diff, bd)
    assert np.all(Dc[:, mask] == 0)
    assert np.allclose(Dc[:, ~mask], full[:, ~mask])
    assert np.abs(full).max() > 1e-6


def test_flat_eta_moving_flow_reduces_to_Q1():
    # grad eta = 0: K = 0 and f = h Q1(v)
    space = DGSpace(rectangle_mesh(0, 1, 0, 1, 4, 4, periodic=["x", "y"]), 2)
    bathy = make_bathymetry(space, lambda x, y: 0 * x, h0=1.0)
    diff = assemble_diff_matrices(space)
    system = assemble_elliptic_operator(space, bathy.Hb, bathy.gradHb, ALPHA, diff=diff)
    bd = bathymetry_derivatives(bathy, diff)
    W = np.zeros((3, space.K, space.Np))
    W[0] = 1.0
    W[1] = 0.1 * np.sin(2 * np.pi * space.y)
    work = compute_dispersive_correction(W, bathy, system, diff, bd, return_work=True)
    assert np.abs(work.K).max() < 1e-12
    Q1 = eval_Q1(W[0], W[1], W[2], bd, diff, 0.1)
    assert np.allclose(work.f, Q1, atol=1e-12)


def test_linear_dispersion_flat_bottom():
    """Small sine mode: D_c matches the linear alpha-model prediction.

    Linearising on a flat bottom gives q_t = -g h0 grad(eta) (1 + (alpha-1) B) / (1 + alpha B)
    with B = (kappa h0)^2 / 3, i.e. D_c = -B / (1 + alpha B) g h0 grad(eta).
    """
    h0, amp = 0.5, 1e-7
    kappa = 2 * np.pi
    space = DGSpace(rectangle_mesh(0, 1, 0, 0.25, 16, 4, periodic=["x", "y"]), 3)
    bathy = make_bathymetry(space, lambda x, y: 0 * x, h0=h0)
    diff = assemble_diff_matrices(space)
    system = assemble_elliptic_operator(space, bathy.Hb, bathy.gradHb, ALPHA, diff=diff)
    bd = bathymetry_derivatives(bathy, diff)
    W = np.zeros((3, space.K, space.Np))
    W[0] = h0 + amp * np.sin(kappa * space.x)
    Dc = compute_dispersive_correction(W, bathy, system, diff, bd)
    B = (kappa * h0) ** 2 / 3
    expect = -B / (1 + ALPHA * B) * G * h0 * amp * kappa * np.cos(kappa * space.x)
    rel = space.broken_l2(Dc[0] - expect) / space.broken_l2(expect)
    assert rel < 1e-3
    # the y component is pure discretization error of the weak derivatives
    assert space.broken_l2(Dc[1]) / space.broken_l2(expect) < 1e-3
