"""Dispersive correction of the constant-diagonal Green-Naghdi model.

All derivatives are weak LDG derivatives from DiffOps; nonlinear terms are
formed by nodal products (collocation). Divisions by h use max(h, eps0).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .swe import G


@dataclass(eq=False)
class BathymetryDerivatives:
    """Time-independent weak derivatives of b (and h_b^2)."""

    bx: np.ndarray
    by: np.ndarray
    bxx: np.ndarray
    byy: np.ndarray
    bxy: np.ndarray


def bathymetry_derivatives(bathy, diff):
    b = bathy.b
    return BathymetryDerivatives(bx=diff.dx(b), by=diff.dy(b), bxx=diff.dxx(b),
                                 byy=diff.dyy(b), bxy=diff.dxy(b))


@dataclass(eq=False)
class DispersiveWork:
    K: np.ndarray     # (2, K, Np) first elliptic solve
    f: np.ndarray     # (2, K, Np) second right-hand side
    Dc: np.ndarray    # (2, K, Np) dispersive correction


class _Derivs:
    """Batched application of the global derivative matrices to several fields."""

    def __init__(self, diff):
        self.diff = diff

    def apply(self, D, fields):
        fields = np.asarray(fields)
        m = fields.shape[0]
        shape = fields.shape[1:]
        out = D @ fields.reshape(m, -1).T
        return out.T.reshape((m,) + shape)

    def grad(self, fields):
        return self.apply(self.diff.Dx, fields), self.apply(self.diff.Dy, fields)


def eval_R(kind, h, bx, by, w, diff, eps0):
    """R1 w = -(1/(3h)) grad(h^3 w) - (h/2) w grad b ;  R2 w = (1/(2h)) grad(h^2 w) + w grad b."""
    hd = np.maximum(h, eps0)
    if kind == "R1":
        gx, gy = diff.dx(h ** 3 * w), diff.dy(h ** 3 * w)
        return np.array([-gx / (3 * hd) - 0.5 * h * w * bx, -gy / (3 * hd) - 0.5 * h * w * by])
    if kind == "R2":
        gx, gy = diff.dx(h ** 2 * w), diff.dy(h ** 2 * w)
        return np.array([gx / (2 * hd) + w * bx, gy / (2 * hd) + w * by])
    raise ValueError(f"unknown operator {kind!r}")


def q1_arguments(u, v, ux, uy, vx, vy, bd):
    """Scalar arguments of R1 and R2 inside Q1."""
    div = ux + vy
    w1 = -ux * vy + vx * uy + div * div
    w2 = u * u * bd.bxx + 2 * u * v * bd.bxy + v * v * bd.byy
    return w1, w2


def eval_Q1(h, u, v, bd, diff, eps0):
    """Q1(v) = -2 R1(d1 v . d2 v_perp + (div v)^2) + R2(v . (v . grad) grad b)."""
    ux, uy = diff.dx(u), diff.dy(u)
    vx, vy = diff.dx(v), diff.dy(v)
    w1, w2 = q1_arguments(u, v, ux, uy, vx, vy, bd)
    return -2.0 * eval_R("R1", h, bd.bx, bd.by, w1, diff, eps0) + eval_R("R2", h, bd.bx, bd.by, w2, diff, eps0)


def q2_value(h, hx, hy, zx, zy, zxx, zyy, zxy, gx_s, gy_s, bx, by, eps0):
    """Q2 from precomputed derivatives; (gx_s, gy_s) = grad(h^2 grad b . grad zeta)."""
    hd = np.maximum(h, eps0)
    lap = zxx + zyy
    bdz = bx * zx + by * zy
    c = 0.5 * h * lap - bdz
    t1x = hy * zxy - hx * zyy
    t1y = -hy * zxx + hx * zxy
    return np.array([-h * t1x - gx_s / (2 * hd) + c * bx,
                     -h * t1y - gy_s / (2 * hd) + c * by])


def eval_Q2(h, eta, bd, diff, eps0):
    """Q2(zeta) = -h (grad_perp h . grad) grad_perp zeta - (1/(2h)) grad(h^2 grad b . grad zeta)
    + ((h/2) lap zeta - grad b . grad zeta) grad b, with grad zeta = grad eta."""
    hx, hy = diff.dx(h), diff.dy(h)
    zx, zy = diff.dx(eta), diff.dy(eta)
    zxx, zyy, zxy = diff.dxx(eta), diff.dyy(eta), diff.dxy(eta)
    s = h * h * (bd.bx * zx + bd.by * zy)
    return q2_value(h, hx, hy, zx, zy, zxx, zyy, zxy, diff.dx(s), diff.dy(s), bd.bx, bd.by, eps0)


def eval_Q3(h, hb, w, diff):
    """Q3 w = (1/6) grad(S) . grad w + (S/3) lap w - (1/6) lap(S) w, S = h^2 - h_b^2, per component."""
    S = h * h - hb * hb
    Sx, Sy = diff.dx(S), diff.dy(S)
    lapS = diff.laplacian(S)
    out = []
    for wc in w:
        out.append((Sx * diff.dx(wc) + Sy * diff.dy(wc)) / 6.0 + S / 3.0 * diff.laplacian(wc) - lapS * wc / 6.0)
    return np.array(out)


def compute_dispersive_correction(W, bathy, system, diff, bd, mask=None, g=G, eps0=None,
                                  return_work=False):
    """D_c from the two-stage elliptic pipeline; zero on masked (breaking) elements.

    W : (3, K, Np) state; bd : BathymetryDerivatives from ``bathymetry_derivatives``.
    """
    alpha = system.alpha
    eps0 = bathy.eps0 if eps0 is None else eps0
    eta, qx, qy = W
    h = np.maximum(eta - bathy.b, 0.0)
    hd = np.maximum(h, eps0)
    u = qx / hd
    v = qy / hd
    ops = _Derivs(diff)

    ex, ey = ops.grad(eta[None])
    ghgrad = g * h * np.array([ex[0], ey[0]])
    Kf = system.solve(ghgrad)

    # first derivatives of everything entering Q1, Q2, Q3 in one batched product
    base = np.array([u, v, h, h * h - bathy.hb ** 2, Kf[0], Kf[1]])
    dX, dY = ops.grad(base)
    ux, vx, hx, Sx, K0x, K1x = dX
    uy, vy, hy, Sy, K0y, K1y = dY
    second = np.array([eta, base[3], Kf[0], Kf[1]])
    dXX = ops.apply(diff.Dxx, second)
    dYY = ops.apply(diff.Dyy, second)
    zxx, Sxx, K0xx, K1xx = dXX
    zyy, Syy, K0yy, K1yy = dYY
    zxy = ops.apply(diff.Dxy, eta[None])[0]
    zx, zy = ex[0], ey[0]

    w1, w2 = q1_arguments(u, v, ux, uy, vx, vy, bd)
    s2 = h * h * (bd.bx * zx + bd.by * zy)
    third = np.array([h ** 3 * w1, h ** 2 * w2, s2])
    tX, tY = ops.grad(third)
    R1 = np.array([-tX[0] / (3 * hd) - 0.5 * h * w1 * bd.bx, -tY[0] / (3 * hd) - 0.5 * h * w1 * bd.by])
    R2 = np.array([tX[1] / (2 * hd) + w2 * bd.bx, tY[1] / (2 * hd) + w2 * bd.by])
    Q1 = -2.0 * R1 + R2
    Q2 = q2_value(h, hx, hy, zx, zy, zxx, zyy, zxy, tX[2], tY[2], bd.bx, bd.by, eps0)
    S = base[3]
    lapS = Sxx + Syy
    Q3 = np.array([
        (Sx * K0x + Sy * K0y) / 6.0 + S / 3.0 * (K0xx + K0yy) - lapS * Kf[0] / 6.0,
        (Sx * K1x + Sy * K1y) / 6.0 + S / 3.0 * (K1xx + K1yy) - lapS * Kf[1] / 6.0,
    ])

    f = ghgrad / alpha + h * (Q1 + g * Q2) + Q3
    z = system.solve(f)
    Dc = z - ghgrad / alpha
    if mask is not None and np.any(mask):
        Dc[:, mask, :] = 0.0
    if return_work:
        return DispersiveWork(K=Kf, f=f, Dc=Dc)
    return Dc
