"""Pre-balanced shallow-water DG residual with hydrostatic reconstruction.

State arrays have shape (3, K, Np) holding (eta, qx, qy) with eta = h + b.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import WALL

G = 9.81


class NumericalAbort(RuntimeError):
    """Raised when the solution becomes non-finite or loses positivity."""


@dataclass(eq=False)
class Bathymetry:
    """Projected topography and the at-rest depth fields used by the elliptic operator.

    b : L2 projection of b; bx, by : element-local derivatives of b;
    hb : max(h0 - b, eps0) interpolated and floored at eps0 on the positivity nodes;
    Hb = hb**2 at the interpolation nodes; gradHb : element-local gradient of Hb.
    """

    b: np.ndarray
    bx: np.ndarray
    by: np.ndarray
    hb: np.ndarray
    Hb: np.ndarray
    gradHb: tuple
    h0: float
    eps0: float
    bq: np.ndarray        # b at volume cubature points
    bxq: np.ndarray
    byq: np.ndarray
    bf: np.ndarray        # b traces at face Gauss nodes (K, 3, nfq)
    bf_ext: np.ndarray


def floor_scaling(u, space, floor):
    """Scale u around its cell mean so that u >= floor on the positivity nodes.

    Requires cell means >= floor; interpolation nodes already >= floor stay so.
    """
    mean = space.cell_mean(u)
    m = (u @ space.pos_interp.T).min(axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        theta = np.where(m < floor, (mean - floor) / (mean - m), 1.0)
    theta = np.clip(theta, 0.0, 1.0)
    return theta[..., None] * (u - mean[..., None]) + mean[..., None]


def make_bathymetry(space, bfunc=None, h0=1.0, eps0=None, b_nodal=None):
    """Build the Bathymetry for a topography function b(x, y) (or given nodal b).

    ``eps0`` is the depth guard, 0.1 h0 by default.
    """
    if eps0 is None:
        eps0 = 0.1 * h0
    if b_nodal is None:
        b = space.project(bfunc)
    else:
        b = np.asarray(b_nodal, dtype=float)
    bx, by = space.grad(b)
    hb = np.maximum(h0 - b, eps0)
    hb = floor_scaling(hb, space, eps0)
    Hb = hb * hb
    gradHb = space.grad(Hb)
    bf = space.trace(b)
    return Bathymetry(b=b, bx=bx, by=by, hb=hb, Hb=Hb, gradHb=gradHb, h0=h0, eps0=eps0,
                      bq=space.to_cub(b), bxq=space.to_cub(bx), byq=space.to_cub(by),
                      bf=bf, bf_ext=space.exterior(bf))


# ---------------------------------------------------------------------------
# pointwise flux building blocks
# ---------------------------------------------------------------------------

def velocity(q, h, tol):
    """Guarded velocity q / max(h, tol)."""
    return q / np.maximum(h, tol)


def physical_flux(W, b, g=G, h_eps=0.1):
    """Pre-balanced flux tensor, shape (3, 2, ...) for W = (eta, qx, qy).

    Rows: (qx, qy); q (x) q / h + g/2 (eta^2 - 2 eta b) I, with h clipped at h_eps.
    """
    eta, qx, qy = W
    h = np.maximum(eta - b, h_eps)
    p = 0.5 * g * (eta * eta - 2.0 * eta * b)
    return np.array([[qx, qy],
                     [qx * qx / h + p, qx * qy / h],
                     [qx * qy / h, qy * qy / h + p]])


def reconstruct_interface(Wm, Wp, bm, bp, tol=1e-12):
    """Hydrostatic reconstruction at a face node.

    Returns (eta_m, qx_m, qy_m), (eta_p, qx_p, qy_p), b_check, h_m, h_p.
    Reconstructed discharges are h_check times the trace velocity.
    """
    eta_m, qxm, qym = Wm
    eta_p, qxp, qyp = Wp
    bstar = np.maximum(bm, bp)
    bchk = bstar - np.maximum(0.0, bstar - eta_m)
    hm = np.maximum(0.0, eta_m - bstar)
    hp = np.maximum(0.0, eta_p - bstar)
    dm = np.maximum(eta_m - bm, 0.0)
    dp = np.maximum(eta_p - bp, 0.0)
    um, vm = velocity(qxm, dm, tol), velocity(qym, dm, tol)
    up, vp = velocity(qxp, dp, tol), velocity(qyp, dp, tol)
    Wm_c = (hm + bchk, hm * um, hm * vm)
    Wp_c = (hp + bchk, hp * up, hp * vp)
    return Wm_c, Wp_c, bchk, (hm, um, vm), (hp, up, vp)


def numerical_flux(Wm, Wp, bm, bp, nx, ny, a, g=G, tol=1e-12):
    """Modified global Lax-Friedrichs flux F_h(W_m, W_p, b_chk, b_chk, n) + g eta_m (b_chk - b_m) n."""
    Wm_c, Wp_c, bchk, (hm, um, vm), (hp, up, vp) = reconstruct_interface(Wm, Wp, bm, bp, tol)
    em, qxm, qym = Wm_c
    ep, qxp, qyp = Wp_c
    unm = um * nx + vm * ny
    unp = up * nx + vp * ny
    pm = 0.5 * g * (em * em - 2.0 * em * bchk)
    pp = 0.5 * g * (ep * ep - 2.0 * ep * bchk)
    f0 = 0.5 * (qxm * nx + qym * ny + qxp * nx + qyp * ny - a * (ep - em))
    f1 = 0.5 * (qxm * unm + pm * nx + qxp * unp + pp * nx - a * (qxp - qxm))
    f2 = 0.5 * (qym * unm + pm * ny + qyp * unp + pp * ny - a * (qyp - qym))
    corr = g * em * (bchk - bm)
    return np.array([f0, f1 + corr * nx, f2 + corr * ny])


def ghost_wall(W, nx, ny):
    """Mirror state across a wall: same eta, reflected normal discharge."""
    eta, qx, qy = W
    qn = qx * nx + qy * ny
    return np.array([eta, qx - 2.0 * qn * nx, qy - 2.0 * qn * ny])


# ---------------------------------------------------------------------------
# element-level operators
# ---------------------------------------------------------------------------

@dataclass
class FluxContext:
    lam: np.ndarray    # per-element wave speed
    a: float           # global speed


def max_wave_speed(W, bathy, space, g=G, dry_tol=1e-6, h_guard=None):
    """lambda_T = max over face Gauss nodes of |u.n| + sqrt(g h); zero if dry at all of them.

    Velocities divide by max(h, h_guard), with h_guard = bathy.eps0 by default.
    """
    h_guard = bathy.eps0 if h_guard is None else h_guard
    tr = space.trace(W)
    h = tr[0] - bathy.bf
    hpos = np.maximum(h, 0.0)
    u = velocity(tr[1], hpos, h_guard)
    v = velocity(tr[2], hpos, h_guard)
    un = np.abs(u * space.nx[..., None] + v * space.ny[..., None])
    speed = np.where(h > dry_tol, un + np.sqrt(g * hpos), 0.0)
    lam = speed.max(axis=(1, 2))
    return FluxContext(lam=lam, a=float(lam.max()) if lam.size else 0.0)


def face_states(W, bathy, space):
    """Interior and exterior traces with wall ghosts applied, plus b traces."""
    Wf = space.trace(W)
    We = space.exterior(Wf)
    wall = space.bc == WALL
    if np.any(wall):
        k, f = np.nonzero(wall)
        We[:, k, f, :] = ghost_wall(Wf[:, k, f, :], space.nx[k, f, None], space.ny[k, f, None])
    return Wf, We


def swe_residual(W, bathy, space, a, Dc=None, g=G, h_guard=None):
    """Semi-discrete time derivative dW/dt of the pre-balanced NSW system.

    Dc : optional (2, K, Np) dispersive correction subtracted from the momentum rows.
    h_guard : velocities divide by max(h, h_guard); bathy.eps0 by default.
    """
    h_guard = bathy.eps0 if h_guard is None else h_guard
    ref = space.ref
    # the scheme is invariant under a shift of the vertical datum; measuring eta
    # and b from the still-water level makes the rest state exactly zero flux
    datum = bathy.h0
    eta, qx, qy = W @ ref.cub_interp.T
    eta = eta - datum
    bq = bathy.bq - datum
    h = np.maximum(eta - bq, 0.0)
    u = velocity(qx, h, h_guard)
    v = velocity(qy, h, h_guard)
    p = 0.5 * g * (eta * eta - 2.0 * eta * bq)
    Fx = np.array([qx, qx * u + p, qy * u])
    Fy = np.array([qy, qx * v, qy * v + p])
    wq = space.wq
    rx, ry = space.rx[:, None], space.ry[:, None]
    sx, sy = space.sx[:, None], space.sy[:, None]
    Gr = (rx * Fx + ry * Fy) * wq
    Gs = (sx * Fx + sy * Fy) * wq
    rhs = Gr @ ref.cub_dr + Gs @ ref.cub_ds
    src = -g * eta * wq
    rhs[1] += (src * bathy.bxq) @ ref.cub_interp
    rhs[2] += (src * bathy.byq) @ ref.cub_interp

    Wf, We = face_states(W, bathy, space)
    Wf[0] -= datum
    We[0] -= datum
    nx = space.nx[..., None]
    ny = space.ny[..., None]
    flux = numerical_flux(Wf, We, bathy.bf - datum, bathy.bf_ext - datum, nx, ny, a, g=g, tol=h_guard)
    rhs -= np.einsum("fqi,ckfq->cki", ref.face_interp, flux * space.fw)
    dW = space.apply_minv(rhs)
    if Dc is not None:
        dW[1:] -= Dc
    return dW


def check_finite(W, where=""):
    if not np.all(np.isfinite(W)):
        bad = np.argwhere(~np.isfinite(W))[0]
        raise NumericalAbort(f"non-finite value {where}: component {bad[0]}, element {bad[1]}")


def first_order_mean_update(Wbar, bbar, mesh, dt, a=None, g=G, dry_tol=1e-12):
    """One explicit Euler step of the piecewise-constant (first-order) scheme.

    Wbar : (3, K) cell means of (eta, qx, qy); bbar : (K,) cell-mean topography.
    Uses the same reconstruction and modified Lax-Friedrichs flux as the DG
    residual, with wall ghosts on physical boundaries. ``a`` defaults to the
    largest |u.n| + sqrt(g h) over the mesh. Returns (W_new, a).
    """
    Wbar = np.asarray(Wbar, dtype=float)
    nb = np.where(mesh.neighbor >= 0, mesh.neighbor, np.arange(mesh.n_elements)[:, None])
    Wm = np.broadcast_to(Wbar[:, :, None], (3,) + nb.shape)
    Wp = Wbar[:, nb].copy()
    bm = np.broadcast_to(bbar[:, None], nb.shape)
    bp = bbar[nb]
    nx, ny = mesh.normals[..., 0], mesh.normals[..., 1]
    wall = mesh.neighbor < 0
    if np.any(wall):
        Wp[:, wall] = ghost_wall(Wm[:, wall], nx[wall], ny[wall])
    if a is None:
        h = np.maximum(Wbar[0] - bbar, 0.0)
        u = velocity(Wbar[1], h, dry_tol)
        v = velocity(Wbar[2], h, dry_tol)
        a = float(np.max(np.hypot(u, v) + np.sqrt(g * h)))
    flux = numerical_flux(Wm, Wp, bm, bp, nx, ny, a, g=g, tol=dry_tol)
    total = (flux * mesh.face_length).sum(axis=-1)
    return Wbar - dt / mesh.area * total, a
