"""Positivity scaling limiter, troubled-cell detector and maxmod slope limiter."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .swe import NumericalAbort


@dataclass
class LimiterReport:
    theta: np.ndarray      # per-element scaling factor in [0, 1]
    m: np.ndarray          # per-element min of h on the positivity nodes (before limiting)
    indicator: np.ndarray | None = None
    troubled: np.ndarray | None = None

    @property
    def n_limited(self):
        return int(np.sum(self.theta < 1.0))

    @property
    def n_troubled(self):
        return 0 if self.troubled is None else int(self.troubled.sum())


def positivity_limiter(W, bathy, space, dry_tol=0.0, mean_tol=1e-12):
    """Scale h = eta - b (and q, with the same factor) around cell means so that
    h >= 0 on the positivity node set. Returns (limited state, LimiterReport).

    Cells whose mean depth is below ``dry_tol`` get zero discharge.
    Raises NumericalAbort for a negative cell-mean depth below -mean_tol.
    """
    W = np.array(W, dtype=float, copy=True)
    h = W[0] - bathy.b
    hbar = space.cell_mean(h)
    if np.any(hbar < -mean_tol):
        e = int(np.argmin(hbar))
        raise NumericalAbort(f"negative cell-mean depth {hbar[e]:.3e} in element {e}")
    hbar = np.maximum(hbar, 0.0)
    hs = h @ space.pos_interp.T
    m = hs.min(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        theta = np.where(m < 0.0, hbar / (hbar - m), 1.0)
    theta = np.clip(np.nan_to_num(theta, nan=0.0), 0.0, 1.0)
    act = theta < 1.0
    if np.any(act):
        t = theta[act, None]
        hb_ = hbar[act, None]
        b_act = bathy.b[act]
        eta = t * (h[act] - hb_) + hb_ + b_act
        # rounding in eta = h + b may leave a tiny negative depth: flatten those
        # cells, and cells whose mean is below rounding level become exactly dry
        bad = ((eta - b_act) @ space.pos_interp.T).min(axis=1) < 0.0
        if np.any(bad):
            theta_act = theta[act]
            theta_act[bad] = 0.0
            theta[act] = theta_act
            t = theta[act, None]
            eta[bad] = hb_[bad] + b_act[bad]
            still = ((eta - b_act) @ space.pos_interp.T).min(axis=1) < 0.0
            eta[still] = b_act[still]
        W[0, act] = eta
        for c in (1, 2):
            qbar = space.cell_mean(W[c, act])[:, None]
            W[c, act] = t * (W[c, act] - qbar) + qbar
    if dry_tol > 0.0:
        dry = hbar < dry_tol
        if np.any(dry):
            W[1:, dry] = 0.0
    return W, LimiterReport(theta=theta, m=m)


def _cell_velocity(W, bathy, space, tol):
    h = space.cell_mean(W[0] - bathy.b)
    qx = space.cell_mean(W[1])
    qy = space.cell_mean(W[2])
    hd = np.maximum(h, tol)
    return qx / hd, qy / hd


def troubled_cell_indicator(W, bathy, space, min_depth=0.0, vel_tol=1e-8):
    """Inflow-jump discontinuity sensor; returns per-element I_T.

    I_T = |sum over inflow faces of int_F (h^- - h^+)| / (h_T^((k+1)/2) |inflow boundary| max|h|).
    Inflow faces: the neighbour's mean velocity points into T. Physical boundary
    faces are never inflow. Cells with mean depth below ``min_depth`` get 0.
    """
    k = space.k
    h = W[0] - bathy.b
    hf = space.trace(h)
    he = space.exterior(hf)
    jump = np.sum((hf - he) * space.fw, axis=-1)            # (K, 3)
    u, v = _cell_velocity(W, bathy, space, vel_tol)
    un = u[space.nb] * space.nx + v[space.nb] * space.ny
    inflow = (un < 0.0) & ~space.is_boundary
    num = np.abs(np.sum(np.where(inflow, jump, 0.0), axis=1))
    length = np.sum(np.where(inflow, space.mesh.face_length, 0.0), axis=1)
    norm = np.abs(h).max(axis=1)
    den = space.mesh.diameter ** ((k + 1) / 2.0) * length * norm
    with np.errstate(divide="ignore", invalid="ignore"):
        ind = np.where(den > 1e-14, num / den, 0.0)
    if min_depth > 0.0:
        ind = np.where(space.cell_mean(h) < min_depth, 0.0, ind)
    return ind


def troubled_cells(W, bathy, space, min_depth=0.0):
    ind = troubled_cell_indicator(W, bathy, space, min_depth=min_depth)
    return ind, ind >= 1.0


def breaking_mask(flags):
    """Elements where the dispersive correction is switched off."""
    return np.asarray(flags, dtype=bool).copy()


# ---------------------------------------------------------------------------
# maxmod slope limiter
# ---------------------------------------------------------------------------

def _neighbour_geometry(space):
    """Neighbour centroids seen from each element (periodic shifts applied)."""
    c = space.mesh.centroids
    nbc = c[space.nb] - space.mesh.periodic_offset
    return c, nbc


def _linear_nodal(mean, gx, gy, space, elems, centroid):
    dx = space.x[elems] - centroid[elems, 0, None]
    dy = space.y[elems] - centroid[elems, 1, None]
    return mean[:, None] + gx[:, None] * dx + gy[:, None] * dy


def maxmod_slope_limiter(W, bathy, space, troubled, tol=1e-12):
    """Replace each component of W on troubled elements by a limited linear function.

    Candidate gradients interpolate the cell mean and two neighbour means; the
    admissible candidate with the largest magnitude is kept (maxmod). A
    candidate is admissible when its values at the element's vertices lie
    within the range of the local means, or when all candidates coincide
    (locally linear data). Without admissible candidates the largest one is
    scaled into range. Cell means are unchanged.
    """
    troubled = np.asarray(troubled, dtype=bool)
    if not np.any(troubled):
        return W
    W = np.array(W, dtype=float, copy=True)
    elems = np.flatnonzero(troubled)
    c, nbc = _neighbour_geometry(space)
    v = space.mesh.vertices[space.mesh.elements[elems]]
    fmid = v - c[elems, None, :]                                          # vertex offsets (n, 3, 2)
    dxy = nbc[elems] - c[elems, None, :]                                  # (n, 3, 2)
    has_nb = ~space.is_boundary[elems]
    pairs = ((0, 1), (1, 2), (2, 0))
    for comp in range(3):
        means = space.cell_mean(W[comp])
        ub = means[elems]
        un = means[space.nb[elems]]                                       # (n, 3)
        # missing neighbours take the own mean (zero difference)
        du = np.where(has_nb, un - ub[:, None], 0.0)
        lo = np.minimum(ub, np.min(np.where(has_nb, un, ub[:, None]), axis=1))
        hi = np.maximum(ub, np.max(np.where(has_nb, un, ub[:, None]), axis=1))
        cand = []
        best = np.zeros((len(elems), 2))
        best_norm = -np.ones(len(elems))
        fallback = np.zeros((len(elems), 2))
        fb_norm = -np.ones(len(elems))
        for i, j in pairs:
            ok = has_nb[:, i] & has_nb[:, j]
            a11, a12 = dxy[:, i, 0], dxy[:, i, 1]
            a21, a22 = dxy[:, j, 0], dxy[:, j, 1]
            det = a11 * a22 - a12 * a21
            ok &= np.abs(det) > 1e-14 * (a11 ** 2 + a12 ** 2 + a21 ** 2 + a22 ** 2)
            sdet = np.where(ok, det, 1.0)
            gx = (du[:, i] * a22 - du[:, j] * a12) / sdet
            gy = (a11 * du[:, j] - a21 * du[:, i]) / sdet
            gx = np.where(ok, gx, 0.0)
            gy = np.where(ok, gy, 0.0)
            vals = ub[:, None] + gx[:, None] * fmid[..., 0] + gy[:, None] * fmid[..., 1]
            scale = np.maximum(np.abs(hi - lo), np.abs(ub)) * tol + tol
            adm = ok & np.all(vals <= hi[:, None] + scale[:, None], axis=1) & np.all(vals >= lo[:, None] - scale[:, None], axis=1)
            cand.append((ok, gx, gy, adm))
        # locally linear data: every valid candidate equals the same gradient
        n_ok = sum(c_[0].astype(int) for c_ in cand)
        gx_ref = sum(np.where(c_[0], c_[1], 0.0) for c_ in cand) / np.maximum(n_ok, 1)
        gy_ref = sum(np.where(c_[0], c_[2], 0.0) for c_ in cand) / np.maximum(n_ok, 1)
        gscale = np.hypot(gx_ref, gy_ref) + (hi - lo) / space.mesh.diameter[elems] + 1e-300
        agree = n_ok >= 2
        for ok, gx, gy, _ in cand:
            agree &= ~ok | (np.hypot(gx - gx_ref, gy - gy_ref) <= 1e-8 * gscale)
        for ok, gx, gy, adm in cand:
            adm = adm | (ok & agree)
            nrm = np.hypot(gx, gy)
            take = adm & (nrm > best_norm)
            best[take] = np.column_stack([gx, gy])[take]
            best_norm[take] = nrm[take]
            takef = ok & (nrm > fb_norm)
            fallback[takef] = np.column_stack([gx, gy])[takef]
            fb_norm[takef] = nrm[takef]
        none = best_norm < 0
        if np.any(none):
            # scale the largest candidate into the admissible range (Barth-Jespersen factor)
            g = fallback[none]
            d = g[:, None, 0] * fmid[none, :, 0] + g[:, None, 1] * fmid[none, :, 1]
            room = np.where(d > 0, (hi[none, None] - ub[none, None]), (lo[none, None] - ub[none, None]))
            with np.errstate(divide="ignore", invalid="ignore"):
                phi = np.where(np.abs(d) > 0, np.clip(room / d, 0.0, 1.0), 1.0)
            best[none] = g * phi.min(axis=1)[:, None]
        W[comp, elems] = _linear_nodal(ub, best[:, 0], best[:, 1], space, elems, c)
    return W
