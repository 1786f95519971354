"""Broken polynomial space on a mesh: affine geometry, traces and projections."""
from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from .basis import reference_element
from .mesh import INTERIOR, OPEN, PERIODIC, WALL


def affine_map(verts, rs):
    """Map reference points rs (npts, 2) into triangles verts (K, 3, 2).

    Returns x, y of shape (K, npts).
    """
    r, s = rs[:, 0], rs[:, 1]
    l0 = -(r + s) / 2
    l1 = (1 + r) / 2
    l2 = (1 + s) / 2
    x = l0 * verts[:, 0, 0, None] + l1 * verts[:, 1, 0, None] + l2 * verts[:, 2, 0, None]
    y = l0 * verts[:, 0, 1, None] + l1 * verts[:, 1, 1, None] + l2 * verts[:, 2, 1, None]
    return x, y


class DGSpace:
    """Order-k nodal DG space on a mesh.

    Fields are arrays whose last two axes are (K, Np), element-major.
    Face quantities use shape (K, 3, nfq) with face Gauss nodes ordered along
    the counter-clockwise edge direction; exterior traces are the neighbour's
    traces reversed, checked against physical coordinates at construction.
    """

    def __init__(self, mesh, k):
        self.mesh = mesh
        self.ref = ref = reference_element(k)
        self.k = k
        self.K = mesh.n_elements
        self.Np = ref.Np
        self.nfq = ref.nfq
        v = mesh.vertices[mesh.elements]
        self.x, self.y = affine_map(v, ref.nodes)
        xr = 0.5 * (v[:, 1, 0] - v[:, 0, 0])
        yr = 0.5 * (v[:, 1, 1] - v[:, 0, 1])
        xs = 0.5 * (v[:, 2, 0] - v[:, 0, 0])
        ys = 0.5 * (v[:, 2, 1] - v[:, 0, 1])
        J = xr * ys - xs * yr
        self.J = J
        self.rx, self.ry = ys / J, -xs / J
        self.sx, self.sy = -yr / J, xr / J
        self.xq, self.yq = affine_map(v, ref.cub_points)
        self.wq = ref.cub_weights[None, :] * J[:, None]
        self.fw = ref.face_weights[None, None, :] * 0.5 * mesh.face_length[:, :, None]
        self.nx = mesh.normals[..., 0]
        self.ny = mesh.normals[..., 1]
        self.xf = np.einsum("fqn,kn->kfq", ref.face_interp, self.x)
        self.yf = np.einsum("fqn,kn->kfq", ref.face_interp, self.y)
        self.bc = mesh.bc
        nb = mesh.neighbor.copy()
        nbf = mesh.neighbor_face.copy()
        self.is_boundary = nb < 0
        kk, ff = np.nonzero(self.is_boundary)
        nb[kk, ff] = kk
        nbf[kk, ff] = ff
        self.nb, self.nbf = nb, nbf
        # flat index of the matching exterior face node; boundary faces map to
        # themselves (copy), callers overwrite with ghost values where needed
        nfq = self.nfq
        q = np.arange(nfq)
        ext = (nb[..., None] * 3 + nbf[..., None]) * nfq + (nfq - 1 - q)
        own = (np.arange(self.K)[:, None, None] * 3 + np.arange(3)[None, :, None]) * nfq + q
        self.ext_index = np.where(self.is_boundary[..., None], own, ext)
        # exterior face interpolation rows, consistent with ext_index
        fi = ref.face_interp
        self.P_int = np.broadcast_to(fi[None], (self.K, 3, nfq, self.Np))
        self.P_ext = np.where(self.is_boundary[..., None, None], fi[None], fi[nbf][:, :, ::-1, :])
        self._check_face_matching()
        # cell-mean weights: mean = u @ mean_w
        self.mean_w = ref.mass.sum(axis=1) / 2.0
        self.pos_interp = ref.pos_interp
        self._tree = None

    # ------------------------------------------------------------------
    def _check_face_matching(self):
        off = self.mesh.periodic_offset
        ex = self.exterior(self.xf) - off[..., 0, None]
        ey = self.exterior(self.yf) - off[..., 1, None]
        conn = ~self.is_boundary
        err = np.hypot(ex - self.xf, ey - self.yf).max(axis=-1)
        scale = self.mesh.face_length
        if np.any(err[conn] > 1e-9 * np.maximum(scale[conn], 1.0)):
            raise RuntimeError("face trace ordering mismatch between neighbours")

    def trace(self, u):
        """Interior traces at face Gauss nodes: (..., K, Np) -> (..., K, 3, nfq)."""
        return np.einsum("fqn,...kn->...kfq", self.ref.face_interp, u)

    def exterior(self, tr):
        """Neighbour traces matched node-by-node (copy of own trace on boundary faces)."""
        lead = tr.shape[:-3]
        return tr.reshape(lead + (-1,))[..., self.ext_index]

    def to_cub(self, u):
        return u @ self.ref.cub_interp.T

    def grad(self, u):
        """Element-local nodal gradient (no face terms)."""
        ur = u @ self.ref.Dr.T
        us = u @ self.ref.Ds.T
        return self.rx[:, None] * ur + self.sx[:, None] * us, self.ry[:, None] * ur + self.sy[:, None] * us

    def apply_minv(self, r):
        return (r @ self.ref.mass_inv) / self.J[:, None]

    def cell_mean(self, u):
        return u @ self.mean_w

    def integrate(self, u):
        """Integral of a field over the whole domain."""
        return float(np.sum(self.cell_mean(u) * self.mesh.area))

    # ------------------------------------------------------------------
    def project(self, f):
        """Element-wise L2 projection of f(x, y) computed with the volume cubature."""
        fq = np.asarray(f(self.xq, self.yq), dtype=float) * np.ones_like(self.xq)
        rhs = (fq * self.wq) @ self.ref.cub_interp
        return self.apply_minv(rhs)

    def interpolate(self, f):
        return np.asarray(f(self.x, self.y), dtype=float) * np.ones_like(self.x)

    def evaluate(self, u, element, rs):
        if not 0 <= element < self.K:
            raise IndexError(f"element {element} out of range [0, {self.K})")
        return self.ref.basis_at(rs) @ u[..., element, :].T if u.ndim > 2 else self.ref.basis_at(rs) @ u[element]

    def broken_l2(self, u, f=None):
        """Broken L2 norm of u - f, f a pointwise function (or None)."""
        uq = self.to_cub(u)
        if f is not None:
            uq = uq - np.asarray(f(self.xq, self.yq), dtype=float)
        return float(np.sqrt(np.sum(uq ** 2 * self.wq)))

    # ------------------------------------------------------------------
    def locate(self, points, n_candidates=12):
        """Element id and reference coordinates for each physical point.

        Raises ValueError for points outside the mesh.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        n = len(pts)
        if self._tree is None:
            self._tree = cKDTree(self.mesh.centroids)
        v = self.mesh.vertices[self.mesh.elements]
        out_e = -np.ones(n, dtype=np.int64)
        out_rs = np.zeros((n, 2))
        nq = min(n_candidates, self.K)
        _, cands = self._tree.query(pts, k=nq)
        cands = cands.reshape(n, nq)
        for j in range(nq):
            todo = out_e < 0
            if not np.any(todo):
                break
            e = cands[todo, j]
            rs, lmin = self._barycentric(v[e], pts[todo])
            hit = lmin >= -1e-10
            idx = np.flatnonzero(todo)[hit]
            out_e[idx] = e[hit]
            out_rs[idx] = rs[hit]
        for i in np.flatnonzero(out_e < 0):
            # brute force fallback for badly shaped neighbourhoods
            rs, lmin = self._barycentric(v, np.broadcast_to(pts[i], (self.K, 2)))
            e = int(np.argmax(lmin))
            if lmin[e] < -1e-10:
                raise ValueError(f"point ({pts[i, 0]:g}, {pts[i, 1]:g}) lies outside the mesh")
            out_e[i], out_rs[i] = e, rs[e]
        return out_e, out_rs

    @staticmethod
    def _barycentric(tri, p):
        """Reference coordinates of points p in triangles tri, and min barycentric weight."""
        a = (tri[:, 1] - tri[:, 0]) / 2
        b = (tri[:, 2] - tri[:, 0]) / 2
        d = p - tri[:, 0]
        det = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
        r = (d[:, 0] * b[:, 1] - d[:, 1] * b[:, 0]) / det - 1.0
        s_ = (a[:, 0] * d[:, 1] - a[:, 1] * d[:, 0]) / det - 1.0
        lmin = np.minimum(np.minimum(-(r + s_) / 2, (1 + r) / 2), (1 + s_) / 2)
        return np.column_stack([r, s_]), lmin

    def point_evaluator(self, points):
        """Return (elements, basis rows) so that values = sum(u[..., e, :] * rows)."""
        e, rs = self.locate(points)
        rows = self.ref.basis_at(rs) if len(rs) else np.zeros((0, self.Np))
        return e, rows


__all__ = ["DGSpace", "affine_map", "project_function", "evaluate_field", "INTERIOR", "WALL", "PERIODIC", "OPEN"]


def project_function(f, mesh, k):
    """L2 projection of f(x, y) onto the broken degree-k space of ``mesh``."""
    return DGSpace(mesh, k).project(f)


def evaluate_field(u, element, rs, mesh=None, k=None, space=None):
    """Values of a nodal field on one element at reference points rs (npts, 2)."""
    if space is None:
        space = DGSpace(mesh, k)
    return space.evaluate(u, element, rs)
