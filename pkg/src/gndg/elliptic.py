"""LDG weak differentiation matrices and the scalar operator 1 + alpha*T[h_b].

All global matrices act on flattened nodal vectors (element-major, index
``e * Np + i``) and return nodal values, i.e. the inverse mass matrix is
already applied.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .basis import simplex_modes, triangle_cubature
from .mesh import PERIODIC, WALL
from .sparse import Factorization, assemble, block_diagonal

BETA = np.array([1.0, 1.0]) / np.sqrt(2.0)
XI = 1.0


def upwind_sign(nx, ny, beta=BETA):
    """s = +-1/2 from sign(beta . n), ties broken by sign(n_x) then sign(n_y).

    Normals of the two sides of a face are exact negations, so s flips sign
    between the two sides and the selected trace is single valued.
    """
    d = beta[0] * nx + beta[1] * ny
    sgn = np.sign(d)
    sgn = np.where(sgn == 0, np.sign(nx), sgn)
    sgn = np.where(sgn == 0, np.sign(ny), sgn)
    return 0.5 * sgn


def _flat(u):
    return u.reshape(u.shape[:-2] + (-1,))


def face_operator(space, c_int, c_ext):
    """Matrix of  u -> sum_F int_F phi_i (c_int u^- + c_ext u^+) ds  (no mass inverse).

    c_int, c_ext : (K, 3, nfq) coefficients at face Gauss nodes. On boundary
    faces the exterior trace is the element's own trace (copy).
    """
    K = space.K
    w = space.fw
    B_int = np.einsum("kfqi,kfq,kfqj->kij", space.P_int, w * c_int, space.P_int)
    B_ext = np.einsum("kfqi,kfq,kfqj->kfij", space.P_int, w * c_ext, space.P_ext)
    B_ext = B_ext.reshape(-1, space.Np, space.Np)
    keep = np.any(B_ext != 0, axis=(1, 2))  # keep the block pattern free of structural zeros
    rows = np.concatenate([np.arange(K), np.repeat(np.arange(K), 3)[keep]])
    cols = np.concatenate([np.arange(K), space.nb.ravel()[keep]])
    blocks = np.concatenate([B_int, B_ext[keep]])
    return assemble(rows, cols, blocks, K)


def _mass_inverse(space):
    return block_diagonal(space.ref.mass_inv[None] / space.J[:, None, None])


def _fine_cubature(space, degree):
    """Cubature points/weights and basis tables exact to the given degree."""
    ref = space.ref
    cp, cw = triangle_cubature(degree)
    psi, pr, ps = simplex_modes(ref.k, cp)
    return cp, cw, psi @ ref.Vinv, pr @ ref.Vinv, ps @ ref.Vinv


def _volume_derivative(space, axis):
    """Blocks of  int (d phi_i / d x_axis) phi_j."""
    ref = space.ref
    a = space.rx if axis == 0 else space.ry
    b = space.sx if axis == 0 else space.sy
    return space.J[:, None, None] * (a[:, None, None] * ref.Sr.T[None] + b[:, None, None] * ref.Ss.T[None])


def _boundary_masks(space):
    periodic = space.bc == PERIODIC
    conn = ~space.is_boundary | periodic
    return conn, space.bc == WALL


@dataclass(eq=False)
class DiffOps:
    """Global weak derivative matrices (nodal in, nodal out)."""

    Dx: sp.csr_matrix
    Dy: sp.csr_matrix
    Dxx: sp.csr_matrix
    Dyy: sp.csr_matrix
    Dxy: sp.csr_matrix
    shape_field: tuple

    def _apply(self, D, u):
        u = np.asarray(u)
        return (D @ u.reshape(-1)).reshape(u.shape)

    def dx(self, u):
        return self._apply(self.Dx, u)

    def dy(self, u):
        return self._apply(self.Dy, u)

    def dxx(self, u):
        return self._apply(self.Dxx, u)

    def dyy(self, u):
        return self._apply(self.Dyy, u)

    def dxy(self, u):
        return self._apply(self.Dxy, u)

    def grad(self, u):
        return self.dx(u), self.dy(u)

    def laplacian(self, u):
        return self.dxx(u) + self.dyy(u)


def assemble_diff_matrices(space, xi=XI, beta=BETA):
    """LDG first and second derivative matrices.

    First derivatives use the one-sided trace selected by beta; second
    derivatives take the diffusive flux from the opposite side plus the jump
    penalty xi/|F|. Non-periodic boundary faces copy interior traces.
    """
    conn, _ = _boundary_masks(space)
    s = upwind_sign(space.nx, space.ny, beta)[..., None] * np.ones(space.nfq)
    c = conn[..., None].astype(float)
    Minv = _mass_inverse(space)
    pen = xi / space.mesh.face_length[..., None] * c
    ops = {}
    for axis, n in ((0, space.nx), (1, space.ny)):
        n = n[..., None]
        V = block_diagonal(_volume_derivative(space, axis))
        # w_hat = (1/2 - s) w^- + (1/2 + s) w^+ on connected faces, w^- on boundaries
        Fw = face_operator(space, n * (c * (0.5 - s) + (1 - c)), n * c * (0.5 + s))
        D = (Minv @ (Fw - V)).tocsr()
        Fp = face_operator(space, n * (c * (0.5 + s) + (1 - c)), n * c * (0.5 - s))
        P = face_operator(space, -pen * n * n, pen * n * n)
        D2 = (Minv @ ((Fp - V) @ D + P)).tocsr()
        ops[axis] = (D, D2)
    Dx, Dxx = ops[0]
    Dy, Dyy = ops[1]
    return DiffOps(Dx=Dx, Dy=Dy, Dxx=Dxx, Dyy=Dyy, Dxy=(Dx @ Dy).tocsr(),
                   shape_field=(space.K, space.Np))


@dataclass(eq=False)
class EllipticSystem:
    """Assembled and factorized nodal form of 1 + alpha*T[h_b]."""

    alpha: float
    A: sp.csr_matrix
    factorization: Factorization
    beta: np.ndarray
    xi: float
    assembly_seconds: float

    def solve(self, f):
        """Solve A w = f for a scalar field (K, Np) or stacked fields (m, K, Np)."""
        f = np.asarray(f, dtype=float)
        n = self.A.shape[0]
        if f.size % n:
            raise ValueError(f"right-hand side size {f.size} incompatible with n={n}")
        if f.size == n:
            return self.factorization.solve(f.reshape(-1)).reshape(f.shape)
        m = f.size // n
        x = self.factorization.solve(f.reshape(m, n).T)
        return x.T.reshape(f.shape)

    def apply(self, w):
        """A w for a scalar field (K, Np) or stacked fields (m, K, Np)."""
        w = np.asarray(w, dtype=float)
        n = self.A.shape[0]
        return (self.A @ w.reshape(-1, n).T).T.reshape(w.shape)

    @property
    def stats(self):
        return self.factorization.stats


def elliptic_matrix(space, Hb, gradHb, alpha, diff=None, xi=XI, beta=BETA):
    """Nodal matrix of w -> w + alpha*T[h_b] w with T w = -div(H grad w)/3 + div(w grad H)/6.

    Hb : (K, Np) nodal values of H = h_b^2; gradHb : pair of (K, Np) nodal fields.
    """
    if diff is None:
        diff = assemble_diff_matrices(space, xi=xi, beta=beta)
    ref = space.ref
    conn, wall = _boundary_masks(space)
    c = conn[..., None].astype(float)
    open_ = (~conn & ~wall)[..., None].astype(float)
    s = upwind_sign(space.nx, space.ny, beta)[..., None] * np.ones(space.nfq)

    # volume terms with a cubature exact for the degree-(3k-1) integrands
    _, cw, phi, pr, ps = _fine_cubature(space, 3 * ref.k)
    wq = cw[None, :] * space.J[:, None]
    Hq = Hb @ phi.T
    gxq = gradHb[0] @ phi.T
    gyq = gradHb[1] @ phi.T
    dphix = space.rx[:, None, None] * pr[None] + space.sx[:, None, None] * ps[None]
    dphiy = space.ry[:, None, None] * pr[None] + space.sy[:, None, None] * ps[None]
    Kx = np.einsum("kq,kqi,qj->kij", wq * Hq, dphix, phi)
    Ky = np.einsum("kq,kqi,qj->kij", wq * Hq, dphiy, phi)
    C = np.einsum("kq,kqi,qj->kij", wq * gxq, dphix, phi) + np.einsum("kq,kqi,qj->kij", wq * gyq, dphiy, phi)

    # face averages of H and grad(H).n
    Hf = space.trace(Hb)
    Havg = 0.5 * (Hf + space.exterior(Hf))
    gxf, gyf = space.trace(gradHb[0]), space.trace(gradHb[1])
    nx, ny = space.nx[..., None], space.ny[..., None]
    gn = 0.5 * ((gxf + space.exterior(gxf)) * nx + (gyf + space.exterior(gyf)) * ny)
    pen = xi / space.mesh.face_length[..., None]

    # normal diffusive flux: (1/2+s) p^- + (1/2-s) p^+ + pen [w] on connected
    # faces, p^- on open boundaries, 0 on walls
    ci = c * (0.5 + s) + open_
    ce = c * (0.5 - s)
    FHx = face_operator(space, Havg * nx * ci, Havg * nx * ce)
    FHy = face_operator(space, Havg * ny * ci, Havg * ny * ce)
    Pen = face_operator(space, -Havg * pen * c, Havg * pen * c)
    # advective flux w_hat (grad H . n): upwind on connected faces, w^- on open, 0 on walls
    FA = face_operator(space, gn * (c * (0.5 - s) + open_), gn * c * (0.5 + s))

    Minv = _mass_inverse(space)
    T = ((block_diagonal(Kx) - FHx) @ diff.Dx + (block_diagonal(Ky) - FHy) @ diff.Dy - Pen) / 3.0 \
        + (FA - block_diagonal(C)) / 6.0
    n = space.K * space.Np
    A = (sp.identity(n, format="csr") + alpha * (Minv @ T)).tocsr()
    A.sort_indices()
    return A


def assemble_elliptic_operator(space, Hb, gradHb, alpha, diff=None, xi=XI, beta=BETA):
    """Assemble and factorize 1 + alpha*T[h_b] once per bathymetry."""
    t0 = time.perf_counter()
    A = elliptic_matrix(space, Hb, gradHb, alpha, diff=diff, xi=xi, beta=beta)
    fac = Factorization(A)
    return EllipticSystem(alpha=alpha, A=A, factorization=fac, beta=np.asarray(beta), xi=xi,
                          assembly_seconds=time.perf_counter() - t0)


def elliptic_solve(system, f):
    return system.solve(f)
