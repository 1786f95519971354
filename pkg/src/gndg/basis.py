"""Reference-element machinery for the nodal DG discretization on triangles.

The reference triangle has vertices (-1,-1), (1,-1), (-1,1) (area 2). Local
faces are numbered 0: v0->v1, 1: v1->v2, 2: v2->v0, traversed counter-clockwise.
All public data is nodal; the orthonormal modal basis only serves to build the
Vandermonde and derivative matrices.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import gamma, roots_jacobi, roots_legendre

MAX_ORDER = 4
REF_VERTICES = np.array([[-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]])
REF_AREA = 2.0
FACE_VERTICES = ((0, 1), (1, 2), (2, 0))

# warp-and-blend interpolation parameter, optimized per order
_ALPHA_OPT = (0.0, 0.0, 1.4152, 0.1001, 0.2751, 0.9800, 1.0999, 1.2832)


# ---------------------------------------------------------------------------
# 1D polynomials and rules
# ---------------------------------------------------------------------------

def jacobi_p(x, alpha, beta, n):
    """Orthonormal Jacobi polynomial P_n^(alpha,beta) evaluated at x."""
    x = np.asarray(x, dtype=float)
    pl = np.zeros((n + 1,) + x.shape)
    gamma0 = (2.0 ** (alpha + beta + 1) / (alpha + beta + 1)
              * gamma(alpha + 1) * gamma(beta + 1) / gamma(alpha + beta + 1))
    pl[0] = 1.0 / np.sqrt(gamma0)
    if n == 0:
        return pl[0]
    gamma1 = (alpha + 1) * (beta + 1) / (alpha + beta + 3) * gamma0
    pl[1] = ((alpha + beta + 2) * x / 2 + (alpha - beta) / 2) / np.sqrt(gamma1)
    aold = 2.0 / (2 + alpha + beta) * np.sqrt((alpha + 1) * (beta + 1) / (alpha + beta + 3))
    for i in range(1, n):
        h1 = 2 * i + alpha + beta
        anew = 2.0 / (h1 + 2) * np.sqrt(
            (i + 1) * (i + 1 + alpha + beta) * (i + 1 + alpha) * (i + 1 + beta)
            / (h1 + 1) / (h1 + 3))
        bnew = -(alpha ** 2 - beta ** 2) / h1 / (h1 + 2)
        pl[i + 1] = 1.0 / anew * (-aold * pl[i - 1] + (x - bnew) * pl[i])
        aold = anew
    return pl[n]


def grad_jacobi_p(x, alpha, beta, n):
    """Derivative of the orthonormal Jacobi polynomial."""
    if n == 0:
        return np.zeros_like(np.asarray(x, dtype=float))
    return np.sqrt(n * (n + alpha + beta + 1)) * jacobi_p(x, alpha + 1, beta + 1, n - 1)


def gauss_lobatto(n):
    """n-point Gauss-Lobatto nodes and weights on [-1, 1]."""
    if n < 2:
        raise ValueError("Gauss-Lobatto rule needs at least 2 points")
    if n == 2:
        return np.array([-1.0, 1.0]), np.array([1.0, 1.0])
    inner, _ = roots_jacobi(n - 2, 1.0, 1.0)
    x = np.concatenate([[-1.0], inner, [1.0]])
    # w_i = 2 / (n (n-1) P_{n-1}(x_i)^2) with classical Legendre P
    p = np.polynomial.legendre.legval(x, np.eye(n)[n - 1])
    w = 2.0 / (n * (n - 1) * p ** 2)
    return x, w


def gauss_legendre(n):
    x, w = roots_legendre(n)
    return np.asarray(x), np.asarray(w)


# ---------------------------------------------------------------------------
# Triangle: nodes, modal basis, cubature
# ---------------------------------------------------------------------------

def _warp_factor(n, rout):
    lgl, _ = gauss_lobatto(n + 1)
    req = np.linspace(-1.0, 1.0, n + 1)
    veq = np.stack([jacobi_p(req, 0, 0, i) for i in range(n + 1)], axis=1)
    pmat = np.stack([jacobi_p(rout, 0, 0, i) for i in range(n + 1)], axis=0)
    lmat = np.linalg.solve(veq.T, pmat)
    warp = lmat.T @ (lgl - req)
    zerof = (np.abs(rout) < 1.0 - 1.0e-10).astype(float)
    sf = 1.0 - (zerof * rout) ** 2
    return warp / sf + warp * (zerof - 1.0)


def warp_blend_nodes(n):
    """Interpolation nodes on the reference triangle with Gauss-Lobatto edge traces.

    For n <= 3 these coincide with the Fekete points.
    """
    alpha = _ALPHA_OPT[n - 1] if n <= len(_ALPHA_OPT) else 5.0 / 3.0
    l1, l3 = [], []
    for i in range(n + 1):
        for j in range(n + 1 - i):
            l1.append(i / n)
            l3.append(j / n)
    l1 = np.array(l1)
    l3 = np.array(l3)
    l2 = 1.0 - l1 - l3
    x = -l2 + l3
    y = (-l2 - l3 + 2.0 * l1) / np.sqrt(3.0)
    blend1, blend2, blend3 = 4 * l2 * l3, 4 * l1 * l3, 4 * l1 * l2
    warp1 = blend1 * _warp_factor(n, l3 - l2) * (1 + (alpha * l1) ** 2)
    warp2 = blend2 * _warp_factor(n, l1 - l3) * (1 + (alpha * l2) ** 2)
    warp3 = blend3 * _warp_factor(n, l2 - l1) * (1 + (alpha * l3) ** 2)
    x = x + warp1 + np.cos(2 * np.pi / 3) * warp2 + np.cos(4 * np.pi / 3) * warp3
    y = y + np.sin(2 * np.pi / 3) * warp2 + np.sin(4 * np.pi / 3) * warp3
    # equilateral -> reference right triangle
    L1 = (np.sqrt(3.0) * y + 1.0) / 3.0
    L2 = (-3.0 * x - np.sqrt(3.0) * y + 2.0) / 6.0
    L3 = (3.0 * x - np.sqrt(3.0) * y + 2.0) / 6.0
    r = -L2 + L3 - L1
    s = -L2 - L3 + L1
    return np.stack([r, s], axis=1)


def _rs_to_ab(r, s):
    a = np.where(np.abs(1.0 - s) > 1e-14, 2.0 * (1.0 + r) / np.where(s != 1.0, 1.0 - s, 1.0) - 1.0, -1.0)
    return a, np.asarray(s, dtype=float)


def mode_indices(n):
    return [(i, j) for i in range(n + 1) for j in range(n + 1 - i)]


def simplex_modes(n, rs):
    """Orthonormal modal basis (and its gradient) at points rs, shape (npts, Np)."""
    r, s = rs[:, 0], rs[:, 1]
    a, b = _rs_to_ab(r, s)
    cols, dr_cols, ds_cols = [], [], []
    for i, j in mode_indices(n):
        fa = jacobi_p(a, 0, 0, i)
        dfa = grad_jacobi_p(a, 0, 0, i)
        gb = jacobi_p(b, 2 * i + 1, 0, j)
        dgb = grad_jacobi_p(b, 2 * i + 1, 0, j)
        cols.append(np.sqrt(2.0) * fa * gb * (1 - b) ** i)
        # d/dr and d/ds in collapsed coordinates (Hesthaven & Warburton, GradSimplex2DP)
        dmodedr = dfa * gb
        if i > 0:
            dmodedr = dmodedr * (0.5 * (1 - b)) ** (i - 1)
        dmodeds = dfa * (gb * (0.5 * (1 + a)))
        if i > 0:
            dmodeds = dmodeds * (0.5 * (1 - b)) ** (i - 1)
        tmp = dgb * (0.5 * (1 - b)) ** i
        if i > 0:
            tmp = tmp - 0.5 * i * gb * (0.5 * (1 - b)) ** (i - 1)
        dmodeds = dmodeds + fa * tmp
        scale = 2.0 ** (i + 0.5)
        dr_cols.append(dmodedr * scale)
        ds_cols.append(dmodeds * scale)
    return np.stack(cols, 1), np.stack(dr_cols, 1), np.stack(ds_cols, 1)


def triangle_cubature(degree):
    """Collapsed-coordinate (Stroud) cubature on the reference triangle.

    Returns points (nq, 2) and positive weights summing to the reference area,
    exact for bivariate polynomials of total degree <= degree.
    """
    n = max(1, (degree + 2) // 2)
    xa, wa = gauss_legendre(n)
    xb, wb = roots_jacobi(n, 1.0, 0.0)
    A, B = np.meshgrid(xa, xb, indexing="ij")
    W = np.outer(wa, wb) * 0.5
    r = 0.5 * (1 + A) * (1 - B) - 1.0
    return np.stack([r.ravel(), B.ravel()], axis=1), W.ravel()


def zhang_shu_beta(k):
    """Smallest integer beta with 2*beta - 3 >= k."""
    return max(2, int(np.ceil((k + 3) / 2.0)))


def normalized_lobatto_weights(beta):
    _, w = gauss_lobatto(beta)
    return w / w.sum()


@dataclass(frozen=True)
class PositivityRule:
    points: np.ndarray   # (ns, 2) reference coordinates
    weights: np.ndarray  # (ns,), sum = REF_AREA
    beta: int
    omega1: float        # first normalized Gauss-Lobatto weight


@lru_cache(maxsize=None)
def zhang_shu_nodes(k):
    """Positivity node set: three collapsed tensor rules (beta-point Gauss-Lobatto
    along the edge opposite a vertex, (k+1)-point Gauss towards it), averaged.

    Contains the (k+1)-point Gauss nodes of every face, has positive weights,
    and integrates P^k exactly.
    """
    beta = zhang_shu_beta(k)
    gl_x, _ = gauss_lobatto(beta)
    gl_w = normalized_lobatto_weights(beta)
    g_x, g_w = gauss_legendre(k + 1)
    v = 0.5 * (gl_x + 1.0)
    u = 0.5 * (g_x + 1.0)
    wu = 0.5 * g_w
    pts, wts = [], []
    jac = 2.0 * REF_AREA  # |det(A - V, B - A)| on the reference triangle
    for i in range(3):
        V = REF_VERTICES[i]
        A = REF_VERTICES[(i + 1) % 3]
        B = REF_VERTICES[(i + 2) % 3]
        for ui, wui in zip(u, wu):
            for vj, wvj in zip(v, gl_w):
                pts.append(V + ui * (A + vj * (B - A) - V))
                wts.append(wui * wvj * ui * jac / 3.0)
    pts = np.array(pts)
    wts = np.array(wts)
    # merge coincident nodes shared by two of the three rules
    keep, merged_w = [], []
    for p, w in zip(pts, wts):
        for idx, q in enumerate(keep):
            if np.linalg.norm(p - q) < 1e-12:
                merged_w[idx] += w
                break
        else:
            keep.append(p)
            merged_w.append(w)
    points = np.array(keep)
    points.setflags(write=False)
    weights = np.array(merged_w)
    weights.setflags(write=False)
    return PositivityRule(points, weights, beta, float(gl_w[0]))


def face_points(face, t):
    """Map parameter t in [-1,1] to reference coordinates on a local face."""
    a, b = FACE_VERTICES[face]
    t = np.asarray(t)[:, None]
    return 0.5 * (1 - t) * REF_VERTICES[a] + 0.5 * (1 + t) * REF_VERTICES[b]


# ---------------------------------------------------------------------------
# Reference element
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ReferenceElement:
    """Order-k nodal reference element and its quadrature rules."""

    k: int
    nodes: np.ndarray          # (Np, 2)
    V: np.ndarray              # Vandermonde, V[i, m] = psi_m(node_i)
    Vinv: np.ndarray
    mass: np.ndarray           # M_hat[i, j] = int phi_i phi_j
    mass_inv: np.ndarray
    Sr: np.ndarray             # S_hat_r[i, j] = int phi_i d_r phi_j
    Ss: np.ndarray
    Dr: np.ndarray             # nodal differentiation matrices
    Ds: np.ndarray
    cub_points: np.ndarray     # (nq, 2)
    cub_weights: np.ndarray
    cub_degree: int
    cub_interp: np.ndarray     # (nq, Np) phi_j at cubature points
    cub_dr: np.ndarray         # (nq, Np) d_r phi_j at cubature points
    cub_ds: np.ndarray
    face_gauss: np.ndarray     # (nfq,) parameter of face Gauss nodes on [-1,1]
    face_weights: np.ndarray   # (nfq,) sum = 2
    face_interp: np.ndarray    # (3, nfq, Np)
    pos_rule: PositivityRule = field(repr=False)
    pos_interp: np.ndarray = field(repr=False)   # (ns, Np)

    @property
    def Np(self):
        return self.nodes.shape[0]

    @property
    def nfq(self):
        return self.face_gauss.shape[0]

    def basis_at(self, rs):
        """Nodal basis functions at reference points, shape (npts, Np)."""
        psi, _, _ = simplex_modes(self.k, np.atleast_2d(rs))
        return psi @ self.Vinv

    def grad_basis_at(self, rs):
        _, pr, ps = simplex_modes(self.k, np.atleast_2d(rs))
        return pr @ self.Vinv, ps @ self.Vinv


def n_nodes(k):
    return (k + 1) * (k + 2) // 2


@lru_cache(maxsize=None)
def reference_element(k):
    """Build (and cache) the order-k reference element, 1 <= k <= 4."""
    if not isinstance(k, (int, np.integer)) or not 1 <= k <= MAX_ORDER:
        raise ValueError(f"unsupported polynomial order k={k!r}; expected 1..{MAX_ORDER}")
    k = int(k)
    nodes = warp_blend_nodes(k)
    V, Vr, Vs = simplex_modes(k, nodes)
    Vinv = np.linalg.inv(V)
    mass = Vinv.T @ Vinv
    Dr = Vr @ Vinv
    Ds = Vs @ Vinv
    Sr = mass @ Dr
    Ss = mass @ Ds
    cub_degree = 2 * k + 1
    cp, cw = triangle_cubature(cub_degree)
    psi, pr, ps = simplex_modes(k, cp)
    fg, fw = gauss_legendre(k + 1)
    face_interp = np.stack([simplex_modes(k, face_points(f, fg))[0] @ Vinv for f in range(3)])
    rule = zhang_shu_nodes(k)
    pos_interp = simplex_modes(k, rule.points)[0] @ Vinv
    arrays = dict(nodes=nodes, V=V, Vinv=Vinv, mass=mass, mass_inv=np.linalg.inv(mass),
                  Sr=Sr, Ss=Ss, Dr=Dr, Ds=Ds, cub_points=cp, cub_weights=cw,
                  cub_interp=psi @ Vinv, cub_dr=pr @ Vinv, cub_ds=ps @ Vinv,
                  face_gauss=fg, face_weights=fw, face_interp=face_interp,
                  pos_interp=pos_interp)
    for arr in arrays.values():
        arr.setflags(write=False)
    return ReferenceElement(k=k, cub_degree=cub_degree, pos_rule=rule, **arrays)


def info(k):
    """Summary of the order-k reference element (used by ``gndg basis info``)."""
    ref = reference_element(k)
    rule = ref.pos_rule
    return {
        "k": k,
        "nodes": ref.Np,
        "volume_cubature_points": len(ref.cub_weights),
        "volume_cubature_degree": ref.cub_degree,
        "face_gauss_points": ref.nfq,
        "face_quadrature_degree": 2 * ref.nfq - 1,
        "positivity_points": len(rule.weights),
        "lobatto_points_beta": rule.beta,
        "omega1": rule.omega1,
        "cfl_factor": 2.0 / 3.0 * rule.omega1,
    }
