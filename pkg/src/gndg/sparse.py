"""Block sparse assembly and direct LU factorization with reuse."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.sparse as sp
import scipy.sparse.linalg as spla

SINGULAR_PIVOT_TOL = 1e-14


class SingularMatrixError(RuntimeError):
    """Raised when a pivot falls below the relative singularity threshold."""


def assemble(rows, cols, blocks, n_elements, block_size=None):
    """Assemble dense element blocks into a CSR matrix.

    Parameters
    ----------
    rows, cols : int arrays (nb,)
        Row and column element of each block.
    blocks : array (nb, Np, Np)
    n_elements : int
        Number of block rows/columns.

    Duplicate blocks are summed in input order after a stable sort by
    (row, col), so a fixed input gives a bitwise reproducible matrix.
    """
    rows = np.asarray(rows, dtype=np.int64).ravel()
    cols = np.asarray(cols, dtype=np.int64).ravel()
    blocks = np.asarray(blocks, dtype=float)
    if blocks.ndim == 2:
        blocks = blocks[None]
    nb = blocks.shape[0]
    Np = blocks.shape[1] if block_size is None else block_size
    if rows.shape[0] != nb or cols.shape[0] != nb:
        raise ValueError("rows, cols and blocks disagree in length")
    if nb and (rows.min() < 0 or cols.min() < 0 or rows.max() >= n_elements or cols.max() >= n_elements):
        raise IndexError("block index out of range")
    n = n_elements * Np
    if nb == 0:
        return sp.csr_matrix((n, n))
    order = np.lexsort((cols, rows))
    rows, cols, blocks = rows[order], cols[order], blocks[order]
    key = rows * n_elements + cols
    start = np.flatnonzero(np.r_[True, key[1:] != key[:-1]])
    summed = np.add.reduceat(blocks, start, axis=0)
    ur, uc = rows[start], cols[start]
    # block-sparse row structure, then scalar CSR
    bsr = sp.bsr_matrix((summed, uc, np.searchsorted(ur, np.arange(n_elements + 1))),
                        shape=(n, n), blocksize=(Np, Np))
    A = bsr.tocsr()
    A.sort_indices()
    return A


def block_diagonal(blocks):
    """CSR matrix with the given (K, Np, Np) blocks on the diagonal."""
    K = blocks.shape[0]
    idx = np.arange(K)
    return assemble(idx, idx, blocks, K)


@dataclass(frozen=True)
class FactorStats:
    n: int
    nnz: int
    nnz_factors: int
    fill_ratio: float
    min_pivot_ratio: float
    seconds: float


class Factorization:
    """Immutable LU factorization; ``solve`` may be called any number of times."""

    def __init__(self, A, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.1):
        A = sp.csc_matrix(A)
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"matrix must be square, got {A.shape}")
        t0 = time.perf_counter()
        try:
            lu = spla.splu(A, permc_spec=permc_spec, diag_pivot_thresh=diag_pivot_thresh,
                           options=dict(SymmetricMode=False))
        except RuntimeError as exc:
            raise SingularMatrixError(str(exc)) from exc
        elapsed = time.perf_counter() - t0
        udiag = np.abs(lu.U.diagonal())
        scale = max(abs(A).max(), 1e-300) if A.nnz else 1.0
        ratio = float(udiag.min() / scale) if udiag.size else 1.0
        if ratio < SINGULAR_PIVOT_TOL:
            worst = int(np.argmin(udiag))
            raise SingularMatrixError(
                f"numerically singular pivot {udiag[worst]:.3e} at position {worst} "
                f"(relative {ratio:.3e})")
        self._lu = lu
        self.n = A.shape[0]
        self.stats = FactorStats(n=self.n, nnz=A.nnz, nnz_factors=lu.L.nnz + lu.U.nnz,
                                 fill_ratio=(lu.L.nnz + lu.U.nnz) / max(A.nnz, 1),
                                 min_pivot_ratio=ratio, seconds=elapsed)

    def solve(self, rhs):
        """Solve A x = rhs; rhs may be (n,) or (n, m)."""
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape[0] != self.n:
            raise ValueError(f"rhs has length {rhs.shape[0]}, expected {self.n}")
        if not np.any(rhs):
            return np.zeros_like(rhs)
        return self._lu.solve(np.ascontiguousarray(rhs) if rhs.ndim == 1 else np.asfortranarray(rhs))


def factorize(A, **kwargs):
    return Factorization(A, **kwargs)


def solve(fac, rhs):
    return fac.solve(rhs)


def dump_matrix_market(A, path, comment=""):
    scipy.io.mmwrite(path, sp.coo_matrix(A), comment=comment)
