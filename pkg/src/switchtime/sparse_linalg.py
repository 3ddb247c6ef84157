"""Sparse symmetric matrices and SPD linear solves.

Matrices are stored as :class:`scipy.sparse.csr_matrix` (``indptr``,
``indices``, ``data`` are the row offsets, column indices and values).
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

CsrMatrix = sp.csr_matrix


class SolverError(RuntimeError):
    """Raised when an iterative solve fails to reach its tolerance."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (relative residual {residual:.3e})")
        self.residual = residual


def as_csr(m) -> CsrMatrix:
    """Return ``m`` as a canonical CSR matrix (sorted, duplicate-free indices)."""
    out = sp.csr_matrix(m, dtype=float)
    out.sum_duplicates()
    out.sort_indices()
    return out


def symmetrize(m) -> CsrMatrix:
    """Average ``m`` with its transpose so that stored pairs agree bitwise."""
    m = as_csr(m)
    return as_csr((m + m.T) * 0.5)


def is_symmetric(m: CsrMatrix) -> bool:
    diff = m - m.T
    return diff.count_nonzero() == 0


def spmv(m: CsrMatrix, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[0] != m.shape[1]:
        raise ValueError(f"dimension mismatch: matrix has {m.shape[1]} columns, vector has {x.shape[0]} entries")
    return m @ x


def solve_spd(
    m: CsrMatrix,
    b: np.ndarray,
    rel_tol: float = 1e-12,
    max_iter: int | None = None,
    x0: np.ndarray | None = None,
) -> np.ndarray:
    """Jacobi-preconditioned conjugate gradients for an SPD matrix.

    Returns ``x`` with ``||m x - b|| <= rel_tol * ||b||``. Raises
    :class:`SolverError` if the iteration cap (default ``10 * n``) is hit.
    """
    b = np.asarray(b, dtype=float)
    n = m.shape[0]
    if m.shape[1] != n or b.shape[0] != n:
        raise ValueError("solve_spd needs a square matrix and a matching right-hand side")
    if not 0.0 < rel_tol <= 1e-6:
        raise ValueError("rel_tol must lie in (0, 1e-6]")
    if max_iter is None:
        max_iter = 10 * n

    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n)

    inv_diag = 1.0 / m.diagonal()
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - m @ x
    z = inv_diag * r
    p = z.copy()
    rz = r @ z
    target = rel_tol * bnorm
    for _ in range(max_iter):
        if np.linalg.norm(r) <= target:
            return x
        q = m @ p
        step = rz / (p @ q)
        x += step * p
        r -= step * q
        z = inv_diag * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    # recurrence residual drifts from the true one; decide on the true residual
    res = np.linalg.norm(b - m @ x)
    if res <= target:
        return x
    raise SolverError("conjugate gradients did not converge", res / bnorm)


class FactorizedSpd:
    """Sparse LU factorization of a fixed SPD matrix, reused across solves.

    ``solve`` accepts a vector or a 2-D array of right-hand sides (one per
    column).
    """

    def __init__(self, m: CsrMatrix):
        self.shape = m.shape
        self._lu = splu(sp.csc_matrix(m))

    def solve(self, b: np.ndarray) -> np.ndarray:
        return self._lu.solve(np.asarray(b, dtype=float))
