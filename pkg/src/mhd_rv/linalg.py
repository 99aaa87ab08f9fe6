"""Minimal sparse kernels: CSR storage, matvec, preconditioned CG.

The CSR container delegates storage and products to scipy.sparse; the
conjugate gradient loop is implemented here because the solver needs Jacobi
preconditioning, deflation of the constant nullspace (periodic Poisson
operators), and a residual-monotonicity check for debugging.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .errors import AssemblyError, SolverError


class CsrMatrix:
    """Compressed sparse row matrix with an optional symmetry flag."""

    def __init__(self, mat: sp.csr_matrix, symmetric: bool = False):
        mat = mat.tocsr()
        mat.sum_duplicates()
        mat.sort_indices()
        self._mat = mat
        self.symmetric = symmetric
        if symmetric:
            self._check_symmetry()

    @classmethod
    def from_coo(cls, n: int, rows, cols, values, symmetric=False):
        mat = sp.coo_matrix((values, (rows, cols)), shape=(n, n))
        return cls(mat.tocsr(), symmetric=symmetric)

    def _check_symmetry(self, nsamples: int = 50, tol: float = 1e-10):
        rng = np.random.default_rng(0)
        n = self.shape[0]
        scale = max(np.abs(self.values).max(), 1e-300)
        for _ in range(min(nsamples, n * n)):
            i = int(rng.integers(n))
            j = int(rng.integers(n))
            if abs(self._mat[i, j] - self._mat[j, i]) > tol * scale:
                raise AssemblyError(
                    f"matrix flagged symmetric but A[{i},{j}] != A[{j},{i}]")

    @property
    def shape(self):
        return self._mat.shape

    @property
    def row_offsets(self) -> np.ndarray:
        return self._mat.indptr

    @property
    def column_indices(self) -> np.ndarray:
        return self._mat.indices

    @property
    def values(self) -> np.ndarray:
        return self._mat.data

    def diagonal(self) -> np.ndarray:
        return self._mat.diagonal()

    def to_dense(self) -> np.ndarray:
        return self._mat.toarray()

    def scipy(self) -> sp.csr_matrix:
        return self._mat

    def __matmul__(self, x):
        return spmv(self, x)


def spmv(a: CsrMatrix, x: np.ndarray) -> np.ndarray:
    """y = A x for x of shape (n,) or (n, k)."""
    x = np.asarray(x)
    if x.shape[0] != a.shape[1]:
        raise AssemblyError(
            f"dimension mismatch: matrix {a.shape}, vector {x.shape}")
    return a.scipy() @ x


def dense_solve(a, b) -> np.ndarray:
    """Direct dense solve, used as an independent oracle in tests."""
    a = a.to_dense() if isinstance(a, CsrMatrix) else np.asarray(a)
    return np.linalg.solve(a, b)


def cg_solve(a: CsrMatrix, b: np.ndarray, tol: float = 1e-10,
             max_iter: int = 10000, preconditioner: str = "jacobi",
             deflate_mean: bool = False, x0=None, debug: bool = False,
             atol: float = 0.0):
    """Preconditioned conjugate gradients for SPD systems.

    Supports blocked right-hand sides (n, k): all columns share the search
    directions' structure but converge independently; iteration stops when
    every column satisfies ||b - Ax|| <= max(tol * ||b||, atol).  The
    absolute floor matters for consistent singular systems whose right-hand
    side is already numerically zero.

    deflate_mean projects the constant vector out of rhs and iterates, for
    singular operators whose nullspace is spanned by constants (periodic or
    pure-Neumann Poisson).  Raises SolverError when max_iter is exhausted.
    """
    b = np.asarray(b, dtype=float)
    squeeze = b.ndim == 1
    if squeeze:
        b = b[:, None]
    n, k = b.shape

    if preconditioner == "jacobi":
        d = a.diagonal()
        if np.any(d <= 0.0):
            raise SolverError("Jacobi preconditioner needs positive diagonal")
        minv = 1.0 / d
    elif preconditioner == "none":
        minv = None
    else:
        raise SolverError(f"unknown preconditioner {preconditioner!r}")

    def precondition(r):
        return r * minv[:, None] if minv is not None else r

    def deflate(v):
        if deflate_mean:
            v -= v.mean(axis=0, keepdims=True)
        return v

    b = deflate(b.copy())
    bnorm = np.linalg.norm(b, axis=0)
    target = np.maximum(tol * np.where(bnorm > 0.0, bnorm, 1.0), atol)

    x = np.zeros_like(b) if x0 is None else deflate(np.array(x0, dtype=float,
                                                             copy=True))
    if x.ndim == 1:
        x = x[:, None]
    r = deflate(b - spmv(a, x))
    if np.all(np.linalg.norm(r, axis=0) <= target):
        xr = x[:, 0] if squeeze else x
        return xr, 0

    z = precondition(r)
    p = z.copy()
    rz = np.einsum("ij,ij->j", r, z)
    last_pnorm = np.sqrt(np.maximum(rz, 0.0))

    for it in range(1, max_iter + 1):
        q = deflate(spmv(a, p))
        pq = np.einsum("ij,ij->j", p, q)
        alpha = np.where(pq > 0.0, rz / np.where(pq == 0.0, 1.0, pq), 0.0)
        x += alpha[None, :] * p
        r -= alpha[None, :] * q
        resid = np.linalg.norm(r, axis=0)
        if np.all(resid <= target):
            xr = x[:, 0] if squeeze else x
            return xr, it
        z = precondition(r)
        rz_new = np.einsum("ij,ij->j", r, z)
        if debug:
            pnorm = np.sqrt(np.maximum(rz_new, 0.0))
            if np.any(pnorm > last_pnorm * (1.0 + 1e-10) + 1e-300):
                raise SolverError(
                    "preconditioned residual increased", residual=resid)
            last_pnorm = pnorm
        beta = rz_new / np.where(rz == 0.0, 1.0, rz)
        p = z + beta[None, :] * p
        rz = rz_new

    raise SolverError(
        f"CG did not converge in {max_iter} iterations "
        f"(residual {np.max(resid / target) * tol:.3e} vs tol {tol:.1e})",
        residual=float(np.max(resid)), iterations=max_iter)
