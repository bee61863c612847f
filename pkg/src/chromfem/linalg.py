"""Sparse matrix construction and deterministic linear solvers.

Matrices are plain ``scipy.sparse.csr_matrix`` objects with sorted indices and
summed duplicates.  Systems are solved either by a sparse direct factorization
or by restarted GMRES; the zero-fill incomplete factorization used for
preconditioning is implemented here because SciPy only ships a threshold ILU.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from numba import njit


class LinearSolverError(RuntimeError):
    """Base class for solver failures."""


class SingularMatrixError(LinearSolverError):
    """Direct factorization hit a zero pivot."""


class NonConvergenceError(LinearSolverError):
    """Iteration budget exhausted; carries the final relative residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


@dataclass
class SolverConfig:
    """Linear solver selection.

    ``method="auto"`` picks a sparse direct solve for systems of dimension at
    most ``direct_limit`` and preconditioned GMRES above it; assembled
    transport systems are mildly nonsymmetric and well conditioned at desk
    scale, so both routes agree to ``tol``.
    """

    method: str = "auto"  # auto | direct | gmres
    tol: float = 1e-12
    max_iter: int = 2000
    restart: int = 50
    preconditioner: str = "ilu0"  # none | jacobi | ilu0
    direct_limit: int = 2000

    def __post_init__(self):
        if self.method not in ("auto", "direct", "gmres"):
            raise ValueError(f"unknown solver method {self.method!r}")
        if self.preconditioner not in ("none", "jacobi", "ilu0"):
            raise ValueError(f"unknown preconditioner {self.preconditioner!r}")
        if not self.tol > 0.0:
            raise ValueError("solver tolerance must be positive")
        if self.restart < 1:
            raise ValueError("GMRES restart length must be at least 1")


def csr_from_triplets(n: int, triplets) -> sp.csr_matrix:
    """Build an ``n x n`` CSR matrix from ``(row, col, value)`` entries.

    Duplicate coordinates are summed; explicit zeros are kept as structural
    entries.  ``triplets`` may be a sequence of triples or a ``(rows, cols,
    values)`` tuple of arrays.
    """
    if n < 1:
        raise ValueError("matrix dimension must be at least 1")
    if isinstance(triplets, tuple) and len(triplets) == 3:
        rows, cols, vals = (np.asarray(a) for a in triplets)
    else:
        triplets = list(triplets)
        if triplets:
            rows, cols, vals = (np.asarray(a) for a in zip(*triplets))
        else:
            rows = cols = np.empty(0, dtype=np.int64)
            vals = np.empty(0, dtype=np.float64)
    if rows.size and (rows.min() < 0 or rows.max() >= n or cols.min() < 0 or cols.max() >= n):
        raise ValueError("triplet index out of range")
    A = sp.coo_matrix((vals.astype(np.float64), (rows, cols)), shape=(n, n)).tocsr()
    A.sort_indices()
    return A


@njit(cache=True)
def _diag_positions(n, indptr, indices):
    diag = np.empty(n, dtype=np.int64)
    for i in range(n):
        pos = -1
        lo, hi = indptr[i], indptr[i + 1]
        while lo < hi:
            mid = (lo + hi) // 2
            if indices[mid] < i:
                lo = mid + 1
            elif indices[mid] > i:
                hi = mid
            else:
                pos = mid
                break
        diag[i] = pos
    return diag


@njit(cache=True)
def _ilu0_factor(n, indptr, indices, data, diag):
    """In-place zero-fill ILU on CSR data (sorted indices, diagonal present).

    Returns -1 on success, else the row index of the zero pivot.
    """
    for i in range(n):
        for kk in range(indptr[i], indptr[i + 1]):
            k = indices[kk]
            if k >= i:
                break
            piv = data[diag[k]]
            if piv == 0.0:
                return k
            lik = data[kk] / piv
            data[kk] = lik
            # eliminate within the existing sparsity pattern of row i
            for jj in range(diag[k] + 1, indptr[k + 1]):
                j = indices[jj]
                lo, hi = kk + 1, indptr[i + 1]
                while lo < hi:
                    mid = (lo + hi) // 2
                    if indices[mid] < j:
                        lo = mid + 1
                    elif indices[mid] > j:
                        hi = mid
                    else:
                        data[mid] -= lik * data[jj]
                        break
        if data[diag[i]] == 0.0:
            return i
    return -1


@njit(cache=True)
def _ilu0_apply(n, indptr, indices, data, diag, b, x):
    # forward solve with unit lower factor
    for i in range(n):
        s = b[i]
        for kk in range(indptr[i], diag[i]):
            s -= data[kk] * x[indices[kk]]
        x[i] = s
    # backward solve with upper factor
    for i in range(n - 1, -1, -1):
        s = x[i]
        for kk in range(diag[i] + 1, indptr[i + 1]):
            s -= data[kk] * x[indices[kk]]
        x[i] = s / data[diag[i]]


class ILU0:
    """Zero-fill incomplete LU factorization of a CSR matrix."""

    def __init__(self, A: sp.csr_matrix):
        A = A.tocsr()
        A.sort_indices()
        n = A.shape[0]
        self.n = n
        self.indptr = A.indptr.astype(np.int64)
        self.indices = A.indices.astype(np.int64)
        self.data = A.data.astype(np.float64).copy()
        self.diag = _diag_positions(n, self.indptr, self.indices)
        if np.any(self.diag < 0):
            raise SingularMatrixError("ILU(0) requires every diagonal entry present")
        bad = _ilu0_factor(n, self.indptr, self.indices, self.data, self.diag)
        if bad >= 0:
            raise SingularMatrixError(f"zero pivot in ILU(0) at row {bad}")

    def solve(self, b: np.ndarray) -> np.ndarray:
        x = np.empty(self.n, dtype=np.float64)
        _ilu0_apply(self.n, self.indptr, self.indices, self.data, self.diag,
                    np.asarray(b, dtype=np.float64), x)
        return x

    def as_operator(self) -> spla.LinearOperator:
        return spla.LinearOperator((self.n, self.n), matvec=self.solve)


def _make_preconditioner(A: sp.csr_matrix, kind: str):
    if kind == "none":
        return None
    if kind == "jacobi":
        d = A.diagonal()
        if np.any(d == 0.0):
            raise SingularMatrixError("Jacobi preconditioner requires nonzero diagonal")
        inv = 1.0 / d
        return spla.LinearOperator(A.shape, matvec=lambda v: inv * v)
    return ILU0(A).as_operator()


def solve(A: sp.csr_matrix, b: np.ndarray, cfg: SolverConfig | None = None) -> np.ndarray:
    """Solve ``A x = b`` deterministically.

    Raises :class:`SingularMatrixError` on zero pivots and
    :class:`NonConvergenceError` when GMRES exhausts its iteration budget.
    """
    if cfg is None:
        cfg = SolverConfig()
    A = A.tocsr()
    n = A.shape[0]
    if A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (n,):
        raise ValueError(f"right-hand side has shape {b.shape}, expected ({n},)")

    method = cfg.method
    if method == "auto":
        method = "direct" if n <= cfg.direct_limit else "gmres"

    if method == "direct":
        try:
            lu = spla.splu(A.tocsc())
        except RuntimeError as err:  # SuperLU signals exact singularity this way
            raise SingularMatrixError(str(err)) from err
        return lu.solve(b)

    M = _make_preconditioner(A, cfg.preconditioner)
    cycles = max(1, math.ceil(cfg.max_iter / cfg.restart))
    x, info = spla.gmres(A, b, rtol=cfg.tol, atol=0.0,
                         restart=cfg.restart, maxiter=cycles, M=M)
    if info != 0:
        bnorm = np.linalg.norm(b)
        res = np.linalg.norm(A @ x - b) / (bnorm if bnorm > 0.0 else 1.0)
        raise NonConvergenceError(
            f"GMRES failed to reach rtol={cfg.tol:g} within {cfg.max_iter} "
            f"iterations (relative residual {res:.3e})", residual=res)
    return x
