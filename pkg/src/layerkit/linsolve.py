"""
Solvers for the nonsymmetric systems produced by `layerkit.assembly`.

Main Functionalities
--------------------
1. Restarted GMRES with right preconditioning (modified Gram-Schmidt Arnoldi,
   Givens rotations on the Hessenberg matrix).
2. ILU(0): incomplete LU on the sparsity pattern of A, factored and applied
   by numba-compiled kernels on the CSR arrays.
3. A direct path through banded LU with partial pivoting
   (`scipy.linalg.solve_banded`), for systems where GMRES stagnates.

Examples
--------
>>> import scipy.sparse as sp
>>> x, stats = solve_matrix(sp.csr_matrix([[2.0, 1.0], [1.0, 3.0]]), np.array([3.0, 4.0]))
>>> np.allclose(x, [1.0, 1.0])
True
"""

import logging
import time
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from numba import njit

from layerkit.assembly import SparseSystem

logger = logging.getLogger(__name__)

METHODS = ("gmres", "direct")
PRECONDITIONERS = ("ilu0", "none")


class SolverNotConvergedError(RuntimeError):
    """GMRES stopped above the residual target; `stats` holds the last iterate's statistics."""

    def __init__(self, message: str, stats: "SolveStats"):
        super().__init__(message)
        self.stats = stats


class ZeroPivotError(ValueError):
    """A zero pivot was met at `row` while factoring."""

    def __init__(self, row: int):
        super().__init__(f"Zero pivot in row {row}.")
        self.row = row


class SingularMatrixError(RuntimeError):
    """The banded LU factorization found the matrix singular."""


@dataclass(frozen=True)
class SolveOptions:
    """
    Attributes
    ----------
    method : str
        'gmres' or 'direct'.
    restart : int
        GMRES restart length m.
    rel_tol : float
        Target for ||b - A x|| / ||b||, in (0, 1).
    max_iters : int, optional
        Cap on GMRES iterations; 10 * dimension when None.
    precondition : str
        'ilu0' or 'none'.
    """

    method: str = "gmres"
    restart: int = 50
    rel_tol: float = 1e-12
    max_iters: Optional[int] = None
    precondition: str = "ilu0"

    def validate(self):
        if self.method not in METHODS:
            raise ValueError(f"Unknown solver '{self.method}'. Supported solvers are: {', '.join(METHODS)}.")
        if self.precondition not in PRECONDITIONERS:
            raise ValueError(
                f"Unknown preconditioner '{self.precondition}'. "
                f"Supported preconditioners are: {', '.join(PRECONDITIONERS)}."
            )
        if not 0 < self.rel_tol < 1:
            raise ValueError(f"rel_tol must lie in (0, 1), got {self.rel_tol}.")
        if self.restart < 1:
            raise ValueError(f"restart must be at least 1, got {self.restart}.")
        if self.max_iters is not None and self.max_iters < 1:
            raise ValueError(f"max_iters must be positive, got {self.max_iters}.")


@dataclass(frozen=True)
class SolveStats:
    iterations: int
    relative_residual: float
    seconds: float
    method: str = "gmres"

    def __str__(self):
        return f"iters={self.iterations} relres={self.relative_residual:.3e} secs={self.seconds:.3f}"


# ---------------------------------------------------------------------------
# ILU(0)
# ---------------------------------------------------------------------------

@njit(cache=True)
def _ilu0_factor_csr(indptr, indices, data, diag):
    """In-place IKJ ILU(0) on sorted CSR arrays. Returns the row of a zero pivot or -1."""
    n = indptr.size - 1
    position = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        for p in range(indptr[i], indptr[i + 1]):
            position[indices[p]] = p
        for p in range(indptr[i], diag[i]):
            k = indices[p]
            pivot = data[diag[k]]
            if pivot == 0.0:
                return k
            data[p] /= pivot
            factor = data[p]
            for q in range(diag[k] + 1, indptr[k + 1]):
                target = position[indices[q]]
                if target >= 0:
                    data[target] -= factor * data[q]
        for p in range(indptr[i], indptr[i + 1]):
            position[indices[p]] = -1
        if data[diag[i]] == 0.0:
            return i
    return -1


@njit(cache=True)
def _ilu0_apply(indptr, indices, data, diag, rhs):
    """Solves L U x = rhs with unit lower L and upper U stored together."""
    n = rhs.size
    x = rhs.copy()
    for i in range(n):
        s = x[i]
        for p in range(indptr[i], diag[i]):
            s -= data[p] * x[indices[p]]
        x[i] = s
    for i in range(n - 1, -1, -1):
        s = x[i]
        for p in range(diag[i] + 1, indptr[i + 1]):
            s -= data[p] * x[indices[p]]
        x[i] = s / data[diag[i]]
    return x


class ILU0Preconditioner:
    """
    Incomplete LU factorization with zero fill-in.

    L (unit lower) and U share the CSR arrays of a copy of A; `solve`
    applies (LU)^-1.
    """

    def __init__(self, A):
        A = sp.csr_matrix(A, dtype=float, copy=True)
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"ILU(0) needs a square matrix, got shape {A.shape}.")
        A.sum_duplicates()
        A.sort_indices()

        n = A.shape[0]
        if A.nnz == 0:
            raise ZeroPivotError(0)
        rows = np.repeat(np.arange(n), np.diff(A.indptr))
        on_diagonal = np.flatnonzero(A.indices == rows)
        diag = np.full(n, -1, dtype=np.int64)
        diag[rows[on_diagonal]] = on_diagonal
        missing = np.flatnonzero((diag < 0) | (A.data[np.maximum(diag, 0)] == 0.0))
        if missing.size:
            raise ZeroPivotError(int(missing[0]))

        self._indptr = A.indptr.astype(np.int64)
        self._indices = A.indices.astype(np.int64)
        self._data = A.data.copy()
        self._diag = diag
        self.shape = A.shape

        failed = _ilu0_factor_csr(self._indptr, self._indices, self._data, self._diag)
        if failed >= 0:
            raise ZeroPivotError(int(failed))

    def solve(self, v) -> np.ndarray:
        return _ilu0_apply(self._indptr, self._indices, self._data, self._diag,
                           np.ascontiguousarray(v, dtype=float))

    def _factor_matrix(self) -> sp.csr_matrix:
        return sp.csr_matrix((self._data, self._indices, self._indptr), shape=self.shape)

    def lower(self) -> sp.csr_matrix:
        """Unit lower-triangular factor L."""
        return (sp.tril(self._factor_matrix(), k=-1) + sp.identity(self.shape[0])).tocsr()

    def upper(self) -> sp.csr_matrix:
        """Upper-triangular factor U."""
        return sp.triu(self._factor_matrix()).tocsr()


def ilu0_factor(A) -> ILU0Preconditioner:
    """
    Computes the ILU(0) preconditioner of A.

    Raises
    ------
    ZeroPivotError
        If a diagonal entry is missing or zero, or a zero pivot appears
        during elimination.
    """
    return ILU0Preconditioner(A)


# ---------------------------------------------------------------------------
# GMRES
# ---------------------------------------------------------------------------

def _gmres(A, b: np.ndarray, apply_inverse: Callable[[np.ndarray], np.ndarray],
           restart: int, rel_tol: float, max_iters: int) -> Tuple[np.ndarray, int]:
    """Right-preconditioned restarted GMRES from x0 = 0. Returns x and the iteration count."""
    n = b.size
    x = np.zeros(n)
    target = rel_tol * np.linalg.norm(b)
    residual = b.copy()
    beta = np.linalg.norm(residual)
    iterations = 0

    while beta > target and iterations < max_iters:
        m = min(restart, max_iters - iterations)
        V = np.zeros((m + 1, n))
        H = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        V[0] = residual / beta

        used = 0
        breakdown = False
        for j in range(m):
            w = A @ apply_inverse(V[j])
            w_norm = np.linalg.norm(w)
            # modified Gram-Schmidt
            for i in range(j + 1):
                H[i, j] = w @ V[i]
                w -= H[i, j] * V[i]
            H[j + 1, j] = np.linalg.norm(w)
            breakdown = H[j + 1, j] <= 1e-14 * w_norm
            if not breakdown:
                V[j + 1] = w / H[j + 1, j]

            for i in range(j):
                upper = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = upper
            denominator = np.hypot(H[j, j], H[j + 1, j])
            if denominator == 0.0:
                break
            cs[j] = H[j, j] / denominator
            sn[j] = H[j + 1, j] / denominator
            H[j, j] = denominator
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]

            used = j + 1
            iterations += 1
            if abs(g[j + 1]) <= target or breakdown:
                break

        if used == 0:
            break
        y = scipy.linalg.solve_triangular(H[:used, :used], g[:used])
        x += apply_inverse(V[:used].T @ y)
        residual = b - A @ x
        beta = np.linalg.norm(residual)
        logger.debug("GMRES restart after %d iterations: residual %.3e", iterations, beta)
        if breakdown and beta > target:
            # the Krylov space is exhausted without reaching the target
            break

    return x, iterations


# ---------------------------------------------------------------------------
# Direct solve
# ---------------------------------------------------------------------------

def _banded_solve(A: sp.csr_matrix, b: np.ndarray) -> np.ndarray:
    """Banded LU with partial pivoting; band widths are read off the nonzero pattern."""
    coo = A.tocoo()
    offsets = coo.row - coo.col
    lower = int(max(offsets.max(initial=0), 0))
    upper = int(max(-offsets.min(initial=0), 0))
    ab = np.zeros((lower + upper + 1, A.shape[0]))
    np.add.at(ab, (upper + coo.row - coo.col, coo.col), coo.data)
    logger.debug("Banded LU with %d lower and %d upper diagonals", lower, upper)
    try:
        return scipy.linalg.solve_banded((lower, upper), ab, b)
    except np.linalg.LinAlgError as e:
        raise SingularMatrixError(f"Banded LU failed: {e}") from e


def _relative_residual(A, x: np.ndarray, b: np.ndarray) -> float:
    b_norm = np.linalg.norm(b)
    if b_norm == 0.0:
        return float(np.linalg.norm(A @ x))
    return float(np.linalg.norm(b - A @ x) / b_norm)


def solve_matrix(A, b, opts: Optional[SolveOptions] = None) -> Tuple[np.ndarray, SolveStats]:
    """
    Solves A x = b.

    Parameters
    ----------
    A : sparse matrix or array_like
        Square, nonempty system matrix.
    b : array_like
        Right-hand side.
    opts : SolveOptions, optional
        Defaults to ILU(0)-preconditioned GMRES(50) with rel_tol 1e-12.

    Returns
    -------
    x : numpy.ndarray
    stats : SolveStats
        Iterations, the relative residual recomputed from A, x and b, and
        wall time.

    Raises
    ------
    SolverNotConvergedError
        If GMRES stops above rel_tol.
    ZeroPivotError
        If ILU(0) meets a zero pivot.
    SingularMatrixError
        If the direct factorization is singular.
    """
    opts = opts or SolveOptions()
    opts.validate()
    A = sp.csr_matrix(A, dtype=float)
    b = np.asarray(b, dtype=float)
    n = A.shape[0]
    if n == 0 or A.shape[1] != n:
        raise ValueError(f"Expected a nonempty square matrix, got shape {A.shape}.")
    if b.shape != (n,):
        raise ValueError(f"Right-hand side has shape {b.shape}, expected ({n},).")

    start = time.perf_counter()
    if opts.method == "direct":
        x = _banded_solve(A, b)
        iterations = 1
    else:
        if opts.precondition == "ilu0":
            apply_inverse = ilu0_factor(A).solve
        else:
            def apply_inverse(v):
                return v
        max_iters = opts.max_iters if opts.max_iters is not None else 10 * n
        x, iterations = _gmres(A, b, apply_inverse, opts.restart, opts.rel_tol, max_iters)
    seconds = time.perf_counter() - start

    stats = SolveStats(iterations, _relative_residual(A, x, b), seconds, opts.method)
    if opts.method == "gmres" and stats.relative_residual > opts.rel_tol:
        raise SolverNotConvergedError(
            f"GMRES did not reach rel_tol={opts.rel_tol:g} ({stats})", stats
        )
    logger.info("Solve finished with %s (%s)", opts.method, stats)
    return x, stats


def solve(sys: SparseSystem, opts: Optional[SolveOptions] = None) -> Tuple[np.ndarray, SolveStats]:
    """Solves an assembled system; see `solve_matrix`."""
    return solve_matrix(sys.matrix, sys.rhs, opts)
