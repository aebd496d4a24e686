"""Dense and sparse matrix kernels shared by the solvers.

Dense matrices are float64 arrays kept in column-major (Fortran) order so
LAPACK factorizations work in place; sparse matrices are CSR with sorted,
duplicate-free indices.  Row-oriented products dominate the solver inner
loops, which is why CSR is the only sparse format supported.

Spectral-norm and smallest-singular-value estimates use power iteration on
``A^T A`` (inverse power iteration through an LU factorization for the
smallest).  The iteration stops once the Rayleigh quotient stabilizes, so on
matrices whose extreme singular values are tightly clustered the returned
value carries the cluster's width as error; on matrices with a spectral gap
it is accurate to roughly ``tol``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp

__all__ = [
    "SingularMatrixError",
    "NoConvergenceError",
    "LuFactors",
    "as_vector",
    "to_dense",
    "is_sparse",
    "matvec",
    "matvec_transpose",
    "lu_factor",
    "lu_solve",
    "norm2",
    "matrix_norm2_estimate",
    "sigma_min_estimate",
    "sign_diag",
]

# Pivots below this fraction of the largest entry magnitude are treated as zero.
PIVOT_RTOL = 1e-14


class SingularMatrixError(Exception):
    """LU factorization met a pivot indistinguishable from zero."""


class NoConvergenceError(Exception):
    """An iterative estimate ran out of iterations before stabilizing."""


def is_sparse(A) -> bool:
    return sp.issparse(A)


def as_vector(x) -> np.ndarray:
    """Copy ``x`` into a contiguous 1-D float64 array."""
    v = np.array(x, dtype=np.float64, copy=True).reshape(-1)
    return np.ascontiguousarray(v)


def to_dense(A) -> np.ndarray:
    """Return ``A`` as a column-major float64 array (always a copy)."""
    if is_sparse(A):
        d = A.toarray()
    else:
        d = np.array(A, dtype=np.float64, copy=True)
    if d.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got ndim={d.ndim}")
    return np.asfortranarray(d, dtype=np.float64)


def _check_shapes(A, x: np.ndarray, rows_or_cols: int, what: str) -> None:
    if x.ndim != 1:
        raise ValueError(f"{what}: expected a 1-D vector, got ndim={x.ndim}")
    if x.shape[0] != rows_or_cols:
        raise ValueError(
            f"{what}: vector length {x.shape[0]} does not match matrix "
            f"dimension {rows_or_cols}"
        )


def matvec(A, x: np.ndarray) -> np.ndarray:
    """Product ``A @ x`` for dense or CSR ``A``."""
    _check_shapes(A, x, A.shape[1], "matvec")
    return A @ x


def matvec_transpose(A, x: np.ndarray) -> np.ndarray:
    """Product ``A.T @ x`` without forming the transpose densely."""
    _check_shapes(A, x, A.shape[0], "matvec_transpose")
    return A.T @ x


@dataclass(frozen=True)
class LuFactors:
    """Packed LU factorization with partial pivoting (LAPACK layout)."""

    lu: np.ndarray
    piv: np.ndarray
    n: int


def lu_factor(A) -> LuFactors:
    """Factor a square matrix as ``P A = L U`` with partial pivoting.

    Sparse input is widened to dense storage; this module is meant for desk
    scale, where the O(n^2) memory is acceptable.  Raises
    :class:`SingularMatrixError` when any pivot magnitude falls below
    ``PIVOT_RTOL`` times the largest entry magnitude.
    """
    d = to_dense(A)
    if d.shape[0] != d.shape[1]:
        raise ValueError(f"lu_factor: matrix must be square, got shape {d.shape}")
    n = d.shape[0]
    scale = float(np.max(np.abs(d))) if d.size else 0.0
    if scale == 0.0:
        raise SingularMatrixError("lu_factor: matrix is identically zero")
    with warnings.catch_warnings():
        # scipy warns instead of raising on exact zero pivots; the pivot
        # check below owns that diagnosis.
        warnings.simplefilter("ignore")
        lu, piv = scipy.linalg.lu_factor(d, check_finite=False)
    pivots = np.abs(np.diag(lu))
    bad = np.flatnonzero(pivots < PIVOT_RTOL * scale)
    if bad.size:
        raise SingularMatrixError(
            f"lu_factor: pivot {bad[0]} has magnitude {pivots[bad[0]]:.3e}, "
            f"below {PIVOT_RTOL:.0e} * max|A| = {PIVOT_RTOL * scale:.3e}"
        )
    return LuFactors(lu=lu, piv=piv, n=n)


def lu_solve(factors: LuFactors, b: np.ndarray, transpose: bool = False) -> np.ndarray:
    """Solve ``A x = b`` (or ``A.T x = b``) from packed LU factors."""
    _check_shapes(None, b, factors.n, "lu_solve")
    return scipy.linalg.lu_solve(
        (factors.lu, factors.piv), b, trans=1 if transpose else 0, check_finite=False
    )


def norm2(x: np.ndarray) -> float:
    """Euclidean norm of a vector."""
    return float(np.linalg.norm(x))


def _start_vector(n: int) -> np.ndarray:
    # All-ones plus a fixed aperiodic perturbation, so the start vector is
    # deterministic yet not orthogonal to any structured singular vector.
    v = np.ones(n) + 1e-4 * np.sin(np.arange(1, n + 1, dtype=np.float64))
    return v / np.linalg.norm(v)


def matrix_norm2_estimate(A, tol: float = 1e-10, max_iter: int = 200_000) -> float:
    """Estimate the spectral norm ``||A||_2`` by power iteration on ``A^T A``.

    Stops when two consecutive Rayleigh-quotient estimates agree to a
    relative ``tol``; raises :class:`NoConvergenceError` when ``max_iter``
    sweeps pass without that happening.
    """
    if A.ndim != 2:
        raise ValueError("matrix_norm2_estimate: expected a 2-D matrix")
    n = A.shape[1]
    v = _start_vector(n)
    sigma_prev = -np.inf
    for _ in range(max_iter):
        w = A @ v
        sigma = float(np.linalg.norm(w))
        if sigma == 0.0:
            return 0.0
        z = A.T @ w
        nz = float(np.linalg.norm(z))
        if nz == 0.0:
            return sigma
        v = z / nz
        if abs(sigma - sigma_prev) <= tol * max(sigma, np.finfo(float).tiny):
            return sigma
        sigma_prev = sigma
    raise NoConvergenceError(
        f"matrix_norm2_estimate: Rayleigh quotient did not stabilize to "
        f"{tol:.1e} within {max_iter} iterations (last estimate {sigma:.6e})"
    )


def sigma_min_estimate(A, tol: float = 1e-10, max_iter: int = 50_000) -> float:
    """Estimate the smallest singular value by inverse power iteration.

    Runs power iteration on ``(A^T A)^{-1}`` using one LU factorization of
    ``A`` (two triangular solves per sweep).  Propagates
    :class:`SingularMatrixError` when the factorization meets a zero pivot,
    which is the honest answer for a numerically singular matrix.
    """
    if A.shape[0] != A.shape[1]:
        raise ValueError(
            f"sigma_min_estimate: matrix must be square, got shape {A.shape}"
        )
    factors = lu_factor(A)
    n = factors.n
    v = _start_vector(n)
    sigma_prev = -np.inf
    sigma = 0.0
    for _ in range(max_iter):
        w = lu_solve(factors, v, transpose=True)
        y = lu_solve(factors, w)
        mu = float(v @ y)
        ny = float(np.linalg.norm(y))
        if mu <= 0.0 or ny == 0.0:
            # Rounding drove the quadratic form nonpositive: sigma_min is
            # below resolvable precision.
            return 0.0
        sigma = 1.0 / np.sqrt(mu)
        v = y / ny
        if abs(sigma - sigma_prev) <= tol * max(sigma, np.finfo(float).tiny):
            return sigma
        sigma_prev = sigma
    raise NoConvergenceError(
        f"sigma_min_estimate: Rayleigh quotient did not stabilize to "
        f"{tol:.1e} within {max_iter} iterations (last estimate {sigma:.6e})"
    )


def sign_diag(x: np.ndarray) -> np.ndarray:
    """Entrywise sign vector; zero entries map to sign 0."""
    return np.sign(x)
