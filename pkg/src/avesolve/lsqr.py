"""LSQR iteration for least-squares and square linear systems.

Implements the Golub-Kahan bidiagonalization with QR factorization by
Givens rotations, after Paige and Saunders, ACM TOMS 8(1), 1982.  Three
departures from the textbook routine matter here:

* warm start: with a nonzero ``x0`` the iteration runs on the shifted
  system ``A d = rhs - A x0`` and returns ``x0 + d``, so a good initial
  guess costs nothing;
* caller-supplied stopping predicate: when given, it is evaluated every
  iteration on the current iterate and its freshly recomputed true residual
  norm ``||rhs - A x||``, letting an outer solver enforce its own
  acceptance criterion exactly instead of through atol/btol proxies;
* breakdown reporting: a vanishing bidiagonalization vector before any
  stopping rule fires is reported as ``Breakdown`` rather than silently
  treated as convergence.

The operator only needs ``shape``, ``matvec`` and ``rmatvec``; dense arrays
and scipy sparse matrices are wrapped automatically.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from .linalg import is_sparse

__all__ = [
    "LsqrStop",
    "LsqrOptions",
    "LsqrResult",
    "MatOperator",
    "as_operator",
    "lsqr_solve",
]

# A bidiagonalization norm below this fraction of its starting scale counts
# as a breakdown.
BREAKDOWN_RTOL = 1e-14


class LsqrStop(Enum):
    RESIDUAL_TOL = "ResidualTol"
    MAX_ITER = "MaxIter"
    BREAKDOWN = "Breakdown"


@dataclass(frozen=True)
class LsqrOptions:
    """Stopping controls: ``||A x - rhs|| <= max(atol ||A|| ||x||, btol ||rhs||)``."""

    atol: float = 1e-10
    btol: float = 1e-10
    max_inner_iter: int = 1000

    def __post_init__(self) -> None:
        if self.atol < 0 or self.btol < 0:
            raise ValueError("LsqrOptions: atol and btol must be nonnegative")
        if self.max_inner_iter < 1:
            raise ValueError("LsqrOptions: max_inner_iter must be positive")


@dataclass
class LsqrResult:
    solution: np.ndarray
    iterations: int
    residual_norm: float
    stop_reason: LsqrStop
    trace: list[tuple[int, float]] = field(default_factory=list)


class MatOperator:
    """Minimal linear-operator wrapper: ``shape``, ``matvec``, ``rmatvec``."""

    def __init__(self, shape, matvec_fn, rmatvec_fn):
        self.shape = tuple(shape)
        self._mv = matvec_fn
        self._rmv = rmatvec_fn

    def matvec(self, v: np.ndarray) -> np.ndarray:
        return self._mv(v)

    def rmatvec(self, v: np.ndarray) -> np.ndarray:
        return self._rmv(v)


def as_operator(A) -> MatOperator:
    if isinstance(A, MatOperator):
        return A
    if is_sparse(A) or isinstance(A, np.ndarray):
        return MatOperator(A.shape, lambda v: A @ v, lambda v: A.T @ v)
    raise TypeError(f"as_operator: unsupported operand type {type(A)!r}")


def _sym_ortho(a: float, b: float) -> tuple[float, float, float]:
    """Stable Givens rotation: returns (c, s, r) with r = hypot(a, b)."""
    if b == 0.0:
        return np.sign(a) if a != 0.0 else 1.0, 0.0, abs(a)
    if a == 0.0:
        return 0.0, np.sign(b), abs(b)
    if abs(b) > abs(a):
        tau = a / b
        s = np.sign(b) / np.sqrt(1.0 + tau * tau)
        c = s * tau
        r = b / s
    else:
        tau = b / a
        c = np.sign(a) / np.sqrt(1.0 + tau * tau)
        s = c * tau
        r = a / c
    return c, s, r


def lsqr_solve(
    A,
    rhs: np.ndarray,
    x0: np.ndarray | None = None,
    opts: LsqrOptions = LsqrOptions(),
    predicate: Callable[[np.ndarray, float], bool] | None = None,
    keep_trace: bool = True,
) -> LsqrResult:
    """Minimize ``||A x - rhs||`` starting from ``x0``.

    The trace records ``(iteration, residual_norm)`` pairs using the
    internal recurrence estimate, which is nonincreasing by construction.
    When ``predicate`` is given it receives the current iterate and its
    recomputed true residual norm after every iteration (and once up front
    at ``x0``); returning True stops the run with ``ResidualTol``.
    """
    op = as_operator(A)
    m, n = op.shape
    rhs = np.asarray(rhs, dtype=np.float64).reshape(-1)
    if rhs.shape[0] != m:
        raise ValueError(f"lsqr_solve: rhs length {rhs.shape[0]} != {m} rows")

    if x0 is None:
        x_base = np.zeros(n)
        r0 = rhs.copy()
    else:
        x_base = np.asarray(x0, dtype=np.float64).reshape(-1).copy()
        if x_base.shape[0] != n:
            raise ValueError(f"lsqr_solve: x0 length {x_base.shape[0]} != {n} columns")
        r0 = rhs - op.matvec(x_base)

    bnorm = float(np.linalg.norm(rhs))
    d = np.zeros(n)
    trace: list[tuple[int, float]] = []

    def finish(iters: int, rnorm: float, reason: LsqrStop) -> LsqrResult:
        return LsqrResult(
            solution=x_base + d,
            iterations=iters,
            residual_norm=rnorm,
            stop_reason=reason,
            trace=trace,
        )

    beta = float(np.linalg.norm(r0))
    if keep_trace:
        trace.append((0, beta))
    if predicate is not None and predicate(x_base.copy(), beta):
        return finish(0, beta, LsqrStop.RESIDUAL_TOL)
    if beta <= opts.btol * bnorm:
        return finish(0, beta, LsqrStop.RESIDUAL_TOL)

    breakdown_floor = BREAKDOWN_RTOL * beta
    u = r0 / beta
    v = op.rmatvec(u)
    alpha = float(np.linalg.norm(v))
    if alpha <= BREAKDOWN_RTOL * beta:
        # rhs - A x0 is orthogonal to the range of A: nothing to improve.
        return finish(0, beta, LsqrStop.BREAKDOWN)
    v = v / alpha

    w = v.copy()
    phibar = beta
    rhobar = alpha
    anorm_sq = alpha * alpha

    for it in range(1, opts.max_inner_iter + 1):
        u = op.matvec(v) - alpha * u
        beta = float(np.linalg.norm(u))
        broke = beta <= breakdown_floor
        if not broke:
            u = u / beta
        anorm_sq += beta * beta

        # s >= 0 because beta is a norm, so phibar stays nonnegative and the
        # trace is nonincreasing by construction.
        c, s, rho = _sym_ortho(rhobar, beta)
        phi = c * phibar
        phibar = s * phibar

        d = d + (phi / rho) * w

        if not broke:
            v_next = op.rmatvec(u) - beta * v
            alpha = float(np.linalg.norm(v_next))
            alpha_broke = alpha <= breakdown_floor
            if not alpha_broke:
                v = v_next / alpha
            theta = s * alpha
            rhobar = -c * alpha
            anorm_sq += alpha * alpha
            w = v - (theta / rho) * w
        else:
            alpha_broke = True

        if keep_trace:
            trace.append((it, phibar))

        if predicate is not None:
            x_cur = x_base + d
            rtrue = float(np.linalg.norm(rhs - op.matvec(x_cur)))
            if predicate(x_cur, rtrue):
                return finish(it, rtrue, LsqrStop.RESIDUAL_TOL)
        anorm = np.sqrt(anorm_sq)
        xnorm = float(np.linalg.norm(x_base + d))
        if phibar <= max(opts.atol * anorm * xnorm, opts.btol * bnorm):
            return finish(it, phibar, LsqrStop.RESIDUAL_TOL)

        if broke or alpha_broke:
            return finish(it, phibar, LsqrStop.BREAKDOWN)

    return finish(opts.max_inner_iter, phibar, LsqrStop.MAX_ITER)
