"""Iterative solvers for ``A x - |x| - b = 0``.

Seven methods behind one report type:

* ``drs_exact``: relaxed splitting step
  ``x^{k+1} = x^k - (gamma/2) rho(x^k) A^{-1} G^{-1} e(x^k)`` with
  ``e(x) = A x - |x| - b``; the linear solve uses one LU factorization of
  ``A`` amortized over all iterations.
* ``drs_inexact``: same step, but ``x^{k+1}`` only has to satisfy
  ``||Theta_k(x^{k+1})|| <= alpha_k ||e(x^k)||`` with ``Theta_k`` the affine
  subproblem map; the subproblem is solved matrix-free by warm-started LSQR
  whose stopping predicate enforces exactly that bound.
* ``newton_exact``: generalized Newton step
  ``[A - diag(sign(x^k))] x^{k+1} = b``, refactored every iteration.
* ``newton_inexact``: the same linear system solved by LSQR up to
  ``||r_k|| <= theta ||e(x^k)||``, where ``theta`` is either supplied or
  derived from norm estimates of ``A`` (undefined when ``||A^{-1}|| >= 1/3``).
* ``sor_like``: the two-sequence relaxation
  ``x^{k+1} = (1-omega) x^k + omega A^{-1}(y^k + b)``,
  ``y^{k+1} = (1-omega) y^k + omega |x^{k+1}|``.
* ``fixed_point``: ``x^{k+1} = x^k - nu e(x^k)``, inverse-free.
* ``fixed_point_inverse``: ``x^{k+1} = x^k - nu A^{-1} e(x^k)``; with
  ``nu = gamma/2`` and the identity metric this is the same map as
  ``drs_exact``, and the implementations produce identical iterates.

Every solver stops when ``||e(x^k)|| <= epsilon``, declares divergence when
``||x^k||`` reaches ``divergence_threshold``, and otherwise gives up at
``max_iter`` steps.  A singular linear system surfaces as a report status,
not an exception, so batch drivers can keep going.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from .core import AveProblem, GMatrix, residual, rho, theta_k
from .linalg import (
    SingularMatrixError,
    is_sparse,
    lu_factor,
    lu_solve,
    matrix_norm2_estimate,
    norm2,
    sigma_min_estimate,
    sign_diag,
    to_dense,
)
from .lsqr import LsqrOptions, MatOperator, as_operator, lsqr_solve

__all__ = [
    "Method",
    "SolveStatus",
    "SolverConfig",
    "SolveReport",
    "ThetaUndefinedError",
    "InnerSolverStallError",
    "drs_exact",
    "drs_inexact",
    "newton_exact",
    "newton_inexact",
    "sor_like",
    "fixed_point",
    "fixed_point_inverse",
    "run_solver",
    "write_report_trace",
]

# Tightening retries granted to an inner LSQR solve before giving up.
INNER_RETRY_LIMIT = 5

Callback = Callable[[int, np.ndarray], None]


class Method(str, Enum):
    DRS = "drs"
    DRS_INEXACT = "inexact-drs"
    NEWTON = "newton"
    NEWTON_INEXACT = "inexact-newton"
    SOR_LIKE = "sor-like"
    FIXED_POINT = "fixed-point"
    FIXED_POINT_INVERSE = "fixed-point-inverse"


class SolveStatus(Enum):
    CONVERGED = "Converged"
    MAX_ITER_REACHED = "MaxIterReached"
    DIVERGED = "Diverged"
    SINGULAR_SYSTEM = "SingularSystem"


class ThetaUndefinedError(Exception):
    """Automatic inexactness bound requires ``||A^{-1}|| < 1/3``."""


class InnerSolverStallError(Exception):
    """LSQR could not reach the inner acceptance criterion."""


@dataclass(frozen=True)
class SolverConfig:
    """Shared knob set for every method; each solver reads what it needs.

    ``theta = None`` selects the derived inexact-Newton bound.  The
    inexactness schedule for ``drs_inexact`` is either ``"heuristic"``
    (``alpha_k = min(1, 1/max(1, k - k_max))``) or ``"theoretical"``
    (largest bound compatible with convergence for error-bound constant
    ``mu``; ``mu = inf`` collapses it to the exact method).
    """

    gamma: float = 1.98
    G: GMatrix = field(default_factory=GMatrix.identity)
    delta: float = 0.5
    epsilon: float = 1e-8
    max_iter: int = 1000
    omega: float = 0.9
    theta: float | None = None
    nu: float = 0.5
    alpha_mode: str = "heuristic"
    k_max: int = 10
    mu: float | None = None
    divergence_threshold: float = 1e8
    inner_max_iter: int | None = None

    def __post_init__(self) -> None:
        if not 0.0 < self.gamma < 2.0:
            raise ValueError(f"SolverConfig: gamma must be in (0, 2), got {self.gamma}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"SolverConfig: delta must be in (0, 1), got {self.delta}")
        if self.epsilon <= 0.0:
            raise ValueError("SolverConfig: epsilon must be positive")
        if self.max_iter < 0:
            raise ValueError("SolverConfig: max_iter must be nonnegative")
        if self.omega <= 0.0:
            raise ValueError(f"SolverConfig: omega must be positive, got {self.omega}")
        if self.theta is not None and self.theta < 0.0:
            raise ValueError("SolverConfig: fixed theta must be nonnegative")
        if not 0.0 < self.nu < 1.0:
            raise ValueError(f"SolverConfig: nu must be in (0, 1), got {self.nu}")
        if self.alpha_mode not in ("heuristic", "theoretical"):
            raise ValueError(
                f"SolverConfig: alpha_mode must be 'heuristic' or 'theoretical', "
                f"got {self.alpha_mode!r}"
            )
        if self.k_max < 0:
            raise ValueError("SolverConfig: k_max must be nonnegative")
        if self.mu is not None and not self.mu > 0.0:
            raise ValueError("SolverConfig: mu must be positive")
        if self.divergence_threshold <= 0.0:
            raise ValueError("SolverConfig: divergence_threshold must be positive")
        if self.inner_max_iter is not None and self.inner_max_iter < 1:
            raise ValueError("SolverConfig: inner_max_iter must be positive")


@dataclass
class SolveReport:
    """Outcome of one solver run.

    Histories cover iterates ``0..iterations`` inclusive;
    ``inner_iteration_history[k]`` counts the LSQR iterations spent
    producing iterate ``k`` (0 for iterate 0 and for direct methods).
    """

    status: SolveStatus
    iterations: int
    final_residual_norm: float
    residual_history: list[float]
    iterate_norm_history: list[float]
    inner_iteration_history: list[int]
    inner_iteration_total: int
    wall_time: float


def _drive(
    p: AveProblem,
    cfg: SolverConfig,
    x0: np.ndarray,
    make_step,
    callback: Callback | None,
) -> SolveReport:
    """Shared outer loop: stopping rules, histories, timing.

    ``make_step`` runs once before the loop (factorizations, norm
    estimates) and returns ``step(x, k, e, e_norm) -> (x_next, inner_iters)``
    or raises SingularMatrixError, which becomes a report status.
    """
    t0 = time.perf_counter()
    x = np.array(x0, dtype=np.float64, copy=True).reshape(-1)
    if x.shape[0] != p.n:
        raise ValueError(f"x0 has length {x.shape[0]}, expected {p.n}")

    res_hist: list[float] = []
    xnorm_hist: list[float] = []
    inner_hist: list[int] = [0]

    e = residual(p, x)
    en = norm2(e)
    res_hist.append(en)
    xnorm_hist.append(norm2(x))
    if callback is not None:
        callback(0, x)

    status: SolveStatus | None = None
    k = 0
    try:
        step = make_step()
    except SingularMatrixError:
        status = SolveStatus.SINGULAR_SYSTEM
        step = None

    while status is None:
        if en <= cfg.epsilon:
            status = SolveStatus.CONVERGED
            break
        if xnorm_hist[-1] >= cfg.divergence_threshold:
            status = SolveStatus.DIVERGED
            break
        if k >= cfg.max_iter:
            status = SolveStatus.MAX_ITER_REACHED
            break
        try:
            x, inner = step(x, k, e, en)
        except SingularMatrixError:
            status = SolveStatus.SINGULAR_SYSTEM
            break
        k += 1
        e = residual(p, x)
        en = norm2(e)
        res_hist.append(en)
        xnorm_hist.append(norm2(x))
        inner_hist.append(inner)
        if callback is not None:
            callback(k, x)

    return SolveReport(
        status=status,
        iterations=k,
        final_residual_norm=en,
        residual_history=res_hist,
        iterate_norm_history=xnorm_hist,
        inner_iteration_history=inner_hist,
        inner_iteration_total=sum(inner_hist),
        wall_time=time.perf_counter() - t0,
    )


def drs_exact(
    p: AveProblem,
    cfg: SolverConfig = SolverConfig(),
    x0: np.ndarray | None = None,
    callback: Callback | None = None,
) -> SolveReport:
    """Relaxed splitting iteration with exact linear solves."""
    if x0 is None:
        raise ValueError("drs_exact: x0 is required")

    def make_step():
        factors = lu_factor(p.A)

        def step(x, k, e, en):
            coef = 0.5 * cfg.gamma * rho(cfg.G, e)
            return x - coef * lu_solve(factors, cfg.G.apply_inv(e)), 0

        return step

    return _drive(p, cfg, x0, make_step, callback)


def _heuristic_alpha(k: int, k_max: int) -> float:
    return min(1.0, 1.0 / max(1, k - k_max))


def _solve_to_criterion(
    op: MatOperator,
    rhs: np.ndarray,
    x_start: np.ndarray,
    lsqr_target: float,
    accepts: Callable[[np.ndarray], bool],
    max_inner: int,
    what: str,
    op_norm_hint: float = 0.0,
):
    """Warm-started LSQR runs until ``accepts`` passes on the returned
    candidate, tightening the predicate target by half between attempts.

    A candidate whose true residual has reached the roundoff scale of the
    system, ``16 eps (||op|| ||x|| + ||rhs||)``, is accepted even when the
    requested bound is smaller: no double-precision solve, direct or
    iterative, can certify a residual below that scale, so the candidate
    already is an exact solve for every representable purpose.
    ``op_norm_hint`` supplies the operator norm for that scale; zero
    disables the roundoff escape.
    """
    opts = LsqrOptions(atol=0.0, btol=0.0, max_inner_iter=max_inner)
    inner_total = 0
    x_warm = x_start
    target = lsqr_target
    rhs_norm = norm2(rhs)
    eps = float(np.finfo(np.float64).eps)
    for _ in range(INNER_RETRY_LIMIT + 1):
        res = lsqr_solve(
            op,
            rhs,
            x0=x_warm,
            opts=opts,
            predicate=lambda x, rn, t=target: rn <= t,
            keep_trace=False,
        )
        inner_total += res.iterations
        if accepts(res.solution):
            return res.solution, inner_total
        if op_norm_hint > 0.0:
            rn = norm2(rhs - op.matvec(res.solution))
            floor = 16.0 * eps * (op_norm_hint * norm2(res.solution) + rhs_norm)
            if rn <= floor:
                return res.solution, inner_total
        x_warm = res.solution
        target *= 0.5
    raise InnerSolverStallError(
        f"{what}: LSQR could not reach the acceptance criterion within "
        f"{INNER_RETRY_LIMIT + 1} attempts of {max_inner} iterations each"
    )


def drs_inexact(
    p: AveProblem,
    cfg: SolverConfig = SolverConfig(),
    x0: np.ndarray | None = None,
    callback: Callback | None = None,
) -> SolveReport:
    """Relaxed splitting iteration with LSQR subproblem solves.

    Matrix-free except in theoretical mode with an infinite error-bound
    constant, where the inexactness budget collapses to zero and the step
    falls back to the exact LU path.

    Near convergence on badly scaled problems the step bound
    ``alpha ||e||`` can drop below the roundoff scale of the subproblem;
    such steps are solved to roundoff and accepted, so recomputing the
    bound on them can show a violation at that scale.
    """
    if x0 is None:
        raise ValueError("drs_inexact: x0 is required")
    if cfg.alpha_mode == "theoretical" and cfg.mu is None:
        raise ValueError("drs_inexact: theoretical alpha schedule requires mu")

    def make_step():
        op = as_operator(p.A)
        max_inner = cfg.inner_max_iter if cfg.inner_max_iter is not None else 10 * p.n
        state: dict = {}

        def atg_norm() -> float:
            if "atg" not in state:
                if cfg.G.is_identity:
                    state["atg"] = matrix_norm2_estimate(p.A, tol=1e-8)
                elif is_sparse(p.A):
                    state["atg"] = matrix_norm2_estimate(
                        p.A.T.multiply(cfg.G.diag).tocsr(), tol=1e-8
                    )
                else:
                    state["atg"] = matrix_norm2_estimate(p.A.T * cfg.G.diag, tol=1e-8)
            return state["atg"]

        def exact_factors():
            if "lu" not in state:
                state["lu"] = lu_factor(p.A)
            return state["lu"]

        def a_norm() -> float:
            if "anorm" not in state:
                state["anorm"] = matrix_norm2_estimate(p.A, tol=1e-6)
            return state["anorm"]

        def step(x, k, e, en):
            rk = rho(cfg.G, e)
            if cfg.alpha_mode == "heuristic":
                alpha = _heuristic_alpha(k, cfg.k_max)
            else:
                alpha = ((1.0 - cfg.delta) * cfg.gamma * (2.0 - cfg.gamma) * rk) / (
                    4.0 * cfg.mu * atg_norm()
                    + 2.0 * cfg.gamma * rk
                    + cfg.G.lambda_max
                )
            coef = 0.5 * cfg.gamma * rk
            z = cfg.G.apply_inv(e)
            if alpha == 0.0:
                return x - coef * lu_solve(exact_factors(), z), 0

            # Theta_k(y) = 2 (A y - rhs), so the inner criterion
            # ||Theta_k|| <= alpha ||e|| maps to a residual target alpha ||e|| / 2.
            rhs = p.A @ x - coef * z
            bound = alpha * en

            def accepts(cand: np.ndarray) -> bool:
                return norm2(theta_k(p, cfg.G, cfg.gamma, x, cand)) <= bound

            sol, inner = _solve_to_criterion(
                op, rhs, x, 0.5 * bound, accepts, max_inner, "drs_inexact",
                op_norm_hint=a_norm(),
            )
            return sol, inner

        return step

    return _drive(p, cfg, x0, make_step, callback)


def newton_exact(
    p: AveProblem,
    cfg: SolverConfig = SolverConfig(),
    x0: np.ndarray | None = None,
    callback: Callback | None = None,
) -> SolveReport:
    """Generalized Newton iteration ``[A - diag(sign(x^k))] x^{k+1} = b``."""
    if x0 is None:
        raise ValueError("newton_exact: x0 is required")

    def make_step():
        A_dense = to_dense(p.A)
        idx = np.arange(p.n)

        def step(x, k, e, en):
            M = A_dense.copy(order="F")
            M[idx, idx] -= sign_diag(x)
            factors = lu_factor(M)
            return lu_solve(factors, p.b), 0

        return step

    return _drive(p, cfg, x0, make_step, callback)


def resolve_newton_theta(p: AveProblem, cfg: SolverConfig) -> float:
    """Inexactness bound for ``newton_inexact``.

    A fixed ``cfg.theta`` is returned as-is.  Otherwise the bound
    ``0.9999 (1 - 3 ||A^{-1}||) / (||A^{-1}|| (||A|| + 3))`` is evaluated
    from norm estimates; it only exists for ``||A^{-1}|| < 1/3``.
    """
    if cfg.theta is not None:
        return cfg.theta
    norm_A = matrix_norm2_estimate(p.A, tol=1e-8)
    try:
        sigma_min = sigma_min_estimate(p.A, tol=1e-8)
    except SingularMatrixError:
        sigma_min = 0.0
    inv_norm = np.inf if sigma_min == 0.0 else 1.0 / sigma_min
    if inv_norm >= 1.0 / 3.0:
        raise ThetaUndefinedError(
            f"newton_inexact: derived theta needs ||A^-1|| < 1/3, "
            f"estimated ||A^-1|| = {inv_norm:.4f}"
        )
    return 0.9999 * (1.0 - 3.0 * inv_norm) / (inv_norm * (norm_A + 3.0))


def newton_inexact(
    p: AveProblem,
    cfg: SolverConfig = SolverConfig(),
    x0: np.ndarray | None = None,
    callback: Callback | None = None,
) -> SolveReport:
    """Generalized Newton iteration with LSQR linear solves.

    Each step accepts ``x^{k+1}`` once
    ``||[A - diag(sign(x^k))] x^{k+1} - b|| <= theta ||e(x^k)||``.
    ``theta = 0`` leaves no inexactness budget and delegates to
    :func:`newton_exact`.  Steps whose bound falls below the roundoff
    scale of the linear system are solved to roundoff and accepted.
    """
    if x0 is None:
        raise ValueError("newton_inexact: x0 is required")
    theta = resolve_newton_theta(p, cfg)
    if theta == 0.0:
        return newton_exact(p, cfg, x0, callback)

    def make_step():
        max_inner = cfg.inner_max_iter if cfg.inner_max_iter is not None else 10 * p.n
        state: dict = {}

        def jac_norm() -> float:
            # ||A - diag(sign(x))|| <= ||A|| + 1, a tight enough scale here
            if "anorm" not in state:
                state["anorm"] = matrix_norm2_estimate(p.A, tol=1e-6) + 1.0
            return state["anorm"]

        def step(x, k, e, en):
            s = sign_diag(x)
            op = MatOperator(
                p.A.shape,
                lambda v: p.A @ v - s * v,
                lambda v: p.A.T @ v - s * v,
            )
            bound = theta * en

            def accepts(cand: np.ndarray) -> bool:
                return norm2(p.A @ cand - s * cand - p.b) <= bound

            sol, inner = _solve_to_criterion(
                op, p.b, x, bound, accepts, max_inner, "newton_inexact",
                op_norm_hint=jac_norm(),
            )
            return sol, inner

        return step

    return _drive(p, cfg, x0, make_step, callback)


def sor_like(
    p: AveProblem,
    cfg: SolverConfig = SolverConfig(),
    x0: np.ndarray | None = None,
    y0: np.ndarray | None = None,
    callback: Callback | None = None,
) -> SolveReport:
    """Two-sequence relaxation iteration; ``y0`` defaults to ``x0``."""
    if x0 is None:
        raise ValueError("sor_like: x0 is required")
    y_init = x0 if y0 is None else y0

    def make_step():
        factors = lu_factor(p.A)
        y = np.array(y_init, dtype=np.float64, copy=True).reshape(-1)
        if y.shape[0] != p.n:
            raise ValueError(f"y0 has length {y.shape[0]}, expected {p.n}")
        omega = cfg.omega

        def step(x, k, e, en):
            x_next = (1.0 - omega) * x + omega * lu_solve(factors, y + p.b)
            y[:] = (1.0 - omega) * y + omega * np.abs(x_next)
            return x_next, 0

        return step

    return _drive(p, cfg, x0, make_step, callback)


def fixed_point(
    p: AveProblem,
    cfg: SolverConfig = SolverConfig(),
    x0: np.ndarray | None = None,
    callback: Callback | None = None,
) -> SolveReport:
    """Inverse-free contraction iteration ``x - nu e(x)``."""
    if x0 is None:
        raise ValueError("fixed_point: x0 is required")

    def make_step():
        def step(x, k, e, en):
            return x - cfg.nu * e, 0

        return step

    return _drive(p, cfg, x0, make_step, callback)


def fixed_point_inverse(
    p: AveProblem,
    cfg: SolverConfig = SolverConfig(),
    x0: np.ndarray | None = None,
    callback: Callback | None = None,
) -> SolveReport:
    """Contraction iteration ``x - nu A^{-1} e(x)`` with one amortized LU.

    With ``nu = gamma/2`` and the identity metric this is the same update
    as :func:`drs_exact` and produces identical iterates.
    """
    if x0 is None:
        raise ValueError("fixed_point_inverse: x0 is required")

    def make_step():
        factors = lu_factor(p.A)

        def step(x, k, e, en):
            return x - cfg.nu * lu_solve(factors, e), 0

        return step

    return _drive(p, cfg, x0, make_step, callback)


_DISPATCH = {
    Method.DRS: drs_exact,
    Method.DRS_INEXACT: drs_inexact,
    Method.NEWTON: newton_exact,
    Method.NEWTON_INEXACT: newton_inexact,
    Method.SOR_LIKE: sor_like,
    Method.FIXED_POINT: fixed_point,
    Method.FIXED_POINT_INVERSE: fixed_point_inverse,
}


def run_solver(
    method: Method | str,
    p: AveProblem,
    cfg: SolverConfig = SolverConfig(),
    x0: np.ndarray | None = None,
    seed: int | None = None,
    callback: Callback | None = None,
) -> SolveReport:
    """Dispatch a solve by method name.

    Exactly one of ``x0`` and ``seed`` must be given; a seed draws the
    standard random start (entries uniform on (-100, 100)).  Two calls with
    the same seed and config produce identical reports except for timing.
    """
    try:
        method = Method(method)
    except ValueError:
        valid = ", ".join(m.value for m in Method)
        raise ValueError(f"run_solver: unknown method {method!r}; expected one of {valid}")
    if (x0 is None) == (seed is None):
        raise ValueError("run_solver: give exactly one of x0 and seed")
    if x0 is None:
        from .generators import gen_x0

        x0 = gen_x0(p.n, seed)
    return _DISPATCH[method](p, cfg, x0=x0, callback=callback)


def write_report_trace(report: SolveReport, path) -> None:
    """Write per-iteration history as CSV
    ``iteration,residual_norm,iterate_norm,inner_iterations``."""
    with open(path, "w") as f:
        f.write("iteration,residual_norm,iterate_norm,inner_iterations\n")
        for k in range(report.iterations + 1):
            f.write(
                f"{k},{report.residual_history[k]:.17g},"
                f"{report.iterate_norm_history[k]:.17g},"
                f"{report.inner_iteration_history[k]}\n"
            )
