import numpy as np
import numpy.testing as npt
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from avesolve.linalg import (
    NoConvergenceError,
    SingularMatrixError,
    lu_factor,
    lu_solve,
    matrix_norm2_estimate,
    matvec,
    matvec_transpose,
    norm2,
    sigma_min_estimate,
    sign_diag,
    to_dense,
)


def tridiag(n, lo=-1.0, di=8.0, up=-1.0, fmt="csr"):
    return sp.diags([lo, di, up], offsets=[-1, 0, 1], shape=(n, n), format=fmt)


class TestMatvec:
    def test_tridiag_ones(self):
        # Hand oracle: rows sum to 8-1, -1+8-1, -1+8.
        A = tridiag(3)
        npt.assert_array_equal(matvec(A, np.ones(3)), [7.0, 6.0, 7.0])

    def test_dense(self):
        A = np.array([[1.0, 2.0], [3.0, 4.0]])
        npt.assert_array_equal(matvec(A, np.array([1.0, 1.0])), [3.0, 7.0])

    def test_transpose_dense(self):
        A = np.array([[1.0, 2.0], [3.0, 4.0]])
        npt.assert_array_equal(matvec_transpose(A, np.array([1.0, 1.0])), [4.0, 6.0])

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="matvec"):
            matvec(np.eye(3), np.ones(4))
        with pytest.raises(ValueError, match="matvec_transpose"):
            matvec_transpose(np.eye(3), np.ones(2))

    @settings(deadline=None, max_examples=40)
    @given(seed=st.integers(0, 10_000), n=st.integers(1, 12), m=st.integers(1, 12))
    def test_adjoint_identity(self, seed, n, m):
        """<A x, y> == <x, A^T y> to 1e-12 on unit-scaled inputs."""
        rng = np.random.default_rng(seed)
        A = rng.uniform(-1.0, 1.0, (m, n))
        x = rng.uniform(-1.0, 1.0, n)
        y = rng.uniform(-1.0, 1.0, m)
        lhs = float(matvec(A, x) @ y)
        rhs = float(x @ matvec_transpose(A, y))
        assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs), abs(rhs))
        S = sp.csr_matrix(A)
        lhs_s = float(matvec(S, x) @ y)
        rhs_s = float(x @ matvec_transpose(S, y))
        assert abs(lhs_s - rhs_s) <= 1e-12 * max(1.0, abs(lhs_s), abs(rhs_s))

    @settings(deadline=None, max_examples=40)
    @given(seed=st.integers(0, 10_000))
    def test_linearity(self, seed):
        rng = np.random.default_rng(seed)
        A = rng.uniform(-1.0, 1.0, (9, 9))
        x, y = rng.uniform(-1.0, 1.0, 9), rng.uniform(-1.0, 1.0, 9)
        a, b = rng.uniform(-2.0, 2.0, 2)
        lhs = matvec(A, a * x + b * y)
        rhs = a * matvec(A, x) + b * matvec(A, y)
        npt.assert_allclose(lhs, rhs, rtol=0, atol=1e-12 * max(1.0, norm2(lhs)))


class TestLu:
    def test_hand_solve(self):
        # 2x + y = 3, x + 3y = 5 has solution (0.8, 1.4).
        A = np.array([[2.0, 1.0], [1.0, 3.0]])
        f = lu_factor(A)
        npt.assert_allclose(lu_solve(f, np.array([3.0, 5.0])), [0.8, 1.4], rtol=1e-14)

    def test_transpose_solve(self):
        rng = np.random.default_rng(5)
        A = rng.standard_normal((12, 12)) + 6 * np.eye(12)
        b = rng.standard_normal(12)
        f = lu_factor(A)
        npt.assert_allclose(
            lu_solve(f, b, transpose=True), np.linalg.solve(A.T, b), rtol=1e-10
        )

    @settings(deadline=None, max_examples=30)
    @given(seed=st.integers(0, 10_000), n=st.integers(1, 30))
    def test_roundtrip_residual(self, seed, n):
        """||A x - b|| <= 1e-10 (1 + ||b||) on well-conditioned systems."""
        rng = np.random.default_rng(seed)
        A = rng.uniform(-1.0, 1.0, (n, n)) + (n + 2) * np.eye(n)
        b = rng.uniform(-10.0, 10.0, n)
        x = lu_solve(lu_factor(A), b)
        assert norm2(A @ x - b) <= 1e-10 * (1.0 + norm2(b))

    def test_sparse_input_widened(self):
        A = tridiag(40)
        b = np.ones(40)
        x = lu_solve(lu_factor(A), b)
        assert norm2(A @ x - b) <= 1e-10 * (1.0 + norm2(b))

    def test_singular_raises(self):
        with pytest.raises(SingularMatrixError, match="pivot"):
            lu_factor(np.array([[1.0, 2.0], [2.0, 4.0]]))

    def test_zero_matrix_raises(self):
        with pytest.raises(SingularMatrixError):
            lu_factor(np.zeros((3, 3)))

    def test_not_square(self):
        with pytest.raises(ValueError, match="square"):
            lu_factor(np.ones((2, 3)))


class TestNormEstimate:
    def test_scaled_identity_exact(self):
        assert matrix_norm2_estimate(3.0 * np.eye(7)) == pytest.approx(3.0, abs=1e-12)

    def test_sign_indefinite_diagonal(self):
        est = matrix_norm2_estimate(np.diag([1.8, -2.0]), tol=1e-13)
        assert est == pytest.approx(2.0, rel=1e-10)

    def test_tridiag_against_eigenvalue_formula(self):
        # Symmetric tridiagonal (lo=up): eigenvalues 8 - 2 cos(k pi / (n+1)).
        n = 100
        est = matrix_norm2_estimate(tridiag(n), tol=1e-10)
        oracle = 8.0 - 2.0 * np.cos(n * np.pi / (n + 1))
        # The top of this spectrum is clustered, so only modest accuracy
        # is promised; the estimate must still land on ~9.99.
        assert est == pytest.approx(oracle, rel=1e-3)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_gapped_oracle_svd(self, seed):
        """Relative tol accuracy against numpy's SVD on gapped spectra."""
        rng = np.random.default_rng(seed)
        n = 20
        q1, _ = np.linalg.qr(rng.standard_normal((n, n)))
        q2, _ = np.linalg.qr(rng.standard_normal((n, n)))
        s = np.linspace(1.0, 2.0, n)
        s[-1] = 5.0  # clear gap at the top
        A = q1 @ np.diag(s) @ q2.T
        est = matrix_norm2_estimate(A, tol=1e-12)
        oracle = np.linalg.svd(A, compute_uv=False)[0]
        assert est == pytest.approx(oracle, rel=1e-8)

    def test_no_convergence_raises(self):
        with pytest.raises(NoConvergenceError, match="stabilize"):
            matrix_norm2_estimate(tridiag(50), tol=1e-12, max_iter=2)


class TestSigmaMin:
    def test_scaled_identity(self):
        assert sigma_min_estimate(2.0 * np.eye(5)) == pytest.approx(2.0, abs=1e-12)

    def test_unit_sigma_min_matrix(self):
        # Singular values of [[1, 2], [-2/3, 1]] are 7/3 and exactly 1.
        A = np.array([[1.0, 2.0], [-2.0 / 3.0, 1.0]])
        assert sigma_min_estimate(A, tol=1e-12) == pytest.approx(1.0, abs=1e-10)

    @pytest.mark.parametrize("seed", [3, 4, 5])
    def test_gapped_oracle_svd(self, seed):
        rng = np.random.default_rng(seed)
        n = 20
        q1, _ = np.linalg.qr(rng.standard_normal((n, n)))
        q2, _ = np.linalg.qr(rng.standard_normal((n, n)))
        s = np.linspace(2.0, 4.0, n)
        s[0] = 0.5  # clear gap at the bottom
        A = q1 @ np.diag(s) @ q2.T
        est = sigma_min_estimate(A, tol=1e-12)
        oracle = np.linalg.svd(A, compute_uv=False)[-1]
        assert est == pytest.approx(oracle, rel=1e-8)

    def test_singular_propagates(self):
        with pytest.raises(SingularMatrixError):
            sigma_min_estimate(np.array([[1.0, 1.0], [1.0, 1.0]]))

    def test_not_square(self):
        with pytest.raises(ValueError, match="square"):
            sigma_min_estimate(np.ones((2, 3)))


class TestSignDiag:
    def test_values(self):
        npt.assert_array_equal(sign_diag(np.array([-3.0, 0.0, 2.0])), [-1.0, 0.0, 1.0])

    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=20))
    def test_reconstructs_abs(self, xs):
        x = np.array(xs)
        npt.assert_array_equal(sign_diag(x) * x, np.abs(x))

    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=20))
    def test_idempotent_on_signs(self, xs):
        s = sign_diag(np.array(xs))
        npt.assert_array_equal(sign_diag(s), s)


def test_to_dense_column_major():
    d = to_dense(tridiag(6))
    assert d.flags.f_contiguous
    assert d.shape == (6, 6)
    npt.assert_array_equal(np.diag(d), np.full(6, 8.0))
    npt.assert_array_equal(np.diag(d, 1), np.full(5, -1.0))
