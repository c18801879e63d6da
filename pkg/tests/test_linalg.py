import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from holdpp import dynamics, linalg


def test_cholesky_identity_and_diagonal():
    np.testing.assert_array_equal(linalg.cholesky(np.eye(3)), np.eye(3))
    np.testing.assert_allclose(linalg.cholesky(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), rtol=0, atol=1e-15)


def test_cholesky_reconstructs_2x2():
    S = np.array([[2.0, 1.0], [1.0, 2.0]])
    L = linalg.cholesky(S)
    assert np.allclose(np.triu(L, 1), 0)
    assert np.max(np.abs(L @ L.T - S)) <= 1e-12


def test_cholesky_random_psd_thousand():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 9))
        A = rng.standard_normal((n, n))
        S = A @ A.T + 1e-6 * np.eye(n)
        L = linalg.cholesky(S)
        assert np.all(np.diag(L) >= 0)
        worst = max(worst, np.linalg.norm(L @ L.T - S) / np.linalg.norm(S))
    assert worst <= 1e-10


def test_cholesky_batched_matches_loop():
    rng = np.random.default_rng(1)
    A = rng.standard_normal((5, 4, 4))
    S = A @ np.swapaxes(A, -1, -2)
    Lb = linalg.cholesky(S)
    for k in range(5):
        np.testing.assert_allclose(Lb[k], linalg.cholesky(S[k]), atol=1e-14)


def test_cholesky_clamps_zero_pivot():
    S = np.diag([0.0, 0.04, 0.04])
    L = linalg.cholesky(S)
    np.testing.assert_allclose(L, np.diag([0.0, 0.2, 0.2]), atol=1e-15)
    # a tiny negative pivot inside the band is also clamped
    L = linalg.cholesky(np.array([[-5e-11, 0.0], [0.0, 1.0]]))
    assert L[0, 0] == 0.0 and L[1, 0] == 0.0


def test_cholesky_errors():
    with pytest.raises(linalg.NotPSDError):
        linalg.cholesky(np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(ValueError):
        linalg.cholesky(np.array([[1.0, 0.5], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        linalg.cholesky(np.ones((2, 3)))
    with pytest.raises(ValueError):
        linalg.cholesky(np.array([[np.nan]]))


def test_cholesky_from_factor():
    rng = np.random.default_rng(3)
    A = rng.standard_normal((5, 4, 7))
    L = linalg.cholesky_from_factor(A)
    assert np.all(np.triu(L, 1) == 0) and np.all(np.diagonal(L, axis1=-2, axis2=-1) > 0)
    np.testing.assert_allclose(L @ np.swapaxes(L, -1, -2), A @ np.swapaxes(A, -1, -2), atol=1e-13)
    np.testing.assert_allclose(L, linalg.cholesky(A @ np.swapaxes(A, -1, -2)), atol=1e-12)
    # fewer columns than rows: rank deficient but still a valid factor
    B = rng.standard_normal((3, 2))
    Lb = linalg.cholesky_from_factor(B)
    np.testing.assert_allclose(Lb @ Lb.T, B @ B.T, atol=1e-14)
    # a zero row of A gives a zero pivot; the product is still exact
    Z = np.vstack([np.zeros(4), rng.standard_normal((2, 4))])
    Lz = linalg.cholesky_from_factor(Z)
    assert Lz[0, 0] == 0.0
    np.testing.assert_allclose(Lz @ Lz.T, Z @ Z.T, atol=1e-14)
    with pytest.raises(ValueError):
        linalg.cholesky_from_factor(np.array([np.inf, 1.0]))


def test_expm_examples():
    np.testing.assert_array_equal(linalg.expm_oracle(np.zeros((3, 3)), 2.5), np.eye(3))
    assert abs(linalg.expm_oracle(np.array([[-1.0]]), 1.0)[0, 0] - math.exp(-1)) <= 1e-15
    A = np.array([[0.0, 1.0], [-1.0, -2.0]])
    want = math.exp(-1) * np.array([[2.0, 1.0], [-1.0, 0.0]])
    assert np.max(np.abs(linalg.expm_oracle(A, 1.0) - want)) <= 1e-12


def test_expm_against_scipy_on_large_norm():
    from scipy.linalg import expm

    rng = np.random.default_rng(3)
    for _ in range(20):
        A = rng.standard_normal((4, 4))
        A *= 10.0 / np.linalg.norm(A, 2)
        ref = expm(A * 5.0)
        got = linalg.expm_oracle(A, 5.0)
        assert np.max(np.abs(got - ref)) <= 1e-12 * max(1.0, np.max(np.abs(ref)))


def test_expm_overflow_raises():
    with pytest.raises(OverflowError):
        linalg.expm_oracle(np.array([[1000.0]]), 1000.0)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0, 2), st.floats(0, 2))
def test_expm_semigroup(seed, s, t):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 6))
    A = rng.standard_normal((n, n))
    A *= rng.uniform(0, 5) / max(np.linalg.norm(A, 2), 1e-12)
    lhs = linalg.expm_oracle(A, s + t)
    rhs = linalg.expm_oracle(A, s) @ linalg.expm_oracle(A, t)
    assert np.max(np.abs(lhs - rhs)) <= 1e-9 * max(1.0, np.max(np.abs(lhs)))


def test_eigenvalue_examples():
    np.testing.assert_allclose(np.sort(linalg.eigenvalues(np.diag([1.0, 2.0, 3.0])).real), [1, 2, 3], atol=1e-12)
    ev = linalg.eigenvalues(np.array([[0.0, 1.0], [-1.0, 0.0]]))
    np.testing.assert_allclose(sorted(ev, key=lambda z: z.imag), [-1j, 1j], atol=1e-12)
    F, _ = dynamics.build_drift(dynamics.critical_params(3))
    assert np.max(np.abs(linalg.eigenvalues(F) + math.sqrt(3))) <= 1e-4


def test_eigenvalues_trace_and_determinant():
    rng = np.random.default_rng(11)
    for _ in range(200):
        n = int(rng.integers(1, 7))
        A = rng.standard_normal((n, n))
        ev = linalg.eigenvalues(A)
        assert len(ev) == n
        assert abs(ev.sum() - np.trace(A)) <= 1e-8
        det = np.linalg.det(A)
        assert abs(np.prod(ev) - det) <= 1e-6 * max(abs(det), 1.0)


def test_eigenvalues_mp_resolves_defective_root():
    Fmp, lam = dynamics.critical_drift_mp(6, 60)
    assert max(abs(complex(mu) - float(lam)) for mu in linalg.eigenvalues_mp(Fmp, 60)) <= 1e-8


def test_lyapunov_examples():
    z = np.zeros((2, 2))
    assert linalg.lyapunov_residual(z, z, z) == 0.0
    I = np.eye(3)
    assert linalg.lyapunov_residual(-I, I / 2, I) == 0.0
    spec = dynamics.critical_params(2)
    F, GGT = dynamics.build_drift(spec)
    assert linalg.lyapunov_residual(F, spec.l_inv * np.eye(2), GGT) <= 1e-12
    with pytest.raises(ValueError):
        linalg.lyapunov_residual(np.eye(2), np.eye(3), np.eye(2))
