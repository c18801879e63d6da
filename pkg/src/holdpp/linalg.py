"""Small dense real linear algebra.

Everything here works on ``numpy`` arrays of shape ``(n, n)``; ``cholesky``
and ``expm_oracle`` also accept stacks ``(..., n, n)`` so that per-sample
forward statistics can be computed for a whole training batch at once.
"""
from __future__ import annotations

import math

import mpmath
import numpy as np


PIVOT_CLAMP = 1e-10


class NotPSDError(ValueError):
    """Raised when a Cholesky pivot is clearly negative."""


class ConvergenceError(RuntimeError):
    pass


def as_matrix(a, *, square: bool = False) -> np.ndarray:
    """Validate and copy ``a`` into a finite float64 matrix."""
    m = np.array(a, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {m.shape}")
    if square and m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def cholesky(S, *, check_symmetry: bool = True) -> np.ndarray:
    """Lower Cholesky factor of a symmetric PSD matrix (or a stack of them).

    Pivots in ``[-1e-10, 1e-10]`` are clamped to zero and the column below
    them is zeroed, so rank-deficient inputs such as a covariance with an
    exactly known coordinate factor cleanly. A pivot below ``-1e-10`` raises
    :class:`NotPSDError`.
    """
    S = np.asarray(S, dtype=np.float64)
    if S.ndim < 2 or S.shape[-1] != S.shape[-2]:
        raise ValueError(f"expected square matrices, got shape {S.shape}")
    if not np.all(np.isfinite(S)):
        raise ValueError("matrix has non-finite entries")
    if check_symmetry:
        scale = np.max(np.abs(S), axis=(-2, -1), initial=0.0)
        asym = np.max(np.abs(S - np.swapaxes(S, -1, -2)), axis=(-2, -1), initial=0.0)
        if np.any(asym > 1e-12 * np.maximum(scale, 1e-300)):
            raise ValueError("matrix is not symmetric")

    n = S.shape[-1]
    L = np.zeros_like(S)
    # column-by-column, vectorised over any leading batch dimensions
    for j in range(n):
        pivot = S[..., j, j] - np.sum(L[..., j, :j] ** 2, axis=-1)
        if np.any(pivot < -PIVOT_CLAMP):
            raise NotPSDError(f"pivot {float(np.min(pivot)):.3e} at column {j}")
        degenerate = pivot <= PIVOT_CLAMP
        d = np.sqrt(np.where(degenerate, 1.0, pivot))
        below = S[..., j + 1 :, j] - np.einsum("...ik,...k->...i", L[..., j + 1 :, :j], L[..., j, :j])
        col = below / d[..., None]
        L[..., j + 1 :, j] = np.where(degenerate[..., None], 0.0, col)
        L[..., j, j] = np.where(degenerate, 0.0, d)
    return L


def cholesky_from_factor(A) -> np.ndarray:
    """Lower triangular ``L`` with ``L L^T = A A^T`` for ``A`` of shape ``(..., n, k)``.

    Uses a Householder QR of ``A^T`` so ``A A^T`` is never formed. The error
    is governed by the conditioning of ``A`` rather than of ``A A^T``, which
    matters for the nearly singular covariances of high-order processes at
    small times. Rows of ``A^T`` are sorted by decreasing norm first, which
    keeps Householder QR accurate when the columns of ``A`` differ in scale
    by many orders of magnitude. The diagonal is made non-negative. A zero
    pivot (a row of ``A`` that is exactly zero) is kept as zero, but the
    column below it is not forced to zero as :func:`cholesky` does.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim < 2:
        raise ValueError(f"expected a matrix or stack of matrices, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("factor has non-finite entries")
    n, k = A.shape[-2:]
    At = np.swapaxes(A, -1, -2)
    if k < n:  # pad with zero rows so R is square
        At = np.concatenate([At, np.zeros(At.shape[:-2] + (n - k, n))], axis=-2)
    order = np.argsort(-np.linalg.norm(At, axis=-1), axis=-1, kind="stable")
    At = np.take_along_axis(At, order[..., None], axis=-2)
    R = np.linalg.qr(At, mode="r")
    sign = np.where(np.diagonal(R, axis1=-2, axis2=-1) < 0, -1.0, 1.0)
    return np.swapaxes(R * sign[..., :, None], -1, -2)


def expm_oracle(A, t: float = 1.0) -> np.ndarray:
    """``exp(A t)`` by scaling and squaring of a truncated Taylor series.

    The argument is halved until its 1-norm is at most 0.5, the series is
    summed until a term drops below 1e-18 in norm, and the result is squared
    back up.
    """
    A = as_matrix(A, square=True)
    if not math.isfinite(t):
        raise ValueError("t must be finite")
    X = A * t
    n = X.shape[0]
    norm = np.linalg.norm(X, 1)
    k = 0
    if norm > 0.5:
        k = int(math.ceil(math.log2(norm / 0.5)))
    X = X / 2.0**k

    result = np.eye(n)
    term = np.eye(n)
    for m in range(1, 200):
        term = term @ X / m
        result = result + term
        if np.linalg.norm(term, 1) < 1e-18:
            break
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(k):
            result = result @ result
    if not np.all(np.isfinite(result)):
        raise OverflowError("matrix exponential overflowed")
    return result


def eigenvalues(A) -> np.ndarray:
    """All eigenvalues of a real square matrix, with multiplicity.

    Delegates to LAPACK's Hessenberg QR (``geev``). Each eigenvalue is
    checked by the smallest singular value of ``A - lam I`` relative to the
    matrix scale, so silent non-convergence cannot slip through.
    """
    A = as_matrix(A, square=True)
    n = A.shape[0]
    if n == 0:
        return np.zeros(0, dtype=complex)
    try:
        lam = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"eigenvalue iteration did not converge: {exc}") from exc
    scale = max(np.linalg.norm(A, 2), 1.0)
    for mu in lam:
        smin = np.linalg.svd(A - mu * np.eye(n), compute_uv=False)[-1]
        # defective eigenvalues are perturbed by ~eps**(1/n); the singular value
        # of A - mu I is still tiny relative to the scale in that case
        if smin > 1e-6 * scale:
            raise ConvergenceError(f"eigenvalue {mu} has residual {smin:.3e}")
    return lam


def eigenvalues_mp(A, dps: int = 60) -> list:
    """Eigenvalues in ``dps``-digit arithmetic (``mpmath``), for defective matrices.

    ``A`` may be an ``mpmath.matrix`` holding entries computed at that
    precision; float inputs are taken at face value.
    """
    with mpmath.workdps(dps):
        M = A if isinstance(A, mpmath.matrix) else mpmath.matrix(as_matrix(A, square=True).tolist())
        if M.rows != M.cols:
            raise ValueError("expected a square matrix")
        try:
            lam = mpmath.eig(M, left=False, right=False)
        except Exception as exc:  # mpmath raises plain RuntimeError/ZeroDivisionError
            raise ConvergenceError(f"eigenvalue iteration did not converge: {exc}") from exc
        return list(lam)


def lyapunov_residual(F, S, Q) -> float:
    """Frobenius norm of ``F S + S F^T + Q``."""
    F = as_matrix(F, square=True)
    S = as_matrix(S, square=True)
    Q = as_matrix(Q, square=True)
    if not (F.shape == S.shape == Q.shape):
        raise ValueError(f"dimension mismatch: {F.shape}, {S.shape}, {Q.shape}")
    return float(np.linalg.norm(F @ S + S @ F.T + Q, "fro"))
