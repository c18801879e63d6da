"""Forward process of higher-order Langevin dynamics.

The drift is the ``n x n`` skew-tridiagonal matrix ``F`` with couplings
``gamma_1..gamma_{n-1}`` on the off-diagonals and friction ``-xi`` in the
bottom-right corner; noise enters only the last coordinate through
``G = sqrt(2 xi L^-1) E_nn``. The ``h`` data dimensions evolve independently,
so every covariance is kept as its ``n x n`` Kronecker factor ``S_t``
(full covariance ``S_t (x) I_h``).
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import mpmath
import numpy as np

from . import linalg


@dataclass(frozen=True)
class DriftSpec:
    """Coefficients of the forward SDE.

    ``gammas[k]`` is ``gamma_{k+1}``. ``lambda_star`` is set only for
    critically damped specs, in which case ``F`` has the single eigenvalue
    ``lambda_star`` with algebraic multiplicity ``n``.
    """

    n: int
    gammas: tuple[float, ...]
    xi: float
    l_inv: float = 0.5
    lambda_star: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "gammas", tuple(float(g) for g in self.gammas))
        if self.n < 1:
            raise ValueError("order n must be >= 1")
        if len(self.gammas) != self.n - 1:
            raise ValueError(f"order {self.n} needs {self.n - 1} gammas, got {len(self.gammas)}")
        if any(not g > 0 for g in self.gammas):
            raise ValueError("gammas must be positive")
        if not self.xi > 0 or not self.l_inv > 0:
            raise ValueError("xi and l_inv must be positive")
        if self.lambda_star is not None:
            lam = self.lambda_star
            if not lam < 0:
                raise ValueError("lambda_star must be negative")
            if self.n >= 2:
                if abs(self.xi - self.n * abs(lam)) > 1e-12 * self.xi:
                    raise ValueError("xi != n |lambda_star|: spec is not critically damped")
                for i in range(1, self.n):
                    want = (self.n**2 - i**2) / (4 * i**2 - 1) * lam**2
                    got = self.gammas[self.n - i - 1] ** 2
                    if abs(got - want) > 1e-12 * want:
                        raise ValueError(f"gamma_{self.n - i} violates critical damping")

    @property
    def critical(self) -> bool:
        return self.lambda_star is not None


@dataclass(frozen=True)
class ForwardStats:
    t: float
    propagator: np.ndarray
    cov_factor: np.ndarray
    chol_factor: np.ndarray = field(repr=False)

    @property
    def ell(self) -> float:
        """Noise scale of the last block, the ``(n, n)`` Cholesky entry."""
        return float(self.chol_factor[-1, -1])


def critical_params(n: int, l_inv: float = 0.5) -> DriftSpec:
    """Critically damped coefficients with the convention ``gamma_1 = 1``."""
    if n < 2:
        raise ValueError(f"critical damping needs order n >= 2, got {n}")
    r = math.sqrt(2 * n - 3)
    gammas = [0.0] * (n - 1)
    for i in range(1, n):
        gammas[n - i - 1] = r * math.sqrt((n * n - i * i) / (4 * i * i - 1))
    gammas[0] = 1.0  # exact: (n^2-(n-1)^2)/(4(n-1)^2-1) = 1/(2n-3)
    return DriftSpec(n=n, gammas=tuple(gammas), xi=n * r, l_inv=l_inv, lambda_star=-r)


def ou_spec(xi: float = 1.0, l_inv: float = 0.5) -> DriftSpec:
    """First-order (Ornstein-Uhlenbeck) spec; its only eigenvalue is ``-xi``."""
    return DriftSpec(n=1, gammas=(), xi=xi, l_inv=l_inv, lambda_star=-xi)


def default_spec(n: int, l_inv: float = 0.5) -> DriftSpec:
    return ou_spec(1.0, l_inv) if n == 1 else critical_params(n, l_inv)


def drift_matrix(n: int, gammas, xi: float) -> np.ndarray:
    F = np.zeros((n, n))
    for k, g in enumerate(gammas):
        F[k, k + 1] = g
        F[k + 1, k] = -g
    F[n - 1, n - 1] = -xi
    return F


def build_drift(spec: DriftSpec) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(F, G G^T)``."""
    F = drift_matrix(spec.n, spec.gammas, spec.xi)
    GGT = np.zeros((spec.n, spec.n))
    GGT[-1, -1] = 2.0 * spec.xi * spec.l_inv
    return F, GGT


def critical_drift_mp(n: int, dps: int = 60):
    """Critical ``F`` and ``lambda_star`` evaluated in ``dps``-digit precision.

    A defective eigenvalue of multiplicity ``n`` moves by roughly
    ``eps**(1/n)`` under rounding of the entries, so a float64 ``F`` cannot
    show the single eigenvalue to better than ~1e-2 for ``n = 8``.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    with mpmath.workdps(dps):
        r = mpmath.sqrt(2 * n - 3)
        F = mpmath.zeros(n, n)
        for i in range(1, n):
            g = r * mpmath.sqrt(mpmath.mpf(n * n - i * i) / (4 * i * i - 1))
            k = n - i - 1
            F[k, k + 1] = g
            F[k + 1, k] = -g
        F[n - 1, n - 1] = -n * r
        return F, -r


def nilpotent_part(spec: DriftSpec) -> np.ndarray:
    if not spec.critical:
        raise ValueError("spec is not critically damped")
    F, _ = build_drift(spec)
    return F - spec.lambda_star * np.eye(spec.n)


def expm_critical(spec: DriftSpec, t: float) -> np.ndarray:
    """``exp(F t)`` as ``exp(lambda* t)`` times a finite sum of nilpotent powers."""
    return expm_critical_batch(spec, np.asarray([t], dtype=np.float64))[0]


def expm_critical_batch(spec: DriftSpec, t: np.ndarray) -> np.ndarray:
    """Vectorised :func:`expm_critical` over a 1-D array of times."""
    N = nilpotent_part(spec)
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    n = spec.n
    out = np.zeros(t.shape + (n, n))
    Nk = np.eye(n)
    coef = np.ones_like(t)
    for k in range(n):
        out += coef[..., None, None] * Nk
        Nk = Nk @ N
        coef = coef * t / (k + 1)
    return np.exp(spec.lambda_star * t)[..., None, None] * out


def propagator(spec: DriftSpec, t) -> np.ndarray:
    """``exp(F t)`` for scalar or array ``t``; closed form when critical."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=np.float64))
    if spec.critical:
        P = expm_critical_batch(spec, t_arr)
    else:
        F, _ = build_drift(spec)
        P = np.stack([linalg.expm_oracle(F, float(s)) for s in t_arr])
    return P[0] if np.ndim(t) == 0 else P


def initial_cov(spec: DriftSpec, alpha: float = 0.08, position_var: float = 0.0) -> np.ndarray:
    """Kronecker factor of the initial covariance.

    Auxiliary blocks start as ``N(0, alpha L^-1)``; the position block carries
    ``position_var`` (zero when conditioning on a data point).
    """
    diag = np.full(spec.n, alpha * spec.l_inv)
    diag[0] = position_var
    return np.diag(diag)


def covariance_batch(spec: DriftSpec, P: np.ndarray, S0: np.ndarray) -> np.ndarray:
    """``L^-1 I + P (S0 - L^-1 I) P^T`` for a stack of propagators ``P``."""
    n = spec.n
    D = np.asarray(S0, dtype=np.float64) - spec.l_inv * np.eye(n)
    S = spec.l_inv * np.eye(n) + P @ D @ np.swapaxes(P, -1, -2)
    return 0.5 * (S + np.swapaxes(S, -1, -2))


QUAD_SIZES = (4, 8, 16, 24, 32, 48)
PANEL_SPAN = 24.0  # largest |2 lambda| * panel length handled by one panel


@functools.lru_cache(maxsize=None)
def _gauss_legendre(m: int):
    return np.polynomial.legendre.leggauss(m)


def quad_nodes_for(c: float) -> int:
    """Fewest Gauss-Legendre nodes resolving ``exp(c u)`` on ``[0, 1]`` to about 1e-17."""
    half = abs(c) / 2.0
    for m in QUAD_SIZES:
        # remainder bound (c/2)^(2m) / (2m)!, taken in logs
        if 2 * m * math.log(max(half, 1e-300)) - math.lgamma(2 * m + 1) < math.log(1e-17):
            return m
    raise ValueError(f"|c| = {abs(c):.1f} needs more than {QUAD_SIZES[-1]} nodes")


def _quadrature(t: np.ndarray, rate: float, degree: int):
    """Composite Gauss-Legendre nodes and weights on ``[0, t_b]`` for each time."""
    c = abs(rate) * float(np.max(t, initial=0.0))
    panels = max(1, math.ceil(c / PANEL_SPAN))
    # the polynomial factor takes degree // 2 + 1 nodes on its own
    m = quad_nodes_for(c / panels) + degree // 2 + 1
    x, w = _gauss_legendre(m)
    u = (np.arange(panels)[:, None] + 0.5 * (x + 1.0)).reshape(-1) / panels
    return t[:, None] * u, t[:, None] * np.tile(w, panels) / (2 * panels)


def covariance_sqrt_batch(spec: DriftSpec, t, S0: np.ndarray) -> np.ndarray:
    """Factors ``A`` with ``A A^T = S_t`` for a 1-D array of times; shape ``(B, n, n + m)``.

    The first ``n`` columns are ``P C0`` with ``C0 C0^T = S0``. The rest
    discretise the noise integral ``int_0^t e^{Fs} G G^T e^{F^T s} ds`` by
    Gauss-Legendre quadrature, one column ``sqrt(w) e^{Fs} G`` per node. Every
    entry is then a short sum dominated by its leading term, so even the
    directions of ``S_t`` whose variance is far below machine precision
    relative to ``||S_t||`` are represented accurately. Subtracting
    ``P L^-1 P^T`` from ``L^-1 I`` instead cancels those directions away.
    The node count ``m`` is chosen from the largest ``t`` in the batch so
    that the exponential factor is integrated to rounding accuracy; long
    spans are split into equal panels.
    """
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    n = spec.n
    C0 = linalg.cholesky(np.asarray(S0, dtype=np.float64))
    P = propagator(spec, t)
    # the integrand is e^{2 lambda s} times a polynomial of degree 2n - 2 when
    # critical; otherwise bound its variation by the norm of F
    rate = 2.0 * (spec.lambda_star if spec.critical else np.linalg.norm(build_drift(spec)[0], 2))
    nodes, weights = _quadrature(t, rate, 2 * n - 2)
    g = math.sqrt(2.0 * spec.xi * spec.l_inv)
    if spec.critical:
        # only the last column of e^{Fs} is needed: e^{lambda s} sum_k N^k e_n s^k / k!
        N = nilpotent_part(spec)
        V = [np.eye(n)[:, -1]]
        for k in range(1, n):
            V.append(N @ V[-1] / k)
        powers = nodes[..., None] ** np.arange(n)  # (B, m, n)
        cols = np.exp(spec.lambda_star * nodes)[..., None] * (powers @ np.stack(V))
    else:
        cols = propagator(spec, nodes.reshape(-1))[:, :, -1].reshape(nodes.shape + (n,))
    noise = cols * (g * np.sqrt(weights))[..., None]  # (B, m, n)
    return np.concatenate([P @ C0, np.swapaxes(noise, -1, -2)], axis=-1)


def forward_stats(spec: DriftSpec, t: float, S0=None) -> ForwardStats:
    """Closed-form propagator and covariance factor of the forward process at time ``t``."""
    if t < 0:
        raise ValueError("t must be non-negative")
    if S0 is None:
        S0 = initial_cov(spec)
    S0 = linalg.as_matrix(S0, square=True)
    if S0.shape != (spec.n, spec.n):
        raise ValueError(f"S0 must be {spec.n}x{spec.n}")
    P = propagator(spec, float(t))
    S = covariance_batch(spec, P, S0)
    L = linalg.cholesky_from_factor(covariance_sqrt_batch(spec, float(t), S0)[0])
    return ForwardStats(t=float(t), propagator=P, cov_factor=S, chol_factor=L)


def ou_stats(xi: float, l_inv: float, sigma0_sq: float, t: float) -> tuple[float, float]:
    """Mean coefficient and standard deviation of the first-order process."""
    if t < 0:
        raise ValueError("t must be non-negative")
    var = l_inv + (sigma0_sq - l_inv) * math.exp(-2.0 * xi * t)
    if var < 0:
        raise ValueError(f"negative variance {var}")
    return math.exp(-xi * t), math.sqrt(var)


def covariance_ode(spec: DriftSpec, S0, t: float, dt: float = 1e-3) -> np.ndarray:
    """Integrate ``dS/dt = F S + S F^T + G G^T`` with classical RK4.

    Independent of the closed form; used as an oracle.
    """
    F, Q = build_drift(spec)
    S = np.array(S0, dtype=np.float64)
    steps = int(round(t / dt))
    if steps == 0:
        return S
    h = t / steps

    def rhs(X):
        FX = F @ X
        return FX + FX.T + Q

    for _ in range(steps):
        k1 = rhs(S)
        k2 = rhs(S + 0.5 * h * k1)
        k3 = rhs(S + 0.5 * h * k2)
        k4 = rhs(S + h * k3)
        S = S + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return S


def spectral_abscissa(F) -> float:
    """``max Re(eig(F))``."""
    return float(np.max(np.real(linalg.eigenvalues(F))))
