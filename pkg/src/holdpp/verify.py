"""Numerical and exact checks of the forward-process theory.

Each ``check_*`` function returns a :class:`CheckResult`. The CLI ``verify``
subcommand and the acceptance tests both run these.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from fractions import Fraction

import mpmath
import numpy as np

from . import dynamics, linalg, spectral


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    tol: float
    detail: str = ""
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: {self.value:.3e} (tol {self.tol:.1e}) {self.detail} [{self.seconds:.2f}s]"


def _timed(fn):
    def wrapper(*args, **kwargs):
        start = time.perf_counter()
        try:
            res = fn(*args, **kwargs)
        except Exception as exc:  # a crash inside a check is a failed check
            res = CheckResult(fn.__name__.removeprefix("check_"), False, float("nan"), float("nan"),
                              f"raised {type(exc).__name__}: {exc}")
        res.seconds = time.perf_counter() - start
        return res

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@_timed
def check_critical_spectrum(n_max: int = 8, dps: int = 60) -> CheckResult:
    """Single eigenvalue and nilpotency of the critical drift for ``n = 2..n_max``.

    The float64 spec must agree entrywise with a ``dps``-digit construction of
    the same formula, and ``N = F - lambda* I`` is powered in that precision.
    A defective eigenvalue of multiplicity ``n`` is resolvable only to about
    ``eps**(1/n)`` in double precision, so the float64 spread is reported but
    not tested. Every eigenvalue ``mu`` of ``F`` gives the eigenvalue
    ``(mu - lambda*)^n`` of ``N^n``, hence ``|mu - lambda*| <= ||N^n||^(1/n)``
    in any induced norm; that bound is the tested eigenvalue distance.
    """
    worst_eig = worst_nil = worst_entry = 0.0
    float_spread = {}
    for n in range(2, n_max + 1):
        spec = dynamics.critical_params(n)
        F, _ = dynamics.build_drift(spec)
        Fmp, lam = dynamics.critical_drift_mp(n, dps)
        with mpmath.workdps(dps):
            rel = max(
                float(abs(Fmp[i, j] - F[i, j]) / max(abs(Fmp[i, j]), 1))
                for i in range(n) for j in range(n)
            )
            rel = max(rel, float(abs(lam - spec.lambda_star) / abs(lam)))
            Nn = (Fmp - lam * mpmath.eye(n)) ** n
            nil = float(max(abs(x) for x in Nn))
            row_norm = max(sum(abs(Nn[i, j]) for j in range(n)) for i in range(n))
            bound = float(row_norm ** (mpmath.mpf(1) / n))
        worst_entry = max(worst_entry, rel)
        worst_eig = max(worst_eig, bound)
        worst_nil = max(worst_nil, nil)
        float_spread[n] = float(np.max(np.abs(np.linalg.eigvals(F) - spec.lambda_star)))
    passed = worst_eig <= 1e-4 and worst_nil <= 1e-8 and worst_entry <= 1e-14
    detail = (f"max|eig-lam*| <= {worst_eig:.2e}, max|N^n|={worst_nil:.2e}, float64 vs {dps}-digit "
              f"entries {worst_entry:.1e}; float64 eig spread at n={n_max}: {float_spread[n_max]:.1e}")
    return CheckResult("critical_spectrum", passed, worst_eig, 1e-4, detail)


@_timed
def check_expm(n_max: int = 6, times=(0.01, 0.1, 0.5, 1, 2, 5, 10)) -> CheckResult:
    worst = 0.0
    for n in range(2, n_max + 1):
        spec = dynamics.critical_params(n)
        F, _ = dynamics.build_drift(spec)
        for t in times:
            worst = max(worst, float(np.max(np.abs(dynamics.expm_critical(spec, t) - linalg.expm_oracle(F, t)))))
    return CheckResult("expm_closed_form_vs_oracle", worst <= 1e-10, worst, 1e-10)


def random_psd(rng, n, scale=1.0):
    A = rng.standard_normal((n, n))
    return scale * (A @ A.T) / n + 1e-6 * np.eye(n)


def random_spec(rng, n, l_inv=0.5) -> dynamics.DriftSpec:
    return dynamics.DriftSpec(
        n=n, gammas=tuple(rng.uniform(0.3, 3.0, n - 1)), xi=float(rng.uniform(0.5, 4.0)), l_inv=l_inv
    )


@_timed
def check_covariance_ode(n_max: int = 6, n_random: int = 20, times=(0.1, 0.5, 1.0, 5.0), seed: int = 0) -> CheckResult:
    """Closed-form covariance factor against RK4 on the moment ODE (step 1e-3)."""
    rng = np.random.default_rng(seed)
    specs = [dynamics.default_spec(n) for n in range(1, n_max + 1)]
    specs += [random_spec(rng, int(rng.integers(2, n_max + 1))) for _ in range(n_random)]
    worst = 0.0
    for spec in specs:
        S0 = random_psd(rng, spec.n)
        # integrate once to the last time, checking along the way
        S = S0.copy()
        t_prev = 0.0
        for t in times:
            S = dynamics.covariance_ode(spec, S, t - t_prev, dt=1e-3)
            t_prev = t
            closed = dynamics.forward_stats(spec, t, S0).cov_factor
            worst = max(worst, float(np.linalg.norm(closed - S, "fro")))
    return CheckResult("covariance_closed_form_vs_rk4", worst <= 1e-6, worst, 1e-6, f"{len(specs)} specs")


@_timed
def check_stationarity(n_max: int = 8, l_inv: float = 0.5, T: float = 5.0) -> CheckResult:
    worst_lyap = worst_lim = 0.0
    for n in range(1, n_max + 1):
        spec = dynamics.default_spec(n, l_inv)
        F, GGT = dynamics.build_drift(spec)
        worst_lyap = max(worst_lyap, linalg.lyapunov_residual(F, l_inv * np.eye(n), GGT))
        S = dynamics.forward_stats(spec, 10 * T, dynamics.initial_cov(spec)).cov_factor
        worst_lim = max(worst_lim, float(np.max(np.abs(S - l_inv * np.eye(n)))))
    passed = worst_lyap <= 1e-12 and worst_lim <= 1e-6
    return CheckResult("stationarity", passed, max(worst_lyap, worst_lim), 1e-6,
                       f"lyapunov residual {worst_lyap:.1e} (tol 1e-12), |S_10T - L^-1 I| {worst_lim:.1e} (tol 1e-6)")


@_timed
def check_identities(n_max: int = 8) -> CheckResult:
    """``trace F = -xi`` and ``G G^T = -L^-1 (F + F^T)``, both exactly."""
    bad = []
    for n in range(1, n_max + 1):
        spec = dynamics.default_spec(n)
        F, GGT = dynamics.build_drift(spec)
        if np.trace(F) != -spec.xi:
            bad.append(f"trace n={n}")
        if np.any(GGT + spec.l_inv * (F + F.T) != 0):
            bad.append(f"GG^T n={n}")
    return CheckResult("drift_identities", not bad, float(len(bad)), 0.0, ", ".join(bad))


@_timed
def check_optimality(n_max: int = 6, trials: int = 1000, seed: int = 0) -> CheckResult:
    """Random coupling perturbations at fixed ``xi`` never beat ``lambda*``.

    Ties are expected: an underdamped choice can leave a complex pair whose
    real part sits exactly at ``-xi/n`` (for ``n = 2`` every ``gamma_1 > 1``
    does), so ties are counted but not failed.
    """
    rng = np.random.default_rng(seed)
    worst_margin = np.inf
    ties = 0
    for n in range(2, n_max + 1):
        spec = dynamics.critical_params(n)
        lam = spec.lambda_star
        g = np.array(spec.gammas)
        for _ in range(trials):
            factors = rng.uniform(0.5, 2.0, n - 1)
            F = dynamics.drift_matrix(n, g * factors, spec.xi)
            abscissa = dynamics.spectral_abscissa(F)
            worst_margin = min(worst_margin, abscissa - lam)
            if abscissa - lam <= 1e-4:
                ties += 1
    passed = worst_margin >= -1e-6
    return CheckResult("optimality", passed, float(worst_margin), 1e-6,
                       f"min(max Re eig - lam*) over {trials} draws per n; {ties} ties within 1e-4")


@_timed
def check_spectral(n_max: int = 12) -> CheckResult:
    """Exact identities: closed form vs recurrence, characteristic polynomial, gamma extraction."""
    failures = []
    count = 0
    for n in range(2, n_max + 1):
        lam_sq = Fraction(2 * n - 3)
        g_sq = spectral.critical_gammas_sq(n)
        rec = spectral.s_recurrence(n, g_sq)
        for i in range(1, n + 1):
            for k in range(0, n // 2 + 1):
                if n - i > 2 * k - 2:
                    count += 1
                    if spectral.s_closed(n, i, k, lam_sq) != rec[n - i, k]:
                        failures.append(f"s n={n} i={i} k={k}")
        q = spectral.q_poly(n, g_sq, spectral.critical_xi(n))
        count += 1
        if q * ((-1) ** n) != spectral.binomial_power(n):
            failures.append(f"q n={n}")
        table = spectral.s_closed_table(n, lam_sq)
        for i in range(1, n):
            want = Fraction(n * n - i * i, 4 * i * i - 1) * lam_sq
            for k in range(1, n // 2 + 1):
                if n - i > 2 * k - 2:
                    count += 1
                    if spectral.gamma_from_s(n, i, k, table) != want:
                        failures.append(f"gamma n={n} i={i} k={k}")
        for j in range(0, min(n, 6) + 1):
            count += 1
            if spectral.d_poly(j, g_sq) != spectral.leading_block_charpoly(j, g_sq):
                failures.append(f"d n={n} j={j}")
    detail = f"{count} exact identities" + (f"; failed: {', '.join(failures[:5])}" if failures else "")
    return CheckResult("spectral_exact", not failures, float(len(failures)), 0.0, detail)


SUITES = {
    "spectral": lambda n_max: [check_spectral(max(n_max, 2))],
    "dynamics": lambda n_max: [
        check_critical_spectrum(max(n_max, 2)),
        check_expm(max(n_max, 2)),
        check_covariance_ode(max(n_max, 1)),
        check_stationarity(max(n_max, 1)),
        check_identities(max(n_max, 1)),
    ],
    "optimality": lambda n_max: [check_optimality(max(n_max, 2))],
}


def run(suites, n_max: int) -> list[CheckResult]:
    results = []
    for name in suites:
        results.extend(SUITES[name](n_max))
    return results
