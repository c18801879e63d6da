"""Why the critical coefficients matter, in numbers.

Prints the critically damped coefficients for a few orders, shows that the
drift has one repeated eigenvalue, and compares it against random
perturbations of the couplings at the same friction.
"""
import numpy as np

from holdpp import dynamics, spectral
from holdpp.linalg import eigenvalues

for n in (2, 3, 4, 6):
    spec = dynamics.critical_params(n)
    F, _ = dynamics.build_drift(spec)
    print(f"n={n}: lambda*={spec.lambda_star:+.6f}  xi={spec.xi:.6f}  gammas={np.round(spec.gammas, 6).tolist()}")

    # In double precision a defective eigenvalue splits by roughly eps**(1/n);
    # the exact check below does not have that problem.
    spread = np.max(np.abs(eigenvalues(F) - spec.lambda_star))
    print(f"    float64 eigenvalue spread around lambda*: {spread:.1e}")

    rng = np.random.default_rng(n)
    abscissae = [
        dynamics.spectral_abscissa(dynamics.drift_matrix(n, np.array(spec.gammas) * rng.uniform(0.5, 2, n - 1), spec.xi))
        for _ in range(500)
    ]
    print(f"    500 perturbed couplings: slowest-mode rate between {min(abscissae):+.4f} and {max(abscissae):+.4f}, "
          f"{'never' if min(abscissae) >= spec.lambda_star - 1e-6 else 'sometimes'} below the critical {spec.lambda_star:+.4f}")

# The characteristic polynomial in exact arithmetic: (-1)^n q(lambda) = (lambda - lambda*)^n
n = 5
q = spectral.q_poly(n, spectral.critical_gammas_sq(n), spectral.critical_xi(n))
print(f"\nn={n}: (-1)^n q(lambda) coefficients (a + b*lambda*, lambda*^2 = {2 * n - 3}):")
for k in range(n + 1):
    print(f"    lambda^{k}: {(-1) ** n * q[k]}")
print("equals binomial expansion:", (-1) ** n * q == spectral.binomial_power(n))
