"""Exact arithmetic for the characteristic polynomial of the drift matrix.

Everything is computed with :class:`fractions.Fraction`. The critical
eigenvalue ``lambda* = -sqrt(2n - 3)`` is irrational, so quantities that
involve odd powers of it live in ``Q(lambda*)`` and are represented by
:class:`Surd` as ``a + b*lambda*`` with ``lambda*^2`` reduced eagerly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import zip_longest


@dataclass(frozen=True)
class Surd:
    """``a + b * lambda*`` with ``lambda*^2 = square`` (``lambda* < 0``)."""

    a: Fraction
    b: Fraction
    square: Fraction

    def __post_init__(self):
        object.__setattr__(self, "a", Fraction(self.a))
        object.__setattr__(self, "b", Fraction(self.b))
        object.__setattr__(self, "square", Fraction(self.square))

    @classmethod
    def root(cls, square) -> "Surd":
        return cls(0, 1, square)

    def _coerce(self, other) -> "Surd":
        if isinstance(other, Surd):
            if other.square != self.square:
                raise ValueError("mixing surds over different fields")
            return other
        return Surd(Fraction(other), 0, self.square)

    def __add__(self, other):
        o = self._coerce(other)
        return Surd(self.a + o.a, self.b + o.b, self.square)

    __radd__ = __add__

    def __neg__(self):
        return Surd(-self.a, -self.b, self.square)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        o = self._coerce(other)
        return Surd(self.a * o.a + self.b * o.b * self.square, self.a * o.b + self.b * o.a, self.square)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        out = Surd(1, 0, self.square)
        for _ in range(k):
            out = out * self
        return out

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.b == 0 and self.a == other
        if isinstance(other, Surd):
            return (self.a, self.b, self.square) == (other.a, other.b, other.square)
        return NotImplemented

    def __hash__(self):
        return hash((self.a, self.b, self.square))

    def __float__(self):
        return float(self.a) - float(self.b) * math.sqrt(self.square)

    def __repr__(self):
        return f"({self.a} + {self.b}*lam)"


def _is_zero(c) -> bool:
    return c == 0


@dataclass(frozen=True)
class Poly:
    """Polynomial in ``lambda`` with exact coefficients, ascending degree."""

    coeffs: tuple

    def __post_init__(self):
        c = list(self.coeffs)
        while c and _is_zero(c[-1]):
            c.pop()
        object.__setattr__(self, "coeffs", tuple(c))

    @classmethod
    def const(cls, c) -> "Poly":
        return cls((c,))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __getitem__(self, k: int):
        return self.coeffs[k] if 0 <= k < len(self.coeffs) else 0

    def __add__(self, other: "Poly") -> "Poly":
        return Poly(tuple(a + b for a, b in zip_longest(self.coeffs, other.coeffs, fillvalue=0)))

    def __neg__(self) -> "Poly":
        return Poly(tuple(-c for c in self.coeffs))

    def __sub__(self, other: "Poly") -> "Poly":
        return self + (-other)

    def __mul__(self, other) -> "Poly":
        if not isinstance(other, Poly):
            return Poly(tuple(c * other for c in self.coeffs))
        if not self.coeffs or not other.coeffs:
            return Poly(())
        out = [0] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            for j, b in enumerate(other.coeffs):
                out[i + j] = out[i + j] + a * b
        return Poly(tuple(out))

    __rmul__ = __mul__

    def shift(self, k: int = 1) -> "Poly":
        """Multiply by ``lambda**k``."""
        return Poly((0,) * k + self.coeffs) if self.coeffs else self

    def __eq__(self, other):
        if not isinstance(other, Poly):
            return NotImplemented
        return len(self.coeffs) == len(other.coeffs) and all(
            a - b == 0 for a, b in zip(self.coeffs, other.coeffs)
        )

    def __hash__(self):
        return hash(self.coeffs)

    def __call__(self, x):
        acc = 0
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc


MINUS_LAMBDA = Poly((0, -1))


def d_poly(j: int, gammas_sq) -> Poly:
    """Characteristic polynomial of the leading ``j x j`` block of ``F + xi E_nn``.

    ``d_0 = 1``, ``d_1 = -lambda`` and ``d_{j+1} = -lambda d_j + gamma_j^2 d_{j-1}``.
    """
    gammas_sq = list(gammas_sq)
    if not 0 <= j <= len(gammas_sq) + 1:
        raise ValueError(f"j={j} out of range for {len(gammas_sq) + 1}x{len(gammas_sq) + 1} matrix")
    prev, cur = Poly.const(Fraction(1)), MINUS_LAMBDA
    if j == 0:
        return prev
    for m in range(1, j):
        prev, cur = cur, MINUS_LAMBDA * cur + prev * gammas_sq[m - 1]
    return cur


def q_poly(n: int, gammas_sq, xi) -> Poly:
    """Characteristic polynomial ``det(F - lambda I) = d_n - xi d_{n-1}``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return d_poly(n, gammas_sq) - d_poly(n - 1, gammas_sq) * xi


class STable:
    """The bivariate sequence ``s_{j,k}``.

    Only entries with ``j > 2k - 2`` are stored; ``s_{j,0} = 1`` and every
    other out-of-band entry is zero.
    """

    def __init__(self, n: int, values: dict):
        self.n = n
        self.values = dict(values)

    def __getitem__(self, jk):
        j, k = jk
        if k == 0 and j >= -1:
            return Fraction(1)
        if k < 0 or j <= 2 * k - 2:
            return Fraction(0)
        return self.values[(j, k)]

    def __eq__(self, other):
        return isinstance(other, STable) and self.n == other.n and self.values == other.values


def s_recurrence(n: int, gammas_sq) -> STable:
    """``s_{j,k} = gamma_j^2 s_{j-2,k-1} + s_{j-1,k}`` for ``j > 2k - 2``, ``j <= n - 1``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    g = [None] + [Fraction(x) for x in gammas_sq]  # g[j] = gamma_j^2
    table = STable(n, {})
    for j in range(-1, n):
        for k in range(1, n // 2 + 1):
            if j > 2 * k - 2:
                table.values[(j, k)] = g[j] * table[j - 2, k - 1] + table[j - 1, k]
    return table


def s_closed(n: int, i: int, k: int, lambda_star_sq) -> Fraction:
    """Closed form of ``s_{n-i,k}``, valid for ``n - i > 2k - 2``."""
    if not n - i > 2 * k - 2 or k < 0:
        raise ValueError(f"closed form needs n - i > 2k - 2 (n={n}, i={i}, k={k})")
    ratio = Fraction(math.comb(i + k - 1, k), math.comb(2 * (i + k - 1), 2 * k))
    return ratio * math.comb(n - i + 1, 2 * k) * Fraction(lambda_star_sq) ** k


def s_closed_table(n: int, lambda_star_sq=None) -> STable:
    """STable filled from the closed form (``lambda*^2 = 2n - 3`` by default)."""
    lam_sq = Fraction(2 * n - 3) if lambda_star_sq is None else Fraction(lambda_star_sq)
    table = STable(n, {})
    for j in range(-1, n):
        for k in range(1, n // 2 + 1):
            if j > 2 * k - 2:
                table.values[(j, k)] = s_closed(n, n - j, k, lam_sq)
    return table


def gamma_from_s(n: int, i: int, k: int, s_table: STable) -> Fraction:
    """Recover ``gamma_{n-i}^2`` from three entries of the s-table."""
    if not 1 <= i <= n - 1 or k < 1:
        raise ValueError(f"need 1 <= i <= n-1 and k >= 1 (i={i}, k={k})")
    den = s_table[n - i - 2, k - 1]
    if den == 0:
        raise ZeroDivisionError(f"s_{{{n - i - 2},{k - 1}}} is zero")
    return (s_table[n - i, k] - s_table[n - i - 1, k]) / den


def critical_gammas_sq(n: int) -> list[Fraction]:
    """Exact ``gamma_1^2..gamma_{n-1}^2`` of the critically damped spec."""
    lam_sq = Fraction(2 * n - 3)
    out = [Fraction(0)] * (n - 1)
    for i in range(1, n):
        out[n - i - 1] = Fraction(n * n - i * i, 4 * i * i - 1) * lam_sq
    return out


def critical_xi(n: int) -> Surd:
    """``xi = -n lambda*`` as an element of ``Q(lambda*)``."""
    return Surd(0, -n, 2 * n - 3)


def binomial_power(n: int) -> Poly:
    """Coefficients of ``(lambda - lambda*)^n``: ``C(n,k) (-lambda*)^(n-k)``."""
    lam = Surd.root(2 * n - 3)
    return Poly(tuple(math.comb(n, k) * (-lam) ** (n - k) for k in range(n + 1)))


def det_poly(M) -> Poly:
    """Determinant of a square matrix of :class:`Poly` entries by cofactor expansion."""
    size = len(M)
    if size == 0:
        return Poly.const(Fraction(1))
    if size == 1:
        return M[0][0]
    total = Poly(())
    for c in range(size):
        if M[0][c] == Poly(()):
            continue
        minor = [row[:c] + row[c + 1 :] for row in M[1:]]
        term = M[0][c] * det_poly(minor)
        total = total + term if c % 2 == 0 else total - term
    return total


def leading_block_charpoly(j: int, gammas_sq) -> Poly:
    """Brute-force ``det(A_j - lambda I)`` for the leading block of ``F + xi E_nn``.

    A diagonal similarity maps each off-diagonal pair ``(gamma, -gamma)`` to
    ``(1, -gamma^2)``, which keeps every entry rational.
    """
    gammas_sq = [Fraction(g) for g in gammas_sq]
    M = [[Poly(()) for _ in range(j)] for _ in range(j)]
    for r in range(j):
        M[r][r] = MINUS_LAMBDA
        if r + 1 < j:
            M[r][r + 1] = Poly.const(Fraction(1))
            M[r + 1][r] = Poly.const(-gammas_sq[r])
    return det_poly(M)
