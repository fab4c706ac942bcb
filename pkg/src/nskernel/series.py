"""Truncated Taylor series in (h, conj(k)) around a diagonal point.

A kernel K(z, w) near (p, p) is holomorphic in z and antiholomorphic in w, so
its local expansion is a power series in h = z - p and kbar = conj(w - p).
``BiSeries`` stores the coefficients with both degrees capped at ``q``
(default 2), which is exactly the jet order needed for metric, curvature and
Ricci computations.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .core import enumerate_multiindices


@lru_cache(maxsize=None)
def monomials(n: int, q: int) -> tuple:
    return tuple(enumerate_multiindices(n, q))


@lru_cache(maxsize=None)
def _index(n: int, q: int) -> dict:
    return {a: i for i, a in enumerate(monomials(n, q))}


@lru_cache(maxsize=None)
def _product_table(n: int, q: int) -> np.ndarray:
    """T[a, c, i] = 1 when mono[a] + mono[c] == mono[i]."""
    mons = monomials(n, q)
    idx = _index(n, q)
    m = len(mons)
    T = np.zeros((m, m, m))
    for a, ma in enumerate(mons):
        for c, mc in enumerate(mons):
            s = tuple(x + y for x, y in zip(ma, mc))
            if sum(s) <= q:
                T[a, c, idx[s]] = 1.0
    return T


@lru_cache(maxsize=None)
def factorials(n: int, q: int) -> np.ndarray:
    return np.array([math.prod(math.factorial(x) for x in a) for a in monomials(n, q)], dtype=float)


class BiSeries:
    """Coefficients ``c[A, B]`` of h^A kbar^B, with |A|, |B| <= q."""

    __slots__ = ("n", "q", "c")

    def __init__(self, n: int, c: np.ndarray, q: int = 2):
        self.n = n
        self.q = q
        self.c = np.asarray(c, dtype=complex)

    @classmethod
    def zero(cls, n: int, q: int = 2) -> "BiSeries":
        m = len(monomials(n, q))
        return cls(n, np.zeros((m, m), dtype=complex), q)

    @classmethod
    def constant(cls, n: int, value: complex, q: int = 2) -> "BiSeries":
        s = cls.zero(n, q)
        s.c[0, 0] = value
        return s

    @classmethod
    def from_derivatives(cls, n: int, values: np.ndarray, q: int = 2) -> "BiSeries":
        """Build from the matrix of mixed derivatives d^A_z d^B_wbar."""
        f = factorials(n, q)
        return cls(n, values / np.outer(f, f), q)

    def derivatives(self) -> np.ndarray:
        f = factorials(self.n, self.q)
        return self.c * np.outer(f, f)

    def idx(self, alpha) -> int:
        return _index(self.n, self.q)[tuple(alpha)]

    def coeff(self, A, B) -> complex:
        return complex(self.c[self.idx(A), self.idx(B)])

    def deriv(self, A, B) -> complex:
        f = factorials(self.n, self.q)
        i, j = self.idx(A), self.idx(B)
        return complex(self.c[i, j] * f[i] * f[j])

    def __add__(self, other):
        if isinstance(other, BiSeries):
            return BiSeries(self.n, self.c + other.c, self.q)
        out = BiSeries(self.n, self.c.copy(), self.q)
        out.c[0, 0] += other
        return out

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-1) * other

    def __rmul__(self, scalar):
        return BiSeries(self.n, scalar * self.c, self.q)

    def __mul__(self, other):
        if not isinstance(other, BiSeries):
            return BiSeries(self.n, other * self.c, self.q)
        T = _product_table(self.n, self.q)
        c = np.einsum("aci,bdj,ab,cd->ij", T, T, self.c, other.c, optimize=True)
        return BiSeries(self.n, c, self.q)

    def power_series(self, coeffs) -> "BiSeries":
        """sum_m coeffs[m] X^m where X = self - self[0, 0] (nilpotent part)."""
        X = BiSeries(self.n, self.c.copy(), self.q)
        X.c[0, 0] = 0.0
        out = BiSeries.constant(self.n, coeffs[0], self.q)
        term = BiSeries.constant(self.n, 1.0, self.q)
        for m in range(1, min(len(coeffs), 2 * self.q + 1)):
            term = term * X
            out = out + coeffs[m] * term
        return out

    def log(self) -> "BiSeries":
        c0 = self.c[0, 0]
        if c0 == 0:
            raise ZeroDivisionError("log of a series with vanishing constant term")
        u = complex(1.0 / c0) * self
        top = 2 * self.q
        coeffs = [complex(np.log(c0))] + [(-1) ** (m + 1) / m for m in range(1, top + 1)]
        return u.power_series(coeffs)

    def pow(self, s: float) -> "BiSeries":
        """self ** s for real s, principal branch of the constant term."""
        c0 = complex(self.c[0, 0])
        u = (1.0 / c0) * self
        top = 2 * self.q
        coeffs = [1.0]
        for m in range(1, top + 1):
            coeffs.append(coeffs[-1] * (s - m + 1) / m)
        return complex(c0 ** s) * u.power_series(coeffs)

    def exp(self) -> "BiSeries":
        c0 = self.c[0, 0]
        top = 2 * self.q
        coeffs = [1.0 / math.factorial(m) for m in range(top + 1)]
        return complex(np.exp(c0)) * self.power_series(coeffs)
