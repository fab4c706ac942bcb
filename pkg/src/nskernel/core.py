"""Shared domain model: multiindices, model domains, defining functions and
boundary geometry.

Points are 1-d complex numpy arrays of length ``n``.  Every domain here is a
bounded complete Reinhardt domain, so its kernel is a diagonal monomial series
and its boundary geometry is governed by a function of ``t_i = |z_i|^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations_with_replacement
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import brentq

MultiIndex = tuple


class DomainError(ValueError):
    """A point lies outside the domain an operation requires."""


class AmbiguousFootError(ValueError):
    """The nearest boundary point is not unique (or not locally determined)."""


class UnsupportedDomainError(ValueError):
    """The requested operation is not defined for this domain variant."""


class ContractError(ValueError):
    """An input violates a documented precondition."""


def enumerate_multiindices(n: int, N: int) -> list[MultiIndex]:
    """All exponent vectors of length ``n`` with total degree at most ``N``.

    Ordered by degree, then lexicographically descending within a degree
    (``(1, 0)`` before ``(0, 1)``).  The count is ``C(n + N, n)``.
    """
    if n < 1 or N < 0:
        raise ContractError(f"need n >= 1 and N >= 0, got n={n}, N={N}")
    out: list[MultiIndex] = []
    for k in range(N + 1):
        shell = []
        for combo in combinations_with_replacement(range(n), k):
            alpha = [0] * n
            for i in combo:
                alpha[i] += 1
            shell.append(tuple(alpha))
        out.extend(shell)
    return out


def graded_key(alpha: Sequence[int]) -> tuple:
    """Sort key reproducing the order of :func:`enumerate_multiindices`."""
    return (sum(alpha), tuple(-a for a in alpha))


def log_gamma(x: float) -> float:
    """Natural log of the Gamma function for positive real ``x``."""
    if not x > 0:
        raise DomainError(f"log_gamma needs x > 0, got {x!r}")
    return math.lgamma(x)


def as_point(z, n: int | None = None) -> np.ndarray:
    p = np.atleast_1d(np.asarray(z, dtype=complex))
    if p.ndim != 1:
        raise ContractError("a point must be a 1-d sequence of complex numbers")
    if n is not None and p.shape[0] != n:
        raise ContractError(f"point has {p.shape[0]} coordinates, domain has n={n}")
    return p


def hermitian_inner(a: np.ndarray, b: np.ndarray) -> complex:
    """<a, b> = sum a_i conj(b_i)."""
    return complex(np.sum(a * np.conj(b)))


# ---------------------------------------------------------------------------
# Polynomials in t = (|z_1|^2, ..., |z_n|^2)


@dataclass(frozen=True)
class TPolynomial:
    """Real polynomial ``sum c_e t^e`` stored as ``((e_1, ..., e_n), c)`` pairs."""

    n: int
    terms: tuple

    @classmethod
    def from_terms(cls, n: int, terms: Iterable) -> "TPolynomial":
        acc: dict[tuple, float] = {}
        for exps, coeff in terms:
            exps = tuple(int(e) for e in exps)
            if len(exps) != n or any(e < 0 for e in exps):
                raise ContractError(f"bad exponent vector {exps} for n={n}")
            acc[exps] = acc.get(exps, 0.0) + float(coeff)
        ordered = sorted(((e, c) for e, c in acc.items() if c != 0.0),
                         key=lambda ec: graded_key(ec[0]))
        return cls(n, tuple(ordered))

    def __call__(self, t) -> float:
        t = np.asarray(t, dtype=float)
        return float(sum(c * np.prod(t ** np.array(e)) for e, c in self.terms))

    def evaluate(self, t: np.ndarray) -> np.ndarray:
        """Vectorised evaluation, ``t`` of shape (..., n)."""
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape[:-1])
        for e, c in self.terms:
            out = out + c * np.prod(t ** np.array(e, dtype=float), axis=-1)
        return out

    def grad(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        g = np.zeros(self.n)
        for e, c in self.terms:
            for i in range(self.n):
                if e[i] == 0:
                    continue
                ee = list(e)
                ee[i] -= 1
                g[i] += c * e[i] * np.prod(t ** np.array(ee, dtype=float))
        return g

    def hessian(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        h = np.zeros((self.n, self.n))
        for e, c in self.terms:
            for i in range(self.n):
                for j in range(self.n):
                    ee = list(e)
                    f = ee[i]
                    ee[i] -= 1
                    if f == 0:
                        continue
                    f *= ee[j]
                    ee[j] -= 1
                    if f == 0:
                        continue
                    h[i, j] += c * f * np.prod(t ** np.array(ee, dtype=float))
        return h


# ---------------------------------------------------------------------------
# Defining functions


class DefiningFunction:
    """A real defining function with analytic Wirtinger derivatives.

    Subclasses provide ``value``, ``grad_z`` (the vector of d rho / d z_i),
    ``hess_zz`` (d^2 rho / dz_i dz_j) and ``hess_zzbar`` (d^2 rho / dz_i dzbar_j).
    """

    n: int

    def value(self, z) -> float:
        raise NotImplementedError

    def grad_z(self, z) -> np.ndarray:
        raise NotImplementedError

    def hess_zz(self, z) -> np.ndarray:
        raise NotImplementedError

    def hess_zzbar(self, z) -> np.ndarray:
        raise NotImplementedError

    def grad_zbar(self, z) -> np.ndarray:
        return np.conj(self.grad_z(z))

    def real_grad(self, z) -> np.ndarray:
        # x-part then y-part; d/dx = 2 Re d/dz, d/dy = -2 Im d/dz
        g = self.grad_z(z)
        return np.concatenate([2 * g.real, -2 * g.imag])

    def real_hessian(self, z) -> np.ndarray:
        """Hessian in (x, y) coordinates built from the Wirtinger blocks."""
        A = self.hess_zz(z)
        B = self.hess_zzbar(z)
        hxx = 2 * (A + B).real
        hyy = 2 * (B - A).real
        hxy = -2 * A.imag + 2 * B.imag
        top = np.hstack([hxx, hxy])
        bottom = np.hstack([hxy.T, hyy])
        return np.vstack([top, bottom])


class ReinhardtRho(DefiningFunction):
    """rho(z) = rho_hat(|z_1|^2, ..., |z_n|^2)."""

    def __init__(self, poly: TPolynomial):
        self.poly = poly
        self.n = poly.n

    def value(self, z) -> float:
        z = as_point(z, self.n)
        return self.poly(np.abs(z) ** 2)

    def grad_z(self, z) -> np.ndarray:
        z = as_point(z, self.n)
        return self.poly.grad(np.abs(z) ** 2) * np.conj(z)

    def hess_zz(self, z) -> np.ndarray:
        z = as_point(z, self.n)
        h = self.poly.hessian(np.abs(z) ** 2)
        zb = np.conj(z)
        return h * np.outer(zb, zb)

    def hess_zzbar(self, z) -> np.ndarray:
        z = as_point(z, self.n)
        t = np.abs(z) ** 2
        h = self.poly.hessian(t)
        return h * np.outer(np.conj(z), z) + np.diag(self.poly.grad(t))


class QuadricRho(DefiningFunction):
    """rho(z) = 2 Re z_n + |'z|^2 + c |z_n|^2; ``c = 1`` is a ball through 0."""

    def __init__(self, n: int, c: float = 1.0):
        self.n = n
        self.c = float(c)

    def value(self, z) -> float:
        z = as_point(z, self.n)
        return float(2 * z[-1].real + np.sum(np.abs(z[:-1]) ** 2) + self.c * abs(z[-1]) ** 2)

    def grad_z(self, z) -> np.ndarray:
        z = as_point(z, self.n)
        g = np.conj(z).astype(complex)
        g[-1] = 1 + self.c * np.conj(z[-1])
        return g

    def hess_zz(self, z) -> np.ndarray:
        return np.zeros((self.n, self.n), dtype=complex)

    def hess_zzbar(self, z) -> np.ndarray:
        d = np.ones(self.n, dtype=complex)
        d[-1] = self.c
        return np.diag(d)


# ---------------------------------------------------------------------------
# Domains


@dataclass(frozen=True)
class DomainSpec:
    n: int

    kind = "abstract"

    def __post_init__(self):
        if self.n < 1:
            raise ContractError(f"dimension must be positive, got {self.n}")

    # t-space description used by quadrature, gauges and boundary sampling
    def t_poly(self) -> TPolynomial:
        raise UnsupportedDomainError(f"{self.kind} has no smooth t-polynomial")

    def defining_function(self) -> DefiningFunction:
        return ReinhardtRho(self.t_poly())

    def rho(self, z) -> float:
        return self.defining_function().value(z)

    def contains(self, z) -> bool:
        return self.gauge(z) < 1.0

    def gauge(self, z) -> float:
        """Minkowski functional: the s > 0 with z / s on the boundary."""
        z = as_point(z, self.n)
        t = np.abs(z) ** 2
        if not np.any(t > 0):
            return 0.0
        poly = self.t_poly()
        f = lambda s: poly(t / (s * s))
        hi = 1.0
        while f(hi) > 0:
            hi *= 2.0
        lo = hi / 2.0
        while f(lo) < 0 and lo > 1e-300:
            lo /= 2.0
        return float(brentq(f, lo, hi, xtol=1e-15, rtol=1e-15))

    def axis_extent(self, i: int) -> float:
        """Largest t_i on the shadow with all other t_j = 0."""
        e = np.zeros(self.n)
        e[i] = 1.0
        g = self.gauge(np.sqrt(e))
        return 1.0 / g**2

    def sample_boundary(self, m: int, rng: np.random.Generator) -> np.ndarray:
        """``m`` boundary points: random direction, radially projected."""
        z = rng.normal(size=(m, self.n)) + 1j * rng.normal(size=(m, self.n))
        s = np.array([self.gauge(row) for row in z])
        return z / s[:, None]

    def to_dict(self) -> dict:
        return {"type": self.kind, "n": self.n}


@dataclass(frozen=True)
class Ball(DomainSpec):
    kind = "ball"

    def t_poly(self) -> TPolynomial:
        terms = [(tuple(int(i == j) for j in range(self.n)), 1.0) for i in range(self.n)]
        return TPolynomial.from_terms(self.n, terms + [((0,) * self.n, -1.0)])

    def gauge(self, z) -> float:
        return float(np.linalg.norm(as_point(z, self.n)))


@dataclass(frozen=True)
class Polydisc(DomainSpec):
    kind = "polydisc"

    def t_poly(self) -> TPolynomial:
        raise UnsupportedDomainError("the polydisc boundary is not smooth")

    def defining_function(self) -> DefiningFunction:
        raise UnsupportedDomainError("the polydisc boundary is not smooth")

    def rho(self, z) -> float:
        return float(np.max(np.abs(as_point(z, self.n)))) - 1.0

    def gauge(self, z) -> float:
        return float(np.max(np.abs(as_point(z, self.n))))

    def axis_extent(self, i: int) -> float:
        return 1.0


@dataclass(frozen=True)
class DiagonalBall(DomainSpec):
    """{sum a_i |z_i|^2 < 1}."""

    scales: tuple = ()
    kind = "diagonal_ball"

    def __post_init__(self):
        super().__post_init__()
        object.__setattr__(self, "scales", tuple(float(a) for a in self.scales))
        if len(self.scales) != self.n or any(not a > 0 for a in self.scales):
            raise ContractError(f"need {self.n} positive scales, got {self.scales}")

    def t_poly(self) -> TPolynomial:
        terms = [(tuple(int(i == j) for j in range(self.n)), a) for i, a in enumerate(self.scales)]
        return TPolynomial.from_terms(self.n, terms + [((0,) * self.n, -1.0)])

    def gauge(self, z) -> float:
        z = as_point(z, self.n)
        return float(np.sqrt(np.sum(np.array(self.scales) * np.abs(z) ** 2)))

    def to_dict(self) -> dict:
        return {"type": self.kind, "n": self.n, "scales": list(self.scales)}


@dataclass(frozen=True)
class SmoothReinhardt(DomainSpec):
    """{rho_hat(|z_1|^2, ..., |z_n|^2) < 0} for a real polynomial rho_hat.

    rho_hat must be increasing in every t_i on the closed shadow so that the
    shadow is a down-set; the constructor checks this and the other
    well-posedness conditions on a sample.
    """

    rho_coeffs: tuple = ()
    kind = "smooth_reinhardt"

    def __post_init__(self):
        super().__post_init__()
        poly = TPolynomial.from_terms(self.n, self.rho_coeffs)
        object.__setattr__(self, "rho_coeffs", poly.terms)
        self._validate(poly)

    def t_poly(self) -> TPolynomial:
        return TPolynomial(self.n, self.rho_coeffs)

    def _validate(self, poly: TPolynomial) -> None:
        if not poly(np.zeros(self.n)) < 0:
            raise ContractError("rho_hat(0) must be negative")
        for i in range(self.n):
            e = np.zeros(self.n)
            e[i] = 1.0
            s = 1.0
            while poly(s * e) < 0:
                s *= 2.0
                if s > 1e12:
                    raise ContractError("rho_hat does not define a bounded domain")
        rng = np.random.default_rng(0)
        for z in self.sample_boundary(64, rng):
            t = np.abs(z) ** 2
            g = poly.grad(t)
            if np.any(g < -1e-12) or not np.any(g > 0):
                raise UnsupportedDomainError(
                    "rho_hat must be increasing in each |z_i|^2 on the boundary")
            if np.linalg.norm(g * np.conj(z)) < 1e-10:
                raise ContractError("defining function gradient vanishes on the boundary")

    def to_dict(self) -> dict:
        return {"type": self.kind, "n": self.n,
                "rho_coeffs": [{"exponents": list(e), "coeff": c} for e, c in self.rho_coeffs]}


def domain_from_dict(doc: dict) -> DomainSpec:
    """Inverse of ``DomainSpec.to_dict``; unknown fields are rejected."""
    allowed = {"ball": {"type", "n"}, "polydisc": {"type", "n"},
               "diagonal_ball": {"type", "n", "scales"},
               "smooth_reinhardt": {"type", "n", "rho_coeffs"}}
    kind = doc.get("type")
    if kind not in allowed:
        raise ContractError(f"domain.type: unknown domain type {kind!r}")
    extra = set(doc) - allowed[kind]
    if extra:
        raise ContractError(f"domain: unknown fields {sorted(extra)}")
    n = int(doc["n"])
    if kind == "ball":
        return Ball(n)
    if kind == "polydisc":
        return Polydisc(n)
    if kind == "diagonal_ball":
        return DiagonalBall(n, tuple(doc["scales"]))
    terms = [(c["exponents"], c["coeff"]) for c in doc["rho_coeffs"]]
    return SmoothReinhardt(n, tuple((tuple(e), float(c)) for e, c in terms))


# ---------------------------------------------------------------------------
# Boundary geometry


@dataclass(frozen=True)
class BoundaryFrame:
    p: np.ndarray
    foot: np.ndarray
    delta: float
    normal: np.ndarray  # outward unit vector grad_zbar(rho) / |grad_zbar(rho)|

    def of_vector(self, v) -> tuple[np.ndarray, np.ndarray]:
        """Split ``v`` into (tangential, normal) parts at the foot point."""
        v = as_point(v, self.p.shape[0])
        vn = hermitian_inner(v, self.normal) * self.normal
        return v - vn, vn


def _require_smooth(D: DomainSpec) -> None:
    if isinstance(D, Polydisc):
        raise UnsupportedDomainError("boundary geometry is not defined for the polydisc")


def boundary_frame(D: DomainSpec, p, tol: float = 1e-12, max_iter: int = 100) -> BoundaryFrame:
    """Nearest boundary point, distance and outward normal for interior ``p``."""
    _require_smooth(D)
    p = as_point(p, D.n)
    if not D.contains(p):
        raise DomainError(f"{p} is not inside the domain")
    rho = D.defining_function()
    if isinstance(D, Ball):
        r = np.linalg.norm(p)
        if r == 0:
            raise AmbiguousFootError("every boundary point of the ball is nearest to 0")
        foot = p / r
        return BoundaryFrame(p, foot, float(1 - r), foot.copy())

    n = D.n
    x0 = np.concatenate([p.real, p.imag])
    s = D.gauge(p)
    if s == 0:
        raise AmbiguousFootError("the centre has no locally unique nearest boundary point")
    zf = p / s
    x = np.concatenate([zf.real, zf.imag])
    gr = rho.real_grad(zf)
    mu = float(-np.dot(x - x0, gr) / np.dot(gr, gr))
    to_c = lambda xx: xx[:n] + 1j * xx[n:]
    for _ in range(max_iter):
        z = to_c(x)
        gr = rho.real_grad(z)
        H = rho.real_hessian(z)
        F = np.concatenate([x - x0 + mu * gr, [rho.value(z)]])
        J = np.zeros((2 * n + 1, 2 * n + 1))
        J[:2 * n, :2 * n] = np.eye(2 * n) + mu * H
        J[:2 * n, 2 * n] = gr
        J[2 * n, :2 * n] = gr
        step = np.linalg.solve(J, -F)
        x = x + step[:2 * n]
        mu = mu + step[2 * n]
        if np.linalg.norm(step) < tol:
            break
    else:
        raise AmbiguousFootError("nearest-point iteration did not converge")
    z = to_c(x)
    gr = rho.real_grad(z)
    # second-order check: the foot must be a strict local minimiser of |z - p|
    H = np.eye(2 * n) + mu * rho.real_hessian(z)
    Q, _ = np.linalg.qr(np.column_stack([gr, np.eye(2 * n)]))
    T = Q[:, 1:]
    if np.min(np.linalg.eigvalsh(T.T @ H @ T)) <= 1e-9:
        raise AmbiguousFootError("p is outside the tubular neighbourhood of the boundary")
    nu = rho.grad_zbar(z)
    nu = nu / np.linalg.norm(nu)
    return BoundaryFrame(p, z, float(np.linalg.norm(p - z)), nu)


def levi_form(D, q, w, tol: float = 1e-9) -> float:
    """Complex Hessian of the canonical defining function applied to a
    complex-tangential vector at a boundary point."""
    rho = D if isinstance(D, DefiningFunction) else (_require_smooth(D) or D.defining_function())
    q = as_point(q, rho.n)
    w = as_point(w, rho.n)
    if abs(rho.value(q)) > 1e-8:
        raise ContractError(f"q is not on the boundary (rho(q) = {rho.value(q):.3g})")
    g = rho.grad_z(q)
    if abs(np.sum(g * w)) > tol * np.linalg.norm(g) * max(np.linalg.norm(w), 1.0):
        raise ContractError("w is not complex-tangential at q")
    return float(np.real(w @ rho.hess_zzbar(q) @ np.conj(w)))
