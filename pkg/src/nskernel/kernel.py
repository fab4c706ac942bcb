"""Weighted Bergman kernels of order d on Reinhardt model domains.

Two kinds of kernel object share one interface (``n``, ``d``, ``domain``,
``value``, ``log_series``, ``series``):

* :class:`ClosedKernel` -- exact formulas ``C * prod(l_k(z, wbar))^(-s_k)``
  with bilinear factors ``l_k``; covers the ball, polydisc, diagonal ball and
  the Siegel domain {2 Re z_n + |'z|^2 < 0}.
* :class:`KernelModel` -- truncated monomial series
  ``sum_{|alpha| <= N} z^alpha conj(w)^alpha / gamma_alpha`` with a recorded
  truncation certificate.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import (Ball, ContractError, DiagonalBall, DomainError, DomainSpec, Polydisc,
                   SmoothReinhardt, UnsupportedDomainError, as_point, domain_from_dict,
                   enumerate_multiindices, log_gamma)
from .quadrature import QuadratureError, adaptive_cube, integrate_domain
from .series import BiSeries, monomials

MAX_DIM = 3
MAX_DEGREE = 60


class UncertifiedWarning(UserWarning):
    """A series kernel was evaluated outside its certified polyradius."""


class BuildError(RuntimeError):
    """Moment quadrature failed; ``cell`` is the worst cell of the last attempt."""

    def __init__(self, message, cell=None):
        super().__init__(message)
        self.cell = cell


def ball_constant(n: int, d: int) -> float:
    """c = Gamma((d+1)(n+1)) / (n! Gamma(d(n+1)+1)), with K_{B,d} = c K_B^{d+1}."""
    return math.exp(log_gamma((d + 1) * (n + 1)) - log_gamma(n + 1) - log_gamma(d * (n + 1) + 1))


def log_ball_moment(n: int, d: int, alpha) -> float:
    if n < 1 or d < 0:
        raise ContractError(f"need n >= 1, d >= 0, got n={n}, d={d}")
    a = [int(x) for x in alpha]
    return ((d + 1) * n * math.log(math.pi) - d * log_gamma(n + 1)
            + log_gamma(d * (n + 1) + 1) + sum(log_gamma(x + 1) for x in a)
            - log_gamma((d + 1) * (n + 1) + sum(a)))


def ball_moment(n: int, d: int, alpha) -> float:
    """Squared A^2_d norm of z^alpha on the unit ball."""
    return math.exp(log_ball_moment(n, d, alpha))


# ---------------------------------------------------------------------------
# Closed forms


@dataclass(frozen=True)
class BilinearFactor:
    """l(z, wbar) = a0 + b.z + c.wbar + z^T M wbar, raised to the power -s."""

    a0: complex
    b: np.ndarray
    c: np.ndarray
    M: np.ndarray
    s: float

    def value(self, z, w) -> complex:
        wb = np.conj(w)
        return complex(self.a0 + self.b @ z + self.c @ wb + z @ self.M @ wb)

    def series(self, p: np.ndarray, q: int = 2) -> BiSeries:
        n = p.shape[0]
        out = BiSeries.zero(n, q)
        pb = np.conj(p)
        out.c[0, 0] = self.value(p, p)
        lin_h = self.b + self.M @ pb
        lin_k = self.c + self.M.T @ p
        e = lambda i: tuple(int(i == j) for j in range(n))
        for i in range(n):
            out.c[out.idx(e(i)), 0] = lin_h[i]
            out.c[0, out.idx(e(i))] = lin_k[i]
            for j in range(n):
                out.c[out.idx(e(i)), out.idx(e(j))] = self.M[i, j]
        return out


class ClosedKernel:
    """Exact kernel ``const * prod_k l_k(z, wbar)^(-s_k)``."""

    def __init__(self, domain, d: int, const: float, factors: list[BilinearFactor], name: str = ""):
        self.domain = domain
        self.n = factors[0].b.shape[0]
        self.d = d
        self.const = const
        self.factors = factors
        self.name = name or getattr(domain, "kind", "closed")
        self.tail_bound = 0.0

    def _check(self, z):
        if self.domain is not None and hasattr(self.domain, "contains") and not self.domain.contains(z):
            raise DomainError(f"{z} is outside the {self.name} domain")

    def value(self, z, w=None) -> complex:
        z = as_point(z, self.n)
        w = z if w is None else as_point(w, self.n)
        self._check(z)
        self._check(w)
        out = complex(self.const)
        for f in self.factors:
            out *= f.value(z, w) ** (-f.s)
        return out

    def diag(self, z) -> float:
        return float(self.value(z).real)

    def log_series(self, p, q: int = 2) -> BiSeries:
        """Taylor series of log K(p + h, p + k) in (h, kbar)."""
        p = as_point(p, self.n)
        self._check(p)
        out = BiSeries.constant(self.n, complex(math.log(self.const)), q)
        for f in self.factors:
            out = out + (-f.s) * f.series(p, q).log()
        return out

    def series(self, p, q: int = 2) -> BiSeries:
        p = as_point(p, self.n)
        self._check(p)
        out = BiSeries.constant(self.n, complex(self.const), q)
        for f in self.factors:
            out = out * f.series(p, q).pow(-f.s)
        return out


def _unit_factor(n: int, weights, s: float) -> BilinearFactor:
    return BilinearFactor(1.0, np.zeros(n, complex), np.zeros(n, complex),
                          -np.diag(np.asarray(weights, dtype=complex)), s)


def closed_kernel(D: DomainSpec, d: int) -> ClosedKernel:
    """Exact weighted kernel of order d for Ball, Polydisc or DiagonalBall."""
    n = D.n
    if isinstance(D, Ball):
        C = ball_constant(n, d) * (math.factorial(n) / math.pi**n) ** (d + 1)
        return ClosedKernel(D, d, C, [_unit_factor(n, np.ones(n), (d + 1) * (n + 1))])
    if isinstance(D, DiagonalBall):
        a = np.array(D.scales)
        C = float(np.prod(a)) ** (d + 1) * ball_constant(n, d) * (math.factorial(n) / math.pi**n) ** (d + 1)
        return ClosedKernel(D, d, C, [_unit_factor(n, a, (d + 1) * (n + 1))])
    if isinstance(D, Polydisc):
        C = (2 * d + 1) ** n / math.pi ** (n * (d + 1))
        factors = []
        for i in range(n):
            wts = np.zeros(n)
            wts[i] = 1.0
            factors.append(_unit_factor(n, wts, 2 * (d + 1)))
        return ClosedKernel(D, d, C, factors)
    raise UnsupportedDomainError(f"no closed form for {D.kind}")


def closed_kernel_value(D: DomainSpec, d: int, z, w) -> complex:
    return closed_kernel(D, d).value(z, w)


# ---------------------------------------------------------------------------
# Series models


def _neumaier(chunks: list[np.ndarray]) -> np.ndarray:
    """Compensated sum of a list of equally shaped arrays."""
    s = np.zeros_like(chunks[0])
    comp = np.zeros_like(chunks[0])
    for x in chunks:
        t = s + x
        big = np.abs(s) >= np.abs(x)
        comp = comp + np.where(big, (s - t) + x, (x - t) + s)
        s = t
    return s + comp


def _csum_shells(terms: np.ndarray, degrees: np.ndarray, N: int) -> np.ndarray:
    """Sum ``terms`` along the last axis: pairwise within each degree shell,
    compensated across shells (fixed order, so results are reproducible)."""
    chunks = []
    for k in range(N + 1):
        sel = degrees == k
        if np.any(sel):
            part = terms[..., sel]
            chunks.append(np.sum(part.real, axis=-1) + 1j * np.sum(part.imag, axis=-1))
    re = _neumaier([c.real for c in chunks])
    im = _neumaier([c.imag for c in chunks])
    return re + 1j * im


@dataclass
class KernelModel:
    """Truncated series surrogate of K_{D,d}.

    ``log_gammas[i]`` is log of the squared norm of ``z**alphas[i]``.  The
    certificate: for max_i |z_i|, max_i |w_i| <= ``r_eval`` the dropped tail
    is at most ``tail_bound`` (geometric majorant of the last two shells,
    plus the propagated weight error for quadrature-built weighted models).
    """

    domain: DomainSpec
    d: int
    N: int
    alphas: np.ndarray
    log_gammas: np.ndarray
    tol: float = 1e-12
    r_eval: float = 0.0
    tail_bound: float = 0.0
    weight_error: float = 0.0
    base_model: Optional["KernelModel"] = field(default=None, repr=False)

    def __post_init__(self):
        self.alphas = np.asarray(self.alphas, dtype=int).reshape(-1, self.domain.n)
        self.log_gammas = np.asarray(self.log_gammas, dtype=float)
        self.degrees = self.alphas.sum(axis=1)

    @property
    def n(self) -> int:
        return self.domain.n

    @property
    def moments(self) -> dict:
        return {tuple(int(x) for x in a): math.exp(g) for a, g in zip(self.alphas, self.log_gammas)}

    def truncated(self, N: int) -> "KernelModel":
        sel = self.degrees <= N
        m = KernelModel(self.domain, self.d, N, self.alphas[sel], self.log_gammas[sel],
                        tol=self.tol, weight_error=self.weight_error, base_model=self.base_model)
        m.certify(self.r_eval)
        return m

    # -- certification ---------------------------------------------------
    def shell_sums(self, r: float) -> np.ndarray:
        if r <= 0:
            out = np.zeros(self.N + 1)
            out[0] = math.exp(-self.log_gammas[self.degrees == 0][0])
            return out
        logt = 2 * self.degrees * math.log(r) - self.log_gammas
        return np.array([np.sum(np.exp(logt[self.degrees == k])) for k in range(self.N + 1)])

    def tail_estimate(self, r: float) -> float:
        if r <= 0:
            return 0.0
        if self.N < 1:
            return math.inf
        S = self.shell_sums(r)
        q = S[-1] / S[-2]
        if not q < 1:
            return math.inf
        return float(S[-1] * q / (1 - q))

    def certify(self, r_eval: Optional[float] = None) -> "KernelModel":
        """Record the certificate at ``r_eval``; if omitted, pick the largest
        polyradius whose relative tail estimate is below ``tol``."""
        if r_eval is None:
            lo, hi = 0.0, _polyradius(self.domain)
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                t = self.tail_estimate(mid)
                if t <= self.tol * np.sum(self.shell_sums(mid)):
                    lo = mid
                else:
                    hi = mid
            r_eval = lo
        self.r_eval = float(r_eval)
        weight_part = self.weight_error * float(np.sum(self.shell_sums(self.r_eval)))
        self.tail_bound = self.tail_estimate(self.r_eval) + weight_part
        return self

    def is_certified(self, *points) -> bool:
        return all(np.max(np.abs(p)) <= self.r_eval * (1 + 1e-12) for p in points)

    def _warn(self, *points):
        if not self.is_certified(*points):
            warnings.warn(f"evaluation outside certified polyradius {self.r_eval:.4g}",
                          UncertifiedWarning, stacklevel=3)

    # -- evaluation ------------------------------------------------------
    def _log_terms(self, z, shift=None):
        """log|z^(alpha - A)| and arg for every alpha (row) and optional shift."""
        az = np.abs(z)
        with np.errstate(divide="ignore"):
            la = np.log(az)
        ph = np.angle(z)
        e = self.alphas if shift is None else self.alphas[None, :, :] - shift[:, None, :]
        with np.errstate(invalid="ignore"):
            safe = np.where(e == 0, 0.0, e * la).sum(axis=-1)
        return safe, (e * ph).sum(axis=-1), e

    def value(self, z, w=None) -> complex:
        z = as_point(z, self.n)
        w = z if w is None else as_point(w, self.n)
        self._warn(z, w)
        lz, pz, _ = self._log_terms(z)
        lw, pw, _ = self._log_terms(w)
        terms = np.exp(lz + lw - self.log_gammas) * np.exp(1j * (pz - pw))
        return complex(_csum_shells(terms, self.degrees, self.N))

    def diag(self, z) -> float:
        return float(self.value(z).real)

    def jet_matrix(self, p, q: int = 2) -> np.ndarray:
        """Matrix of d^A_z d^B_wbar K(p, p) over the monomials A, B of degree <= q."""
        p = as_point(p, self.n)
        self._warn(p)
        mons = np.array(monomials(self.n, q))
        lp, pp, e = self._log_terms(p, mons)  # (m, Nalpha)
        # falling factorials alpha!/(alpha-A)!, zero when alpha_i < A_i
        ff = np.ones(e.shape[:2])
        lff = np.zeros(e.shape[:2])
        for i in range(self.n):
            a = self.alphas[None, :, i]
            A = mons[:, None, i]
            ok = a >= A
            ff = ff * ok
            lff = lff + np.where(ok, _lgamma_arr(a + 1) - _lgamma_arr(np.maximum(a - A, 0) + 1), 0.0)
        with np.errstate(invalid="ignore"):
            mag = np.where(ff > 0, lp + lff, -np.inf)
        V = np.exp(mag - 0.5 * self.log_gammas[None, :]) * np.exp(1j * pp)
        terms = V[:, None, :] * np.conj(V[None, :, :])
        return _csum_shells(terms, self.degrees, self.N)

    def jet_tail(self, p, q: int = 2) -> float:
        """Relative tail estimate of the q-jet at ``p`` alone.

        Shell k carries ``sum_{|alpha| = k} max_A |d^A e_alpha(p)|^2``; the
        dropped shells are bounded by the geometric majorant of the last two.
        Sharper than the polyradius certificate for points near one axis.
        """
        p = as_point(p, self.n)
        rows = np.abs(self.functional_rows(p, monomials(self.n, q))) ** 2
        mags = rows.max(axis=0)
        S = np.array([np.sum(mags[self.degrees == k]) for k in range(self.N + 1)])
        if self.N < 1 or S[-2] == 0:
            return math.inf
        r = S[-1] / S[-2]
        if not r < 1:
            return math.inf
        return float(S[-1] * r / (1 - r) / np.sum(S))

    def series(self, p, q: int = 2) -> BiSeries:
        return BiSeries.from_derivatives(self.n, self.jet_matrix(p, q), q)

    def log_series(self, p, q: int = 2) -> BiSeries:
        return self.series(p, q).log()

    # -- basis functionals used by the extremal problems ---------------------
    def functional_rows(self, p, derivs) -> np.ndarray:
        """Rows d^A e_alpha(p) for the orthonormal basis e_alpha = z^alpha / sqrt(gamma)."""
        p = as_point(p, self.n)
        mons = np.array([tuple(a) for a in derivs], dtype=int).reshape(-1, self.n)
        lp, pp, e = self._log_terms(p, mons)
        ok = np.all(e >= 0, axis=-1)
        lff = np.zeros(e.shape[:2])
        for i in range(self.n):
            a = self.alphas[None, :, i]
            lff = lff + _lgamma_arr(a + 1) - _lgamma_arr(np.maximum(a - mons[:, None, i], 0) + 1)
        with np.errstate(invalid="ignore"):
            mag = np.where(ok, lp + lff - 0.5 * self.log_gammas[None, :], -np.inf)
        return np.exp(mag) * np.exp(1j * pp)


def _lgamma_arr(x: np.ndarray) -> np.ndarray:
    from scipy.special import gammaln
    return gammaln(x)


def _polyradius(D: DomainSpec) -> float:
    """Largest r with (r, ..., r) in the closure of D."""
    return 1.0 / D.gauge(np.ones(D.n))


def kernel_eval(M, z, w) -> complex:
    """K(z, w) from a series model or a closed kernel."""
    return M.value(z, w)


@dataclass(frozen=True)
class KernelJet:
    """Mixed derivatives d^A_z d^B_wbar K at (z, z) for |A|, |B| <= 2."""

    z: np.ndarray
    values: dict

    def __getitem__(self, key):
        return self.values[key]


def kernel_jet(M, z, q: int = 2) -> KernelJet:
    z = as_point(z, M.n)
    S = M.series(z, q)
    D = S.derivatives()
    mons = monomials(M.n, q)
    vals = {(A, B): complex(D[i, j]) for i, A in enumerate(mons) for j, B in enumerate(mons)}
    return KernelJet(z, vals)


# ---------------------------------------------------------------------------
# Model construction


def _check_guardrails(n: int, N: int):
    if n > MAX_DIM or N > MAX_DEGREE:
        raise ContractError(f"guardrail: n <= {MAX_DIM} and N <= {MAX_DEGREE} (got n={n}, N={N})")


def build_model(D: DomainSpec, d: int, N: int, tol: float = 1e-12, r_eval: Optional[float] = None,
                base_model: Optional[KernelModel] = None, quad_order: int = 16) -> KernelModel:
    """Moment table for |alpha| <= N and its truncation certificate."""
    if d < 0:
        raise ContractError("order d must be non-negative")
    _check_guardrails(D.n, N)
    alphas = np.array(enumerate_multiindices(D.n, N), dtype=int)
    n = D.n
    weight_error = 0.0
    if isinstance(D, Ball):
        lg = np.array([log_ball_moment(n, d, a) for a in alphas])
    elif isinstance(D, DiagonalBall):
        la = np.log(np.array(D.scales))
        lg = np.array([log_ball_moment(n, d, a) - (d + 1) * la.sum() - a @ la for a in alphas])
    elif isinstance(D, Polydisc):
        lg = np.array([sum(log_ball_moment(1, d, (x,)) for x in a) for a in alphas])
    elif isinstance(D, SmoothReinhardt):
        if d >= 1 and base_model is None:
            base_model = build_model(D, 0, N + 10, tol=tol, r_eval=0.0, quad_order=quad_order)
        if base_model is not None and base_model.N < N:
            raise ContractError("base model must have truncation >= N")
        lg, weight_error = _quadrature_moments(D, d, alphas, tol, base_model, quad_order)
    else:
        raise UnsupportedDomainError(f"cannot build a kernel model for {type(D).__name__}")
    model = KernelModel(D, d, N, alphas, lg, tol=tol, weight_error=weight_error,
                        base_model=base_model)
    return model.certify(r_eval)


def _shadow_map(D: DomainSpec, S: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Map the unit cube onto the shadow {t >= 0 : rho_hat(t) < 0}.

    t_k = s_k * T_k(t_1, ..., t_{k-1}) where T_k is the root of
    rho_hat(t_1, ..., t_{k-1}, T, 0, ...) = 0; returns t and the Jacobian.
    """
    poly = D.t_poly()
    P, n = S.shape
    t = np.zeros((P, n))
    jac = np.ones(P)
    for k in range(n):
        lo = np.zeros(P)
        hi = np.full(P, D.axis_extent(k) * (1 + 1e-12))
        for _ in range(70):
            mid = 0.5 * (lo + hi)
            trial = t.copy()
            trial[:, k] = mid
            neg = poly.evaluate(trial) < 0
            lo = np.where(neg, mid, lo)
            hi = np.where(neg, hi, mid)
        Tk = 0.5 * (lo + hi)
        t[:, k] = S[:, k] * Tk
        jac = jac * Tk
    return t, jac


def _quadrature_moments(D, d, alphas, tol, base_model, quad_order):
    n = D.n
    pi_n = math.pi**n
    base_sets = []
    if d >= 1:
        base_sets = [base_model, base_model.truncated(base_model.N - 2)]

    def weight(t, model):
        # K_{D,0}(z) depends only on t = |z|^2: sum t^alpha / gamma_alpha
        with np.errstate(divide="ignore", invalid="ignore"):
            lt = np.log(t)
        a = model.alphas
        with np.errstate(invalid="ignore"):
            logs = np.where(a[None, :, :] == 0, 0.0, a[None, :, :] * lt[:, None, :]).sum(-1)
        K0 = np.sum(np.exp(logs - model.log_gammas[None, :]), axis=1)
        return K0 ** (-d)

    def integrand(S):
        t, jac = _shadow_map(D, S)
        with np.errstate(divide="ignore", invalid="ignore"):
            lt = np.log(t)
            logs = np.where(alphas[None, :, :] == 0, 0.0, alphas[None, :, :] * lt[:, None, :]).sum(-1)
        mono = np.exp(logs) * jac[:, None]
        if d == 0:
            return mono
        return np.concatenate([mono * weight(t, m)[:, None] for m in base_sets], axis=1)

    try:
        res = adaptive_cube(integrand, n, rtol=tol / 10, order=quad_order)
    except QuadratureError as exc:
        raise BuildError(f"moment quadrature failed: {exc}", cell=exc.cell) from exc
    vals = res.value * pi_n
    K = len(alphas)
    gam = vals[:K]
    if np.any(gam <= 0):
        raise BuildError("non-positive moment from quadrature")
    weight_error = 0.0
    if d >= 1:
        alt = vals[K:]
        weight_error = float(np.max(np.abs(gam - alt) / gam))
    return np.log(gam), weight_error


# ---------------------------------------------------------------------------
# Selberg constant


def bergman_kernel(D: DomainSpec) -> ClosedKernel:
    return closed_kernel(D, 0)


def selberg_constant(D: DomainSpec, s: int, w, rtol: float = 1e-10) -> float:
    """c(s) from 1/c(s) = int |K(z,w)|^{2s} / (K(z) K(w))^s K(z) dV(z)."""
    if not isinstance(D, (Ball, Polydisc)):
        raise UnsupportedDomainError("the Selberg constant needs a homogeneous domain")
    if s < 1:
        raise ContractError("s must be a positive integer")
    K = bergman_kernel(D)
    w = as_point(w, D.n)
    if not D.contains(w):
        raise DomainError("w must be interior")
    Kw = K.diag(w)
    inv = integrate_domain(D, _vectorised_closed(K, w, s, Kw), rtol=rtol)
    return 1.0 / inv.real


def _vectorised_closed(K: ClosedKernel, w, s, Kw):
    def f(Z):
        wb = np.conj(w)
        logkzw = np.full(Z.shape[0], math.log(K.const), dtype=complex)
        logkz = np.full(Z.shape[0], math.log(K.const), dtype=complex)
        for fac in K.factors:
            lzw = fac.a0 + Z @ fac.b + fac.c @ wb + np.einsum("pi,ij,j->p", Z, fac.M, wb)
            lzz = fac.a0 + Z @ fac.b + np.conj(Z) @ fac.c + np.einsum("pi,ij,pj->p", Z, fac.M, np.conj(Z))
            logkzw += -fac.s * np.log(lzw)
            logkz += -fac.s * np.log(lzz)
        kz = np.exp(logkz.real)
        return np.exp(2 * s * logkzw.real) / (kz * Kw) ** s * kz
    return f


# ---------------------------------------------------------------------------
# Persistence

FORMAT_TAG = "nskernel-model v1"


def save_model(model: KernelModel, path) -> None:
    header = {"type": model.domain.kind, "n": model.n, "d": model.d, "N": model.N,
              "tol": model.tol, "tail_bound": model.tail_bound, "r_eval": model.r_eval,
              "weight_error": model.weight_error, "domain": model.domain.to_dict()}
    lines = [f"# {FORMAT_TAG}", json.dumps(header, sort_keys=True)]
    for a, g in zip(model.alphas, model.log_gammas):
        lines.append(" ".join(str(int(x)) for x in a) + " " + repr(float(g)))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path) -> KernelModel:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != f"# {FORMAT_TAG}":
        raise ContractError(f"{path}: not a {FORMAT_TAG} file")
    header = json.loads(lines[1])
    D = domain_from_dict(header["domain"])
    rows = [ln.split() for ln in lines[2:] if ln.strip()]
    alphas = np.array([[int(x) for x in r[:-1]] for r in rows], dtype=int).reshape(-1, D.n)
    lg = np.array([float(r[-1]) for r in rows])
    model = KernelModel(D, int(header["d"]), int(header["N"]), alphas, lg,
                        tol=float(header["tol"]), weight_error=float(header.get("weight_error", 0.0)))
    model.r_eval = float(header["r_eval"])
    model.tail_bound = float(header["tail_bound"])
    return model
