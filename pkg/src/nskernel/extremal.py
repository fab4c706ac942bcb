"""Minimum integrals of the weighted Bergman space.

Every constraint is a linear combination of the point functionals
``l_A(f) = d^A f(p)`` with |A| <= 2.  In the orthonormal basis
``e_alpha = z^alpha / sqrt(gamma_alpha)`` a function is a coefficient vector
``a`` with ``||f||^2 = |a|^2``, and the Gram matrix of the functionals is the
kernel jet ``<l_A, l_B> = d^A_z d^B_wbar K(p, p)``.  Hence

* linear kinds (I0, I1, I2, LAMBDA_k): value ``b^H (C C^H)^{-1} b``;
* kinds I and M: f(p) = 0, f'(p) = 0 and ``u^H Q u = 1`` with ``u = f''(p) v``;
  H is the Gram matrix of the u-functionals projected onto
  {f(p) = 0, f'(p) = 0}, Q = G^{-1} for I and K^{n-1} adj(G) for M
  (``v^t f'' conj(Q) conj(f'') conj(v) = u^H Q u`` for Hermitian Q), and the
  value is ``1 / tr(Q H)`` or ``1 / mu_max(Q H)`` depending on the reading.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import eigh

from .core import ContractError, as_point
from .kernel import KernelModel
from .metric import (holomorphic_sectional, metric_tensor, quadratic, ricci_from_point)
from .series import monomials

TAGS = ("I0", "I1", "I2", "LAMBDA", "I", "M")

#: Normalisations for the kinds I and M.  With u_i = (f'' v)_i and H the Gram
#: matrix of the u-functionals on {f(p) = 0, f'(p) = 0}:
#:
#: * ``"trace"`` -- least norm over tuples (f_1, ..., f_n) with
#:   sum_k ||f_k||^2 minimal subject to sum_k (Q^{1/2} f_k'' v)_k = 1; the value
#:   is 1 / tr(Q H).  This is the reading under which the Ricci identity
#:   Ric = (n+1) - 1 / (K tau^2 I) holds; for n = 1 it equals the sphere reading.
#: * ``"sphere"`` -- a single f with u^H Q u = 1; the value is 1 / mu_max(Q H).
READINGS = ("trace", "sphere")


class InfeasibleError(ArithmeticError):
    """The constraints cannot be met in the truncated space."""


@dataclass(frozen=True)
class MinIntegralKind:
    tag: str
    k: Optional[int] = None

    def __post_init__(self):
        if self.tag not in TAGS:
            raise ContractError(f"unknown minimum integral {self.tag!r}")
        if (self.tag == "LAMBDA") != (self.k is not None):
            raise ContractError("LAMBDA needs an index k, other kinds take none")
        if self.k is not None and self.k < 1:
            raise ContractError("LAMBDA index must be >= 1")

    @classmethod
    def parse(cls, text: str) -> "MinIntegralKind":
        if text.upper().startswith("LAMBDA"):
            return cls("LAMBDA", int(text.split("_")[-1]))
        return cls(text.upper())

    def __str__(self):
        return f"LAMBDA_{self.k}" if self.tag == "LAMBDA" else self.tag


@dataclass
class MinIntegralResult:
    kind: MinIntegralKind
    value: float
    minimizer: Optional[np.ndarray] = None
    alphas: Optional[np.ndarray] = None
    residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def norm_from_minimizer(self, model: KernelModel) -> float:
        """sum |c_alpha|^2 gamma_alpha (summed over components for tuple minimizers)."""
        return float(np.sum(np.abs(self.minimizer) ** 2 * np.exp(model.log_gammas)))


def _functionals(n: int, v: np.ndarray):
    """Coefficient vectors over monomials(n, 2) for l_0, l_{e_i}, v.f', v^T f'' v and (f'' v)_i."""
    mons = monomials(n, 2)
    idx = {m: i for i, m in enumerate(mons)}
    m = len(mons)

    def unit(*js):
        e = [0] * n
        for j in js:
            e[j] += 1
        return idx[tuple(e)]

    ell0 = np.zeros(m, complex)
    ell0[0] = 1
    grad = np.zeros((n, m), complex)
    for i in range(n):
        grad[i, unit(i)] = 1
    dv = v @ grad
    hv = np.zeros((n, m), complex)  # (f'' v)_i
    for i in range(n):
        for j in range(n):
            hv[i, unit(i, j)] += v[j]
    vhv = v @ hv
    return ell0, grad, dv, hv, vhv


def _jet(M, p) -> np.ndarray:
    mons = monomials(M.n, 2)
    if isinstance(M, KernelModel):
        R = M.functional_rows(p, mons)
        return R @ R.conj().T
    return M.series(p, 2).derivatives()


def _constraint_matrix(kind: MinIntegralKind, n: int, v):
    ell0, grad, dv, hv, vhv = _functionals(n, v)
    if kind.tag == "I0":
        return np.array([ell0]), np.array([1.0])
    if kind.tag == "I1":
        return np.array([ell0, dv]), np.array([0.0, 1.0])
    if kind.tag == "I2":
        # the full gradient vanishes; f'(p)v = 0 alone breaks the curvature identity off symmetric domains
        C = np.vstack([ell0[None, :], grad, vhv[None, :]])
        b = np.zeros(n + 2)
        b[-1] = 1.0
        return C, b
    if kind.tag == "LAMBDA":
        if kind.k > n:
            raise ContractError(f"LAMBDA index {kind.k} exceeds dimension {n}")
        C = np.vstack([ell0[None, :], grad[: kind.k]])
        b = np.zeros(kind.k + 1)
        b[-1] = 1.0
        return C, b
    raise AssertionError(kind)


def minimum_integral(M, kind, p, v=None, metric=None, reading: str = "trace") -> MinIntegralResult:
    """Solve one minimum integral at p for direction v.

    ``M`` is a series :class:`KernelModel` (value and minimizer) or a closed
    kernel (value only).  ``reading`` selects the normalisation used for the
    kinds I and M (see :data:`READINGS`).
    """
    if isinstance(kind, str):
        kind = MinIntegralKind.parse(kind)
    n = M.n
    p = as_point(p, n)
    v = np.zeros(n, complex) if v is None else as_point(v, n)
    if kind.tag in ("I1", "I2", "I", "M") and not np.any(v):
        raise ContractError("v must be nonzero")
    if isinstance(M, KernelModel) and M.N < 2 and kind.tag not in ("I0",):
        raise InfeasibleError("truncation N >= 2 is needed for derivative constraints")
    J = _jet(M, p)
    rows = M.functional_rows(p, monomials(n, 2)) if isinstance(M, KernelModel) else None
    if kind.tag in ("I", "M"):
        return _quadratic_kind(M, kind, p, v, J, rows, metric, reading)
    C, b = _constraint_matrix(kind, n, v)
    gram = C @ J @ C.conj().T
    gram = 0.5 * (gram + gram.conj().T)
    try:
        y = np.linalg.solve(gram, b.astype(complex))
    except np.linalg.LinAlgError as exc:
        raise InfeasibleError(f"singular constraint Gram matrix for {kind}") from exc
    if np.linalg.cond(gram) > 1e14:
        raise InfeasibleError(f"constraint Gram matrix for {kind} is numerically singular")
    value = float((b.conj() @ y).real)
    res = MinIntegralResult(kind, value)
    if rows is not None:
        # a = (C R)^H y with constraint map a -> (C R) a
        CR = C @ rows
        a = CR.conj().T @ y
        res.minimizer = a * np.exp(-0.5 * M.log_gammas)
        res.alphas = M.alphas
        res.residuals = np.abs(CR @ a - b)
    return res


def _quadratic_kind(M, kind, p, v, J, rows, metric, reading) -> MinIntegralResult:
    n = M.n
    ell0, grad, dv, hv, vhv = _functionals(n, v)
    m = metric if metric is not None else metric_tensor(M, p)
    Q = m.G_inv if kind.tag == "I" else m.K ** (n - 1) * m.det_G * m.G_inv
    Q = 0.5 * (Q + Q.conj().T)
    C0 = np.vstack([ell0[None, :], grad])
    A = C0 @ J @ C0.conj().T
    Bc = hv @ J @ C0.conj().T
    H = hv @ J @ hv.conj().T - Bc @ np.linalg.solve(A, Bc.conj().T)
    H = 0.5 * (H + H.conj().T)
    if reading == "trace":
        top = float(np.trace(Q @ H).real)
    elif reading == "sphere":
        # Q H y = mu y  <=>  H y = mu Q^{-1} y
        mu, Y = eigh(H, np.linalg.inv(Q))
        top = float(mu[-1])
    else:
        raise ContractError(f"unknown reading {reading!r}")
    if not top > 0:
        raise InfeasibleError(f"{kind}: quadratic constraint cannot be met (N too small)")
    res = MinIntegralResult(kind, 1.0 / top)
    if rows is None:
        return res
    CR0 = C0 @ rows
    Brows = hv @ rows

    def project(a):
        return a - CR0.conj().T @ np.linalg.solve(A, CR0 @ a)

    if reading == "trace":
        # tuple (f_1..f_n) with sum_k (Q^{1/2} f_k'' v)_k = 1; functional rows L_k
        w, U = np.linalg.eigh(Q)
        S = (U * np.sqrt(np.maximum(w, 0))) @ U.conj().T
        L = S @ Brows
        a = np.array([project(row.conj()) for row in L]) / top
        cons = sum(L[k] @ a[k] for k in range(n))
        res.minimizer = a * np.exp(-0.5 * M.log_gammas)[None, :]
        res.residuals = np.concatenate([np.abs(CR0 @ a.T).ravel(), [abs(cons - 1.0)]])
    else:
        space = Y[:, mu >= top * (1 - 1e-9)]
        y = _tie_break(space, np.linalg.inv(Q))
        u = H @ y
        y = y / math.sqrt((u.conj() @ Q @ u).real)
        a = project(Brows.conj().T @ y)
        u = Brows @ a
        res.minimizer = a * np.exp(-0.5 * M.log_gammas)
        res.residuals = np.concatenate([np.abs(CR0 @ a), [abs((u.conj() @ Q @ u).real - 1.0)]])
    res.alphas = M.alphas
    return res


def _tie_break(space: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Deterministic representative of a degenerate top eigenspace: the
    B-orthogonal projection of the first coordinate direction with a nonzero
    image, phase fixed so that its largest entry is real positive."""
    if space.shape[1] == 1:
        y = space[:, 0]
    else:
        y = None
        for i in range(space.shape[0]):
            e = np.zeros(space.shape[0], complex)
            e[i] = 1
            coef = space.conj().T @ B @ e
            cand = space @ coef
            if np.linalg.norm(cand) > 1e-8:
                y = cand
                break
    k = int(np.argmax(np.abs(y)))
    return y * (abs(y[k]) / y[k])


# ---------------------------------------------------------------------------
# Identities


def _all_values(M, p, v) -> dict:
    n = M.n
    m = metric_tensor(M, p)
    vals = {"I0": minimum_integral(M, "I0", p, v).value,
            "I1": minimum_integral(M, "I1", p, v).value,
            "I2": minimum_integral(M, "I2", p, v).value,
            "I": minimum_integral(M, "I", p, v, metric=m).value,
            "M": minimum_integral(M, "M", p, v, metric=m).value}
    lam = [minimum_integral(M, MinIntegralKind("LAMBDA", k), p, v).value for k in range(1, n + 1)]
    vals["LAMBDA"] = lam
    vals["lambda"] = math.prod(lam)
    return vals


def _rel(a, b) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def extremal_identity_report(M, p, v, drift: bool = True) -> dict:
    """Both sides and relative residuals of the seven identities."""
    n, d = M.n, M.d
    p = as_point(p, n)
    v = as_point(v, n)
    m = metric_tensor(M, p)
    V = _all_values(M, p, v)
    I0, I1, I2, Ival, Mval, lam = V["I0"], V["I1"], V["I2"], V["I"], V["M"], V["lambda"]
    K = m.K
    pairs = {
        "K": (K, 1.0 / I0),
        "tau2": (quadratic(m.G, v), I0 / I1),
        "R": (holomorphic_sectional(m, v), 2.0 - I1**2 / (I0 * I2)),
        "g": (m.det_G, I0**n / lam),
        "beta": (m.det_G * K ** (-1.0 / (d + 1)), I0 ** (n + 1.0 / (d + 1)) / lam),
        "I": (Ival, K ** (n - 1) * m.det_G * Mval),
        "Ric": (ricci_from_point(m, v), (n + 1) - I1 * lam / (I0 * Mval)),
    }
    report = {
        "p": p, "v": v, "values": V,
        "identities": {k: {"lhs": a, "rhs": b, "residual": _rel(a, b)} for k, (a, b) in pairs.items()},
    }
    if drift and isinstance(M, KernelModel):
        Mlow = M.truncated(M.N - 2)
        Vlow = _all_values(Mlow, p, v)
        report["N"] = M.N
        report["drift"] = max(_rel(V[k], Vlow[k]) for k in ("I0", "I1", "I2", "I", "M", "lambda"))
    return report


def homogeneity_check(M, kind, p, v, alpha: complex) -> float:
    """Relative residual of I(p, alpha v) = |alpha|^{-2w} I(p, v), with w = k for
    I^k (k = 1, 2), 1 for I and M, 0 for I0 and LAMBDA_k."""
    kind = MinIntegralKind.parse(kind) if isinstance(kind, str) else kind
    w = {"I0": 0, "I1": 1, "I2": 2, "LAMBDA": 0, "I": 1, "M": 1}[kind.tag]
    a = minimum_integral(M, kind, p, alpha * as_point(v, M.n)).value
    b = abs(alpha) ** (-2 * w) * minimum_integral(M, kind, p, v).value
    return _rel(a, b)


def domain_contained(inner, outer, samples: int = 1000, seed: int = 0) -> bool:
    """Sampled check that the boundary of ``inner`` lies in the closure of ``outer``."""
    rng = np.random.default_rng(seed)
    pts = inner.sample_boundary(samples, rng)
    return bool(np.all([outer.gauge(z) <= 1 + 1e-12 for z in pts]))


def monotonicity_check(M_inner, M_outer, p, v, slack: float = 1e-9) -> dict:
    """Check I^k, lambda^k, M increase and K tau^2 decreases from inner to outer."""
    if not domain_contained(M_inner.domain, M_outer.domain):
        raise ContractError("inner domain is not contained in the outer domain")
    n = M_inner.n
    Vi = _all_values(M_inner, p, v)
    Vo = _all_values(M_outer, p, v)
    checks = {}
    for key in ("I0", "I1", "I2", "M"):
        checks[key] = {"inner": Vi[key], "outer": Vo[key],
                       "ok": Vi[key] <= Vo[key] + slack * abs(Vo[key])}
    for k in range(n):
        a, b = Vi["LAMBDA"][k], Vo["LAMBDA"][k]
        checks[f"LAMBDA_{k + 1}"] = {"inner": a, "outer": b, "ok": a <= b + slack * abs(b)}
    # K tau^2 = (1 / I0) (I0 / I1) = 1 / I1
    ki, ko = 1.0 / Vi["I1"], 1.0 / Vo["I1"]
    checks["K_tau2"] = {"inner": ki, "outer": ko, "ok": ki >= ko - slack * abs(ko)}
    return {"checks": checks, "ok": all(c["ok"] for c in checks.values())}


def report_json(kind, p, v, value, residuals, N, drift) -> str:
    def cplx(x):
        return [[float(np.real(c)), float(np.imag(c))] for c in np.atleast_1d(x)]

    doc = {"kind": str(kind), "p": cplx(p), "v": cplx(v), "value": float(value),
           "residuals": [float(r) for r in np.atleast_1d(residuals)], "N": N,
           "drift": None if drift is None else float(drift)}
    return json.dumps(doc, sort_keys=True, indent=2)
