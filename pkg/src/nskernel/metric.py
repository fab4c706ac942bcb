"""Narasimhan-Simha metric of order d and its curvatures.

Everything is read off the Taylor series of ``log K(z, w)`` around the
diagonal point, truncated at bidegree (2, 2).  For a function ``F(z) = L(z, z)``
with ``L`` holomorphic in z and antiholomorphic in w, mixed derivatives of F
in (z, zbar) equal mixed derivatives of L in (z, wbar), so

* ``g_{i jbar}             = d_i d_jbar L``
* ``d_c g_{b abar}         = d_c d_b d_abar L``
* ``d_c d_ebar g_{b abar}  = d_c d_b d_abar d_ebar L``

are exact for the (truncated) kernel.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .core import ContractError, as_point
from .quadrature import adaptive_interval


class MetricDegeneracyError(ArithmeticError):
    """The metric tensor failed to be positive definite."""

    def __init__(self, message, eigenvalue=None):
        super().__init__(message)
        self.eigenvalue = eigenvalue


def _unit(n, *idx):
    e = [0] * n
    for i in idx:
        e[i] += 1
    return tuple(e)


@dataclass(frozen=True)
class MetricPointData:
    """Metric tensor and derivative data at one point.

    Attributes
    ----------
    G : (n, n) array
        ``G[a, b] = g_{a bbar}``.
    G_inv : (n, n) array
        Inverse matrix of G.
    first_derivs : (n, n, n) array
        ``first_derivs[c, b, a] = d g_{b abar} / d z_c``.
    second_mixed : (n, n, n, n) array
        ``second_mixed[c, e, b, a] = d^2 g_{b abar} / d z_c d zbar_e``.
    """

    z: np.ndarray
    K: float
    d: int
    G: np.ndarray
    det_G: float
    G_inv: np.ndarray
    first_derivs: np.ndarray
    second_mixed: np.ndarray

    @property
    def n(self) -> int:
        return self.G.shape[0]

    def dbar(self) -> np.ndarray:
        """``out[e, b, a] = d g_{b abar} / d zbar_e = conj(d_e g_{a bbar})``."""
        return np.conj(np.transpose(self.first_derivs, (0, 2, 1)))


def metric_tensor(M, z) -> MetricPointData:
    """Metric data at ``z`` for a kernel object (series model or closed form)."""
    n = M.n
    z = as_point(z, n)
    L = M.log_series(z, 2)
    Kz = float(M.value(z).real)
    G = np.empty((n, n), dtype=complex)
    dG = np.empty((n, n, n), dtype=complex)
    ddG = np.empty((n, n, n, n), dtype=complex)
    for a in range(n):
        for b in range(n):
            G[a, b] = L.deriv(_unit(n, a), _unit(n, b))
            for c in range(n):
                dG[c, b, a] = L.deriv(_unit(n, c, b), _unit(n, a))
                for e in range(n):
                    ddG[c, e, b, a] = L.deriv(_unit(n, c, b), _unit(n, a, e))
    G = 0.5 * (G + G.conj().T)
    try:
        cf = cho_factor(G, lower=True)
    except LinAlgError:
        ev = np.linalg.eigvalsh(G)
        raise MetricDegeneracyError(f"metric tensor not positive definite: smallest eigenvalue {ev[0]:.3e}",
                                    eigenvalue=float(ev[0])) from None
    G_inv = cho_solve(cf, np.eye(n, dtype=complex))
    det_G = float(np.prod(np.diag(cf[0]).real) ** 2)
    return MetricPointData(z, Kz, M.d, G, det_G, G_inv, dG, ddG)


def _check_v(v, n):
    v = as_point(v, n)
    if not np.any(v):
        raise ContractError("the vector v must be nonzero")
    return v


def quadratic(G, v) -> float:
    """v^T G conj(v)."""
    return float((v @ G @ np.conj(v)).real)


def beta_invariant(M, z) -> float:
    m = metric_tensor(M, z)
    return m.det_G * m.K ** (-1.0 / (M.d + 1))


def vector_length(M, z, v) -> float:
    v = as_point(v, M.n)
    if not np.any(v):
        return 0.0
    return float(np.sqrt(quadratic(metric_tensor(M, z).G, v)))


def curvature_tensor(m: MetricPointData) -> np.ndarray:
    """``R[a, b, c, e] = R_{abar b c ebar}``.

    R_{abar b c ebar} = -d_c d_ebar g_{b abar}
                        + sum g^{nu mubar} d_c g_{b mubar} d_ebar g_{nu abar},
    with g^{nu mubar} = (G^{-1})[mu, nu].
    """
    dbar = m.dbar()  # [e, nu, a]
    second = -np.transpose(m.second_mixed, (3, 2, 0, 1))  # [a, b, c, e]
    corr = np.einsum("mn,cbm,ena->abce", m.G_inv, m.first_derivs, dbar)
    return second + corr


def holomorphic_sectional(m: MetricPointData, v) -> float:
    v = _check_v(v, m.n)
    vb = np.conj(v)
    num = np.einsum("abce,a,b,c,e->", curvature_tensor(m), vb, v, v, vb)
    return float(num.real) / quadratic(m.G, v) ** 2


def sectional_curvature(M, z, v) -> float:
    """Holomorphic sectional curvature R(z, v)."""
    return holomorphic_sectional(metric_tensor(M, z), v)


def ricci_tensor(m: MetricPointData) -> np.ndarray:
    """Ric_{a bbar} = -d_a d_bbar log det G via Jacobi's formula."""
    n = m.n
    Gi = m.G_inv
    # dA[a][i, j] = d_a g_{i jbar};  dB[b][i, j] = d_bbar g_{i jbar}
    dA = np.transpose(m.first_derivs, (0, 1, 2))  # [c, b, a] -> d_c g_{b abar}
    dB = m.dbar()
    ddAB = np.transpose(m.second_mixed, (0, 1, 2, 3))  # [c, e, b, a]
    Ric = np.empty((n, n), dtype=complex)
    for a in range(n):
        for b in range(n):
            t1 = np.trace(Gi @ ddAB[a, b])
            t2 = np.trace(Gi @ dA[a] @ Gi @ dB[b])
            Ric[a, b] = -(t1 - t2)
    return Ric


def ricci_from_point(m: MetricPointData, v) -> float:
    v = _check_v(v, m.n)
    return quadratic(ricci_tensor(m), v) / quadratic(m.G, v)


def ricci_curvature(M, z, v) -> float:
    return ricci_from_point(metric_tensor(M, z), v)


def path_length(M, curve, rtol: float = 1e-10) -> float:
    """Length of a piecewise-linear curve in the metric of M."""
    nodes = [as_point(c, M.n) for c in curve]
    total = 0.0
    for a, b in zip(nodes[:-1], nodes[1:]):
        v = b - a
        if not np.any(v):
            continue

        def f(ts, a=a, v=v):
            return np.array([np.sqrt(quadratic(metric_tensor(M, a + t * v).G, v)) for t in ts])

        total += adaptive_interval(f, 0.0, 1.0, rtol=rtol)
    return total


# ---------------------------------------------------------------------------
# Grid output


def metric_grid_rows(M, points, v) -> list[dict]:
    rows = []
    for z in points:
        z = as_point(z, M.n)
        m = metric_tensor(M, z)
        row = {}
        for i, zi in enumerate(z):
            row[f"z{i + 1}_re"] = zi.real
            row[f"z{i + 1}_im"] = zi.imag
        for a in range(M.n):
            for b in range(M.n):
                row[f"g{a + 1}{b + 1}_re"] = m.G[a, b].real
                row[f"g{a + 1}{b + 1}_im"] = m.G[a, b].imag
        row["det_G"] = m.det_G
        row["beta"] = m.det_G * m.K ** (-1.0 / (M.d + 1))
        row["R_v"] = holomorphic_sectional(m, v)
        row["Ric_v"] = ricci_from_point(m, v)
        rows.append(row)
    return rows


def rows_to_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: repr(float(x)) if isinstance(x, (float, np.floating)) else x for k, x in r.items()})
    return buf.getvalue()
