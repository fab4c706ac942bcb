"""Gauss-Legendre quadrature helpers.

Three entry points:

* :func:`adaptive_cube` -- adaptive tensor Gauss-Legendre on [0, 1]^dim for a
  vector-valued integrand (used for all moments of a domain at once);
* :func:`adaptive_interval` -- 1-d adaptive Gauss-Legendre (path lengths);
* :func:`integrate_domain` -- integral over a Reinhardt domain in polar
  coordinates with node growth (Selberg constants, reproducing checks).
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .core import Ball, DomainSpec, Polydisc


class QuadratureError(RuntimeError):
    """Adaptive refinement exhausted its budget; ``cell`` is the worst cell."""

    def __init__(self, message: str, cell=None, error: float = math.inf):
        super().__init__(message)
        self.cell = cell
        self.error = error


@lru_cache(maxsize=None)
def gauss_legendre01(m: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the m-point rule on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(m)
    return 0.5 * (x + 1.0), 0.5 * w


def _tensor_rule(lo: np.ndarray, hi: np.ndarray, m: int):
    x, w = gauss_legendre01(m)
    dim = lo.shape[0]
    grids = np.meshgrid(*([x] * dim), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    wts = np.ones(pts.shape[0])
    for g in np.meshgrid(*([w] * dim), indexing="ij"):
        wts = wts * g.ravel()
    span = hi - lo
    return lo + pts * span, wts * np.prod(span)


@dataclass
class CubeResult:
    value: np.ndarray
    error: np.ndarray
    cells: int


def adaptive_cube(f: Callable[[np.ndarray], np.ndarray], dim: int, rtol: float = 1e-12,
                  atol: float = 0.0, order: int = 16, max_depth: int = 20,
                  max_cells: int = 20000) -> CubeResult:
    """Integrate ``f`` over [0, 1]^dim.

    ``f`` maps an array of points, shape (P, dim), to values of shape (P, K).
    Each leaf cell is integrated with ``order`` and ``order + order // 2``
    points per axis; their difference is the cell error.  The leaf with the
    largest normalised error is split into 2^dim children until
    ``sum(err_k) <= max(atol, rtol * |I_k|)`` for every component k.
    """
    hi_order = order + order // 2

    def leaf(lo, hi, depth):
        p1, w1 = _tensor_rule(lo, hi, order)
        p2, w2 = _tensor_rule(lo, hi, hi_order)
        q1 = w1 @ f(p1)
        q2 = w2 @ f(p2)
        return q2, np.abs(q2 - q1), depth

    counter = itertools.count()
    lo0, hi0 = np.zeros(dim), np.ones(dim)
    val, err, _ = leaf(lo0, hi0, 0)
    leaves = {next(counter): (lo0, hi0, val, err, 0)}
    total = val.copy()
    total_err = err.copy()

    def score(e, tot):
        scale = np.maximum(np.abs(tot) * rtol, atol)
        scale = np.where(scale > 0, scale, np.finfo(float).tiny)
        return float(np.max(e / scale))

    heap = [(-score(err, total), 0)]
    while True:
        scale = np.maximum(np.abs(total) * rtol, atol)
        if np.all(total_err <= scale):
            return CubeResult(total, total_err, len(leaves))
        if len(leaves) >= max_cells:
            worst = leaves[heap[0][1]]
            raise QuadratureError("cell budget exhausted", cell=(worst[0], worst[1]),
                                  error=float(np.max(total_err / np.maximum(np.abs(total), 1e-300))))
        _, key = heapq.heappop(heap)
        lo, hi, v, e, depth = leaves.pop(key)
        if depth >= max_depth:
            raise QuadratureError(f"max depth {max_depth} reached", cell=(lo, hi),
                                  error=float(np.max(e / np.maximum(np.abs(total), 1e-300))))
        total = total - v
        total_err = total_err - e
        mid = 0.5 * (lo + hi)
        for corner in itertools.product((0, 1), repeat=dim):
            c = np.array(corner)
            clo = np.where(c == 0, lo, mid)
            chi = np.where(c == 0, mid, hi)
            cv, ce, _ = leaf(clo, chi, depth + 1)
            k = next(counter)
            leaves[k] = (clo, chi, cv, ce, depth + 1)
            total = total + cv
            total_err = total_err + ce
            # ranks of older cells go stale as total moves; termination uses total_err only
            heapq.heappush(heap, (-score(ce, total), k))


def adaptive_interval(f: Callable[[np.ndarray], np.ndarray], a: float, b: float,
                      rtol: float = 1e-12, order: int = 10, max_depth: int = 50) -> float:
    """1-d adaptive Gauss-Legendre with bisection; ``f`` is vectorised."""
    x, w = gauss_legendre01(order)

    def rule(lo, hi):
        return (hi - lo) * float(w @ f(lo + (hi - lo) * x))

    whole = rule(a, b)
    stack = [(a, b, whole, 0)]
    total = 0.0
    parts = []
    while stack:
        lo, hi, q, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        left, right = rule(lo, mid), rule(mid, hi)
        if abs(left + right - q) <= rtol * max(abs(left + right), 1e-300) or depth >= max_depth:
            parts.append(left + right)
            continue
        stack.append((mid, hi, right, depth + 1))
        stack.append((lo, mid, left, depth + 1))
    parts.sort(key=abs)
    total = math.fsum(parts)
    return total


# ---------------------------------------------------------------------------
# Polar integration over Reinhardt domains


def _orthant(dim: int, angles: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unit vectors in the positive orthant of R^dim and the angular Jacobian."""
    P = angles.shape[0]
    omega = np.ones((P, dim))
    jac = np.ones(P)
    sin_prod = np.ones(P)
    for k in range(dim - 1):
        phi = angles[:, k]
        omega[:, k] = sin_prod * np.cos(phi)
        jac = jac * np.sin(phi) ** (dim - 2 - k)
        sin_prod = sin_prod * np.sin(phi)
    omega[:, dim - 1] = sin_prod
    return omega, jac


def _polar_nodes(D: DomainSpec, m_r: int, m_theta: int):
    """Nodes z (P, n) and weights for integrating over D with dV."""
    n = D.n
    xr, wr = gauss_legendre01(m_r)
    th = 2 * np.pi * np.arange(m_theta) / m_theta
    wth = np.full(m_theta, 2 * np.pi / m_theta)
    if isinstance(D, Polydisc):
        r_axes = [xr] * n
        rw_axes = [wr * xr] * n
        R = np.stack([g.ravel() for g in np.meshgrid(*r_axes, indexing="ij")], axis=-1)
        RW = np.ones(R.shape[0])
        for g in np.meshgrid(*rw_axes, indexing="ij"):
            RW = RW * g.ravel()
    else:
        # r = s * Rmax(omega) * omega, s in [0, 1], omega in the orthant
        if n == 1:
            omega = np.ones((1, 1))
            ajac = np.ones(1)
            aw = np.ones(1)
        else:
            xa, wa = gauss_legendre01(m_r)
            ang = np.stack([g.ravel() for g in np.meshgrid(*([xa * np.pi / 2] * (n - 1)), indexing="ij")], axis=-1)
            aw = np.ones(ang.shape[0])
            for g in np.meshgrid(*([wa * np.pi / 2] * (n - 1)), indexing="ij"):
                aw = aw * g.ravel()
            omega, ajac = _orthant(n, ang)
        if isinstance(D, Ball):
            rmax = np.ones(omega.shape[0])
        else:
            rmax = np.array([1.0 / D.gauge(o) for o in omega])
        # radial factor: R^{n-1} dR times prod r_i (from r_i dr_i dtheta_i)
        S = xr[None, :] * rmax[:, None]  # (A, m_r)
        R = S[:, :, None] * omega[:, None, :]
        RW = (aw * ajac * rmax)[:, None] * wr[None, :] * S ** (n - 1) * np.prod(R, axis=-1)
        R = R.reshape(-1, n)
        RW = RW.ravel()
    T = np.stack([g.ravel() for g in np.meshgrid(*([th] * n), indexing="ij")], axis=-1)
    TW = np.ones(T.shape[0])
    for g in np.meshgrid(*([wth] * n), indexing="ij"):
        TW = TW * g.ravel()
    Z = (R[:, None, :] * np.exp(1j * T[None, :, :])).reshape(-1, n)
    W = (RW[:, None] * TW[None, :]).ravel()
    return Z, W


def integrate_domain(D: DomainSpec, f: Callable[[np.ndarray], np.ndarray], rtol: float = 1e-10,
                     m_r: int = 12, m_theta: int = 12, max_refinements: int = 5) -> complex:
    """Integrate ``f(Z)`` (Z of shape (P, n)) over D, growing the node count
    by half per axis until successive values agree to ``rtol``."""
    prev = None
    for _ in range(max_refinements + 1):
        Z, W = _polar_nodes(D, m_r, m_theta)
        val = complex(np.sum(W * f(Z)))
        if prev is not None and abs(val - prev) <= rtol * max(abs(val), 1e-300):
            return val
        prev = val
        m_r += m_r // 2
        m_theta += m_theta // 2
    raise QuadratureError(f"polar quadrature did not reach rtol={rtol}", error=abs(val - prev))
