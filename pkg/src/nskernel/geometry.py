"""Biholomorphic maps: Cayley transform, affine maps, transformation-rule
residuals, Pinchuk normalisation at a boundary point and scaling frames."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import (Ball, ContractError, DefiningFunction, DomainError, DomainSpec, QuadricRho,
                   as_point, boundary_frame)
from .kernel import BilinearFactor, ClosedKernel, ball_constant
from .metric import metric_tensor, quadratic


class PoleError(DomainError):
    """Point on the polar set of a rational map."""


class NotStronglyPseudoconvexError(ArithmeticError):
    """Levi form is not positive definite at the requested boundary point."""


@dataclass
class Biholo:
    """A holomorphic map with its Jacobian and, optionally, its inverse."""

    n: int
    forward: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    inverse: Optional["Biholo"] = field(default=None, repr=False)
    name: str = "map"

    def __call__(self, z) -> np.ndarray:
        return self.forward(as_point(z, self.n))

    def jac(self, z) -> np.ndarray:
        return self.jacobian(as_point(z, self.n))

    def det_jacobian(self, z) -> complex:
        return complex(np.linalg.det(self.jac(z)))

    def compose(self, inner: "Biholo") -> "Biholo":
        """self o inner."""
        F = Biholo(self.n, lambda z: self.forward(inner.forward(z)),
                   lambda z: self.jacobian(inner.forward(z)) @ inner.jacobian(z),
                   None, f"{self.name}.{inner.name}")
        if self.inverse is not None and inner.inverse is not None:
            a, b = inner.inverse, self.inverse
            F.inverse = Biholo(self.n, lambda w: a.forward(b.forward(w)),
                               lambda w: a.jacobian(b.forward(w)) @ b.jacobian(w), F, f"{F.name}_inv")
        return F

    def probe(self, points, step: float = 1e-6) -> dict:
        """Max relative Jacobian error against central differences, and the
        inverse round-trip error, over ``points``."""
        jac_err = 0.0
        inv_err = 0.0
        for z in points:
            z = as_point(z, self.n)
            J = self.jac(z)
            fd = np.empty_like(J)
            for k in range(self.n):
                e = np.zeros(self.n, complex)
                e[k] = step
                fd[:, k] = (self.forward(z + e) - self.forward(z - e)) / (2 * step)
            jac_err = max(jac_err, np.abs(fd - J).max() / max(np.abs(J).max(), 1e-300))
            if self.inverse is not None:
                inv_err = max(inv_err, np.abs(self.inverse.forward(self.forward(z)) - z).max())
        return {"jacobian": float(jac_err), "inverse": float(inv_err)}


def linear_map(A) -> Biholo:
    A = np.asarray(A, dtype=complex)
    n = A.shape[0]
    Ai = np.linalg.inv(A)
    inv = Biholo(n, lambda z: Ai @ z, lambda z: Ai, None, "linear_inv")
    F = Biholo(n, lambda z: A @ z, lambda z: A, inv, "linear")
    inv.inverse = F
    return F


def translation(b) -> Biholo:
    b = np.asarray(b, dtype=complex)
    n = b.shape[0]
    I = np.eye(n, dtype=complex)
    inv = Biholo(n, lambda z: z + b, lambda z: I, None, "translation_inv")
    F = Biholo(n, lambda z: z - b, lambda z: I, inv, "translation")
    inv.inverse = F
    return F


def dilation(eta: float, n: int) -> Biholo:
    """T('z, z_n) = ('z / sqrt(eta), z_n / eta)."""
    diag = np.full(n, 1 / math.sqrt(eta), dtype=complex)
    diag[-1] = 1 / eta
    return linear_map(np.diag(diag))


# ---------------------------------------------------------------------------
# Cayley transform and the Siegel domain


def cayley(z) -> np.ndarray:
    """Phi(z) = (sqrt(2) 'z / (z_n - 1), (z_n + 1) / (z_n - 1)); Phi o Phi = id."""
    z = as_point(z)
    den = z[-1] - 1
    if abs(den) < 1e-300:
        raise PoleError("Cayley transform has a pole at z_n = 1")
    out = np.empty_like(z)
    out[:-1] = math.sqrt(2) * z[:-1] / den
    out[-1] = (z[-1] + 1) / den
    return out


def _cayley_jac(z) -> np.ndarray:
    n = z.shape[0]
    den = z[-1] - 1
    if abs(den) < 1e-300:
        raise PoleError("Cayley transform has a pole at z_n = 1")
    J = np.zeros((n, n), dtype=complex)
    for k in range(n - 1):
        J[k, k] = math.sqrt(2) / den
        J[k, -1] = -math.sqrt(2) * z[k] / den**2
    J[-1, -1] = -2 / den**2
    return J


def cayley_data(n: int) -> Biholo:
    F = Biholo(n, cayley, _cayley_jac, None, "cayley")
    F.inverse = F
    return F


def cayley_det(z) -> complex:
    """det Phi'(z) = -2^{(n+1)/2} (z_n - 1)^{-(n+1)}."""
    z = as_point(z)
    n = z.shape[0]
    return complex(-(2 ** ((n + 1) / 2)) * (z[-1] - 1) ** (-(n + 1)))


def b_star(n: int) -> np.ndarray:
    out = np.zeros(n, dtype=complex)
    out[-1] = -1
    return out


@dataclass(frozen=True)
class SiegelDomain:
    """{2 Re z_n + |'z|^2 < 0}, handled analytically only."""

    n: int
    kind = "siegel"

    def rho(self, z) -> float:
        z = as_point(z, self.n)
        return float(2 * z[-1].real + np.sum(np.abs(z[:-1]) ** 2))

    def contains(self, z) -> bool:
        return self.rho(z) < 0


def siegel_kernel(n: int, d: int) -> ClosedKernel:
    """K_{D_inf, d}(z, w) = c (n!/pi^n)^{d+1} (-(z_n + conj(w_n) + <'z, 'w>))^{-(d+1)(n+1)},
    the pull-back of the ball kernel by the Cayley transform."""
    C = ball_constant(n, d) * (math.factorial(n) / math.pi**n) ** (d + 1)
    e = np.zeros(n, dtype=complex)
    e[-1] = -1
    M = -np.diag(np.r_[np.ones(n - 1), 0.0]).astype(complex)
    return ClosedKernel(SiegelDomain(n), d, C, [BilinearFactor(0.0, e, e.copy(), M, (d + 1) * (n + 1))],
                        name="siegel")


# ---------------------------------------------------------------------------
# Transformation-rule residuals


def _rel(a, b) -> float:
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))) / max(np.max(np.abs(a)), 1e-300))


def transform_kernel_residual(F: Biholo, K_src, K_dst, z, w) -> float:
    """Relative residual of K_src(z, w) = det F'(z)^{d+1} K_dst(Fz, Fw) conj(det F'(w))^{d+1}."""
    d = K_src.d
    lhs = K_src.value(z, w)
    rhs = F.det_jacobian(z) ** (d + 1) * K_dst.value(F(z), F(w)) * np.conj(F.det_jacobian(w)) ** (d + 1)
    return _rel(lhs, rhs)


def transform_metric_residual(F: Biholo, K_src, K_dst, z, v) -> float:
    """Max of the relative residuals of G_src(z) = F'^T G_dst(Fz) conj(F') and
    tau_src(z, v) = tau_dst(Fz, F'v)."""
    J = F.jac(z)
    Gs = metric_tensor(K_src, z).G
    Gd = metric_tensor(K_dst, F(z)).G
    r1 = _rel(Gs, J.T @ Gd @ np.conj(J))
    v = as_point(v, F.n)
    t1 = math.sqrt(quadratic(Gs, v))
    t2 = math.sqrt(quadratic(Gd, J @ v))
    return max(r1, abs(t1 - t2) / max(t1, 1e-300))


def transform_min_integral_residual(F: Biholo, K_src, K_dst, kind, p, v) -> float:
    """I_src(p, v) = |det F'(p)|^{-2d-2} I_dst(F(p), F'(p) v)."""
    from .extremal import minimum_integral

    d = K_src.d
    v = as_point(v, F.n)
    a = minimum_integral(K_src, kind, p, v).value
    b = abs(F.det_jacobian(p)) ** (-2 * d - 2) * minimum_integral(K_dst, kind, F(p), F.jac(p) @ v).value
    return abs(a - b) / max(abs(a), 1e-300)


# ---------------------------------------------------------------------------
# Pinchuk normalisation


def _rho_of(D) -> DefiningFunction:
    if isinstance(D, DefiningFunction):
        return D
    if isinstance(D, DomainSpec):
        return D.defining_function()
    raise ContractError("expected a DomainSpec or a DefiningFunction")


def _householder_to_en(g: np.ndarray) -> np.ndarray:
    """Unitary R with R g = |g| e_n."""
    n = g.shape[0]
    target = np.zeros(n, dtype=complex)
    target[-1] = np.linalg.norm(g)
    u = g - target
    if np.linalg.norm(u) < 1e-14 * max(np.linalg.norm(g), 1):
        return np.eye(n, dtype=complex)
    # complex Householder needs equal phase of <u, g>; rotate g's last entry phase first
    phase = g[-1] / abs(g[-1]) if abs(g[-1]) > 0 else 1.0
    Dm = np.eye(n, dtype=complex)
    Dm[-1, -1] = np.conj(phase)
    g2 = Dm @ g
    u = g2 - target
    if np.linalg.norm(u) < 1e-14 * np.linalg.norm(g):
        return Dm
    u = u / np.linalg.norm(u)
    Hh = np.eye(n, dtype=complex) - 2 * np.outer(u, u.conj())
    return Hh @ Dm


@dataclass
class PinchukMap:
    """h = phi3 o phi2 o phi1 o R, with phi1(y) = P (y - R zeta),
    phi2(x) = ('x, x_n + sum_{mu, nu < n} a1_{mu nu} x_mu x_nu), phi3 = Lambda U.

    ``premap`` is the unitary R applied first (identity unless
    d rho / d z_n (zeta) is small relative to the gradient)."""

    zeta: np.ndarray
    premap: np.ndarray
    P_matrix: np.ndarray
    a1_coeffs: np.ndarray
    b1_matrix: np.ndarray
    Lambda: np.ndarray
    U: np.ndarray
    grad_norm: float
    rho: DefiningFunction = field(repr=False)

    @property
    def n(self) -> int:
        return self.zeta.shape[0]

    @property
    def _a_tan(self) -> np.ndarray:
        A = np.zeros_like(self.a1_coeffs)
        A[:-1, :-1] = self.a1_coeffs[:-1, :-1]
        return A

    @property
    def linear_part(self) -> np.ndarray:
        """Lambda U P R (= h'(p) for p on the real normal)."""
        return self.Lambda @ self.U @ self.P_matrix @ self.premap

    def forward(self, z) -> np.ndarray:
        z = as_point(z, self.n)
        x = self.P_matrix @ (self.premap @ (z - self.zeta))
        y = x.copy()
        y[-1] = x[-1] + x @ self._a_tan @ x
        return self.Lambda @ self.U @ y

    def jacobian(self, z) -> np.ndarray:
        z = as_point(z, self.n)
        x = self.P_matrix @ (self.premap @ (z - self.zeta))
        J2 = np.eye(self.n, dtype=complex)
        A = self._a_tan
        J2[-1, :] += (A + A.T) @ x
        return self.Lambda @ self.U @ J2 @ self.P_matrix @ self.premap

    def inverse(self, w) -> np.ndarray:
        w = as_point(w, self.n)
        y = np.linalg.solve(self.Lambda @ self.U, w)
        x = y.copy()
        x[-1] = y[-1] - y @ self._a_tan @ y
        return self.zeta + self.premap.conj().T @ np.linalg.solve(self.P_matrix, x)

    def biholo(self) -> Biholo:
        n = self.n
        inv_jac = lambda w: np.linalg.inv(self.jacobian(self.inverse(w)))
        inv = Biholo(n, self.inverse, inv_jac, None, "pinchuk_inv")
        F = Biholo(n, self.forward, self.jacobian, inv, "pinchuk")
        inv.inverse = F
        return F

    def pushed_rho(self, w) -> float:
        return self.rho.value(self.inverse(w))

    def normal_form_jet(self) -> dict:
        """Exact 1- and 2-jets at 0 of rho o h^{-1} by the chain rule."""
        n = self.n
        L = self.premap.conj().T @ np.linalg.inv(self.P_matrix)
        Mw = np.linalg.inv(self.Lambda @ self.U)
        D1 = L @ Mw  # psi'(0)
        # psi_k second derivative: L[k, n] * (-2 Mw^T A Mw)
        H2 = -2 * Mw.T @ self._a_tan @ Mw
        gz = self.rho.grad_z(self.zeta)
        hzz = self.rho.hess_zz(self.zeta)
        hzzb = self.rho.hess_zzbar(self.zeta)
        grad = gz @ D1
        Qhess = D1.T @ hzz @ D1 + (gz @ L[:, -1]) * H2
        Herm = D1.T @ hzzb @ np.conj(D1)
        return {"value": self.rho.value(self.zeta), "grad": grad, "Q": 0.5 * Qhess, "H": Herm}

    def normal_form_residual(self) -> float:
        """Deviation from rho = 2 Re(z_n + Q) + H + o(|z|^2) with Q('z, 0) = 0
        and H('z, 0) = |'z|^2."""
        j = self.normal_form_jet()
        e = np.zeros(self.n)
        e[-1] = 1
        r = [abs(j["value"]), np.abs(j["grad"] - e).max()]
        if self.n > 1:
            r.append(np.abs(j["Q"][:-1, :-1]).max())
            r.append(np.abs(j["H"][:-1, :-1] - np.eye(self.n - 1)).max())
        return float(max(r))

    def normal_image_residual(self, t: float) -> float:
        """|h(p) - (0, -t |grad|)| for p at distance t along the inward normal."""
        g = self.rho.grad_zbar(self.zeta)
        p = self.zeta - t * g / np.linalg.norm(g)
        target = np.zeros(self.n, dtype=complex)
        target[-1] = -t * self.grad_norm
        return float(np.abs(self.forward(p) - target).max())

    def to_dict(self) -> dict:
        return {"zeta": _cjson(self.zeta), "premap": _cjson(self.premap), "P": _cjson(self.P_matrix),
                "a1": _cjson(self.a1_coeffs), "b1": _cjson(self.b1_matrix),
                "Lambda": _cjson(self.Lambda), "U": _cjson(self.U), "grad_norm": self.grad_norm}


def _cjson(a) -> list:
    a = np.asarray(a)
    if a.ndim == 0:
        return [float(a.real), float(a.imag)]
    return [_cjson(x) for x in a]


def _fix_phases(V: np.ndarray) -> np.ndarray:
    V = V.copy()
    for k in range(V.shape[1]):
        i = k if abs(V[k, k]) > 1e-12 else int(np.argmax(np.abs(V[:, k])))
        V[:, k] *= abs(V[i, k]) / V[i, k]
    return V


def pinchuk_normalize(D, zeta, premap=None, tol: float = 1e-9) -> PinchukMap:
    """Pinchuk normalisation h_zeta at the boundary point ``zeta``.

    ``D`` is a DomainSpec with a smooth defining function or a
    DefiningFunction.  ``premap`` overrides the unitary pre-rotation.
    """
    rho = _rho_of(D)
    zeta = as_point(zeta)
    n = zeta.shape[0]
    if abs(rho.value(zeta)) > tol:
        raise ContractError(f"zeta is not on the boundary (rho = {rho.value(zeta):.3e})")
    g = rho.grad_z(zeta)
    gnorm = float(np.linalg.norm(g))
    if premap is None:
        premap = np.eye(n, dtype=complex) if abs(g[-1]) >= 0.5 * gnorm else _householder_to_en(np.conj(g))
    R = np.asarray(premap, dtype=complex)
    # derivatives of rho o R^H at R zeta
    gz = g @ R.conj().T
    hzz = R.conj() @ rho.hess_zz(zeta) @ R.conj().T
    hzzb = R.conj() @ rho.hess_zzbar(zeta) @ R.T
    gzb = np.conj(gz)
    P = np.zeros((n, n), dtype=complex)
    for nu in range(n - 1):
        P[nu, nu] = gzb[-1]
        P[nu, -1] = -gzb[nu]
    P[-1, :] = gz
    Pi = np.linalg.inv(P)
    a1 = 0.5 * Pi.T @ hzz @ Pi
    b1 = Pi.T @ hzzb @ np.conj(Pi)
    if n > 1:
        bt = b1[:-1, :-1]
        lam, V = np.linalg.eigh(np.conj(0.5 * (bt + bt.conj().T)))
        order = np.argsort(-lam)
        lam, V = lam[order], _fix_phases(V[:, order])
        if lam[-1] <= 0:
            raise NotStronglyPseudoconvexError(f"Levi form eigenvalue {lam[-1]:.3e} <= 0 at {zeta}")
        Lam = np.eye(n, dtype=complex)
        Lam[:-1, :-1] = np.diag(np.sqrt(lam))
        U = np.eye(n, dtype=complex)
        U[:-1, :-1] = V.conj().T
    else:
        Lam = np.eye(1, dtype=complex)
        U = np.eye(1, dtype=complex)
    return PinchukMap(zeta, R, P, a1, b1, Lam, U, gnorm, rho)


# ---------------------------------------------------------------------------
# Scaling frames


@dataclass
class ScalingFrame:
    """One scaling step: p at distance delta from its foot zeta,
    eta = delta |grad_zbar rho(zeta)|, T = diag(1/sqrt(eta), ..., 1/eta)."""

    p: np.ndarray
    zeta: np.ndarray
    delta: float
    eta: float
    pinchuk: PinchukMap
    T: np.ndarray
    S: np.ndarray
    j: int = 0

    @property
    def det_T(self) -> float:
        return float(np.prod(np.diag(self.T)).real)

    def image_of_p(self) -> np.ndarray:
        return self.T @ self.pinchuk.forward(self.p)

    def scaled_rho(self, z) -> float:
        """rho o h^{-1} o T^{-1}, divided by eta."""
        z = as_point(z, self.pinchuk.n)
        w = np.linalg.solve(self.T, z)
        return self.pinchuk.pushed_rho(w) / self.eta

    def to_dict(self) -> dict:
        return {"j": self.j, "p": _cjson(self.p), "zeta": _cjson(self.zeta), "delta": self.delta,
                "eta": self.eta, "T": _cjson(self.T), "S": _cjson(self.S),
                "pinchuk": self.pinchuk.to_dict()}


def scaling_frame(D, p0, delta: float, j: int = 0) -> ScalingFrame:
    """Frame for the point at distance ``delta`` from ``p0`` along the inward normal."""
    rho = _rho_of(D)
    p0 = as_point(p0)
    n = p0.shape[0]
    if delta <= 0:
        raise ContractError("delta must be positive")
    g = rho.grad_zbar(p0)
    p = p0 - delta * g / np.linalg.norm(g)
    if isinstance(D, DomainSpec):
        fr = boundary_frame(D, p)
        zeta, dist = fr.foot, fr.delta
    else:
        zeta, dist = p0, float(delta)
    pin = pinchuk_normalize(D, zeta)
    eta = dist * float(np.linalg.norm(rho.grad_zbar(zeta)))
    T = np.diag(np.r_[np.full(n - 1, 1 / math.sqrt(eta)), 1 / eta]).astype(complex)
    return ScalingFrame(p, zeta, dist, eta, pin, T, pin.jacobian(p), j)


def frames_json(frames) -> str:
    return json.dumps([f.to_dict() for f in frames], indent=2, sort_keys=True)
