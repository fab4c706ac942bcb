"""Numerical experiments: boundary asymptotics, Ramadanov stability and the
completeness probe."""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import Ball, ContractError, DiagonalBall, DomainSpec, Polydisc, as_point
from .geometry import pinchuk_normalize
from .kernel import ClosedKernel, UncertifiedWarning, ball_constant, build_model, closed_kernel
from .metric import holomorphic_sectional, metric_tensor, quadratic, ricci_from_point
from .quadrature import adaptive_interval

ASYMPTOTIC_TAGS = ("a", "b", "c", "d", "e", "f", "g")
DEFAULT_DELTAS = tuple(2.0**-k for k in range(6, 17))
HALF_ORDER_TAGS = ("d", "e")


class HypothesisError(RuntimeError):
    """A hypothesis of the stability statement failed on the sampled family."""


def kernel_for(D: DomainSpec, d: int, N: int = 30, tol: float = 1e-12):
    """Closed kernel when one exists, otherwise a certified series model."""
    if isinstance(D, (Ball, DiagonalBall, Polydisc)):
        return closed_kernel(D, d)
    return build_model(D, d, N, tol=tol)


# ---------------------------------------------------------------------------
# Boundary asymptotics


def asymptotic_targets(n: int, d: int, v_normal: float, levi: float) -> dict:
    """Limits of the seven scaled quantities.

    ``v_normal`` is |v_N(p0)| and ``levi`` is L(p0, v_H(p0)), both read in
    coordinates where the defining function is 2 Re z_n + |'z|^2 + o(|z|^2).
    """
    c = ball_constant(n, d)
    k = (d + 1) * (n + 1)
    fn = math.factorial(n)
    return {
        "a": c * (fn / (2 ** (n + 1) * math.pi**n)) ** (d + 1),
        "b": (d + 1) ** n * (n + 1) ** n / 2 ** (n + 1),
        "c": (d + 1) ** n * (n + 1) ** n * c ** (-1 / (d + 1)) * math.pi**n / fn,
        "d": 0.5 * math.sqrt(k) * v_normal,
        "e": math.sqrt(0.5 * k * levi),
        "f": -2 / k,
        "g": -1 / (d + 1),
    }


def richardson(x: Sequence[float], y: Sequence[float]) -> float:
    """Value at x = 0 of the interpolating polynomial through (x_i, y_i) (Neville)."""
    x = np.asarray(x, dtype=float)
    P = np.asarray(y, dtype=float).copy()
    m = len(x)
    for k in range(1, m):
        for i in range(m - k):
            P[i] = (x[i + k] * P[i] - x[i] * P[i + 1]) / (x[i + k] - x[i])
    return float(P[0])


@dataclass
class AsymptoticsRow:
    """Scaled quantities at distance ``delta`` from p0.

    All quantities are read in the coordinates w = h(z) of the Pinchuk map
    at p0, which is linear along the normal with matrix H.  ``qty`` holds
    delta^{(d+1)(n+1)} K, delta^{n+1} det G, beta, delta tau(p, v),
    sqrt(delta) tau(p, v_H), R(p, v), Ric(p, v) with delta the distance in
    w-coordinates.  ``normalized`` replaces that distance by -rho(p) / 2,
    which has the same limit.
    """

    delta: float
    qty: dict
    normalized: dict
    certificate: float = 0.0


@dataclass
class AsymptoticsVerdict:
    limits: dict
    targets: dict
    errors: dict
    passed: dict
    tolerance: float
    variables: dict
    window: list
    skipped: list
    normalization: str
    defining_function: dict
    invariant_variation: dict = field(default_factory=dict)

    @property
    def all_passed(self) -> bool:
        return all(self.passed.values())

    def to_json(self, extra: Optional[dict] = None) -> str:
        doc = asdict(self)
        doc["all_passed"] = self.all_passed
        doc["rate_assumption"] = {t: ("square analytic in delta" if t in HALF_ORDER_TAGS else "analytic in delta")
                                  for t in ASYMPTOTIC_TAGS}
        if extra:
            doc.update(extra)
        return json.dumps(doc, indent=2, sort_keys=True)


def _row(M, rho, p0, nu, gnorm, det_h, v, u_h, delta, n, d) -> AsymptoticsRow:
    p = p0 - delta * nu
    m = metric_tensor(M, p)
    tau = math.sqrt(quadratic(m.G, v))
    tau_h = math.sqrt(quadratic(m.G, u_h)) if np.any(u_h) else 0.0
    k = (d + 1) * (n + 1)
    beta = m.det_G * m.K ** (-1.0 / (d + 1))
    R = holomorphic_sectional(m, v)
    Ric = ricci_from_point(m, v)
    K_hat = m.K / det_h ** (2 * (d + 1))
    detG_hat = m.det_G / det_h**2

    def scaled(s):
        return {"a": s**k * K_hat, "b": s ** (n + 1) * detG_hat, "c": beta, "d": s * tau,
                "e": math.sqrt(s) * tau_h, "f": R, "g": Ric}

    cert = M.jet_tail(p) if hasattr(M, "jet_tail") else 0.0
    return AsymptoticsRow(float(delta), scaled(gnorm * delta), scaled(-rho.value(p) / 2), float(cert))


def asymptotics_sweep(D: DomainSpec, M, p0, v, deltas: Sequence[float], m: int = 4,
                      tol: Optional[float] = None, window_tol: float = 1e-4,
                      normalization: Optional[str] = None, threads: int = 1):
    """Rows of scaled quantities along the inward normal at p0 and the verdict.

    Series models only use deltas whose jet certificate is below
    ``window_tol``; the certified window is reported.  Limits are Richardson
    extrapolations in delta over the last ``m`` certified rows; the
    half-order tags (d), (e) are extrapolated through their squares.  Targets
    use the Pinchuk coordinates at p0, where the defining function has unit
    gradient and identity Levi form.  ``normalization`` selects the distance
    proxy: "delta" (default for closed kernels) or -rho(p)/2 ("rho", default
    for series models, whose window stays far from the boundary).
    """
    if normalization is None:
        normalization = "delta" if isinstance(M, ClosedKernel) else "rho"
    if normalization not in ("rho", "delta"):
        raise ContractError("normalization must be 'rho' or 'delta'")
    n = D.n
    d = M.d
    p0 = as_point(p0, n)
    v = as_point(v, n)
    if not np.any(v):
        raise ContractError("v must be nonzero")
    deltas = [float(x) for x in deltas]
    if any(b >= a for a, b in zip(deltas, deltas[1:])) or min(deltas) <= 0:
        raise ContractError("deltas must be positive and strictly decreasing")
    rho = D.defining_function()
    if abs(rho.value(p0)) > 1e-10:
        raise ContractError("p0 is not a boundary point")
    gbar = rho.grad_zbar(p0)
    gnorm = float(np.linalg.norm(gbar))
    nu = gbar / gnorm
    H = pinchuk_normalize(D, p0).linear_part
    det_h = abs(np.linalg.det(H))
    v_hat = H @ v
    u_h = np.linalg.solve(H, np.r_[v_hat[:-1], 0.0])
    targets = asymptotic_targets(n, d, abs(v_hat[-1]), float(np.sum(np.abs(v_hat[:-1]) ** 2)))

    closed = isinstance(M, ClosedKernel)
    kept, skipped = [], []
    for delta in deltas:
        p = p0 - delta * nu
        if not D.contains(p):
            raise ContractError(f"delta = {delta} leaves the domain")
        if closed or M.jet_tail(p) <= window_tol:
            kept.append(delta)
        else:
            skipped.append(delta)
    if len(kept) < m:
        raise ContractError(f"only {len(kept)} certified deltas; need {m}")

    work = lambda dl: _row(M, rho, p0, nu, gnorm, det_h, v, u_h, dl, n, d)
    with warnings.catch_warnings():
        # kept rows carry their own pointwise jet certificate
        warnings.simplefilter("ignore", UncertifiedWarning)
        if threads > 1:
            with ThreadPoolExecutor(threads) as ex:
                rows = list(ex.map(work, kept))
        else:
            rows = [work(dl) for dl in kept]

    tail = rows[-m:]
    if tol is None:
        tol = 1e-6 if closed else 1e-2
    key = "normalized" if normalization == "rho" else "qty"
    limits, errors, passed, variables = {}, {}, {}, {}
    xs = [r.delta for r in tail]
    for t in ASYMPTOTIC_TAGS:
        ys = [getattr(r, key)[t] for r in tail]
        if t in HALF_ORDER_TAGS:
            # squares of the half-order quantities are whole-order in delta
            variables[t] = "delta, extrapolating the square"
            lim = math.sqrt(max(richardson(xs, [y * y for y in ys]), 0.0))
        else:
            variables[t] = "delta"
            lim = richardson(xs, ys)
        tgt = targets[t]
        err = abs(lim - tgt) / abs(tgt) if tgt != 0 else abs(lim)
        limits[t], errors[t], passed[t] = lim, err, bool(err < tol)
    variation = {t: float(max(r.qty[t] for r in rows) - min(r.qty[t] for r in rows)) for t in ("c", "f", "g")}
    verdict = AsymptoticsVerdict(limits, targets, errors, passed, tol, variables, [kept[0], kept[-1]],
                                 skipped, normalization, {"domain": D.to_dict(), "gradient_norm": gnorm,
                                  "levi_normalizing_matrix": [[[z.real, z.imag] for z in row] for row in H]},
                                 variation)
    return rows, verdict


def sweep_csv(rows: Sequence[AsymptoticsRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["delta", *ASYMPTOTIC_TAGS])
    for r in rows:
        w.writerow([repr(r.delta), *(repr(float(r.qty[t])) for t in ASYMPTOTIC_TAGS)])
    return buf.getvalue()


def plot_files(rows: Sequence[AsymptoticsRow]) -> dict:
    """Two-column (delta, quantity) text per tag."""
    return {t: "".join(f"{r.delta!r} {float(r.qty[t])!r}\n" for r in rows) for t in ASYMPTOTIC_TAGS}


# ---------------------------------------------------------------------------
# Ramadanov stability


@dataclass
class RamadanovRow:
    j: int
    contained: bool
    epsilon: float
    sup_diff: Optional[float]


@dataclass
class RamadanovResult:
    rows: list
    monotone: bool
    final: float
    start: Optional[int]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["j", "contained", "epsilon", "sup_diff"])
        for r in self.rows:
            w.writerow([r.j, int(r.contained), repr(r.epsilon), "" if r.sup_diff is None else repr(r.sup_diff)])
        return buf.getvalue()


def expansion_epsilon(inner: DomainSpec, outer: DomainSpec, samples: int = 1000, seed: int = 0) -> float:
    """Smallest sampled eps >= 0 with inner contained in (1 + eps) outer."""
    pts = inner.sample_boundary(samples, np.random.default_rng(seed))
    return max(0.0, max(outer.gauge(z) for z in pts) - 1.0)


def ramadanov_run(family: Sequence[DomainSpec], M_limit, d: int, compact, models=None, N: int = 30,
                  samples: int = 1000, seed: int = 0, eps_max: float = 0.1) -> RamadanovResult:
    """Sup over ``compact`` of |K_{D_j,d}(z,z) - K_{D,d}(z,z)| along the family.

    Indices whose domain does not yet contain the compact are reported and
    skipped.  The run aborts with ``HypothesisError`` if the last domain does
    not contain the compact or its expansion factor is not below ``eps_max``.
    """
    compact = [as_point(z, M_limit.n) for z in compact]
    D = M_limit.domain
    limit_vals = np.array([M_limit.value(z).real for z in compact])
    rows = []
    for j, Dj in enumerate(family, start=1):
        contained = all(Dj.contains(z) for z in compact)
        eps = expansion_epsilon(Dj, D, samples, seed)
        diff = None
        if contained:
            Mj = models[j - 1] if models is not None else kernel_for(Dj, d, N)
            vals = np.array([Mj.value(z).real for z in compact])
            diff = float(np.max(np.abs(vals - limit_vals)))
        rows.append(RamadanovRow(j, contained, float(eps), diff))
    if not rows or not rows[-1].contained:
        raise HypothesisError("the compact set is not contained in the last domain of the family")
    if rows[-1].epsilon >= eps_max:
        raise HypothesisError(f"expansion factor {rows[-1].epsilon:.3g} is not below {eps_max}")
    start = next((r.j for r in rows if r.contained and r.epsilon < eps_max), None)
    diffs = [r.sup_diff for r in rows if r.j >= start]
    monotone = all(b <= a for a, b in zip(diffs, diffs[1:]))
    return RamadanovResult(rows, monotone, rows[-1].sup_diff, start)


# ---------------------------------------------------------------------------
# Completeness


@dataclass
class CompletenessResult:
    s: list
    length: list
    ratio_atanh: list
    C: float
    increasing: bool

    @property
    def passed(self) -> bool:
        return self.C > 0 and self.increasing

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["s", "length", "length_over_atanh"])
        for s, L, q in zip(self.s, self.length, self.ratio_atanh):
            w.writerow([repr(s), repr(L), "" if q is None else repr(q)])
        return buf.getvalue()


def completeness_probe(M, p0, s_values: Sequence[float], rtol: float = 1e-12) -> CompletenessResult:
    """Length L(s) of the radial segment [0, s p0] for increasing s.

    C is the smallest ratio L(s) / log(1/(1-s)) over the positive samples.
    """
    p0 = as_point(p0, M.n)
    s_values = [float(s) for s in s_values]
    if any(b <= a for a, b in zip(s_values, s_values[1:])) or s_values[0] < 0 or s_values[-1] >= 1:
        raise ContractError("s values must increase within [0, 1)")

    def density(ts):
        return np.array([math.sqrt(quadratic(metric_tensor(M, t * p0).G, p0)) for t in ts])

    lengths, acc, prev = [], 0.0, 0.0
    for s in s_values:
        if s > prev:
            acc += adaptive_interval(density, prev, s, rtol=rtol)
        lengths.append(acc)
        prev = s
    ratios = [L / math.atanh(s) if s > 0 else None for s, L in zip(s_values, lengths)]
    logs = [(L, -math.log1p(-s)) for s, L in zip(s_values, lengths) if s > 0]
    C = min(L / g for L, g in logs) if logs else 0.0
    increasing = all(b > a for a, b in zip(lengths, lengths[1:]))
    return CompletenessResult(s_values, lengths, ratios, float(C), increasing)


__all__ = [
    "ASYMPTOTIC_TAGS", "AsymptoticsRow", "AsymptoticsVerdict", "CompletenessResult", "HypothesisError",
    "RamadanovResult", "RamadanovRow", "asymptotic_targets", "asymptotics_sweep", "completeness_probe",
    "expansion_epsilon", "kernel_for", "plot_files", "ramadanov_run", "richardson", "sweep_csv",
]
