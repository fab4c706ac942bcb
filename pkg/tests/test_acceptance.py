"""The nine acceptance criteria, each at its stated tolerance."""

import math
import time

import numpy as np
import pytest
from conftest import record
from scipy.stats import unitary_group

from nskernel.core import Ball, DiagonalBall, Polydisc, QuadricRho, SmoothReinhardt
from nskernel.experiments import DEFAULT_DELTAS, asymptotics_sweep, completeness_probe, ramadanov_run
from nskernel.extremal import extremal_identity_report, monotonicity_check
from nskernel.geometry import (cayley, cayley_data, linear_map, pinchuk_normalize, siegel_kernel,
                               transform_kernel_residual, transform_metric_residual)
from nskernel.kernel import ball_constant, build_model, closed_kernel, selberg_constant
from nskernel.metric import beta_invariant, metric_tensor, ricci_curvature, sectional_curvature

SR = SmoothReinhardt(2, (((1, 0), 1.0), ((0, 1), 1.0), ((2, 0), 0.1), ((0, 0), -1.0)))


def _rel(a, b):
    return abs(a - b) / abs(b)


def test_criterion_1_ball_constants():
    worst, slowest = 0.0, 0.0
    for n, d in [(1, 0), (1, 1), (2, 0), (2, 1), (3, 1)]:
        t0 = time.perf_counter()
        M = build_model(Ball(n), d, 40)
        z = np.zeros(n)
        v = np.r_[1.0, np.full(n - 1, 0.5j)]
        c = ball_constant(n, d)
        k = (d + 1) * (n + 1)
        m = metric_tensor(M, z)
        errs = [
            _rel(m.K, c * (math.factorial(n) / math.pi**n) ** (d + 1)),
            float(np.abs(m.G - k * np.eye(n)).max()) / k,
            _rel(beta_invariant(M, z), (d + 1) ** n * (n + 1) ** n * c ** (-1 / (d + 1)) * math.pi**n
                 / math.factorial(n)),
            _rel(sectional_curvature(M, z, v), -2 / k),
            _rel(ricci_curvature(M, z, v), -1 / (d + 1)),
        ]
        slowest = max(slowest, time.perf_counter() - t0)
        worst = max(worst, max(errs))
    ok = worst < 1e-8 and slowest < 10
    record(1, "ball constants at N=40", ok, f"max rel err {worst:.2e}, slowest case {slowest:.2f} s")
    assert ok


def test_criterion_2_polydisc_product():
    closed = closed_kernel(Polydisc(2), 1).value([0, 0]).real
    disc = closed_kernel(Ball(1), 1).value([0]).real
    errs = [_rel(closed, 9 / math.pi**4), _rel(disc * disc, 9 / math.pi**4), _rel(closed, disc * disc)]
    ok = max(errs) < 1e-12
    record(2, "polydisc 9/pi^4", ok, f"max rel err {max(errs):.2e}")
    assert ok


def test_criterion_3_selberg():
    t0 = time.perf_counter()
    worst = 0.0
    for D, expected in ((Ball(1), 3.0), (Ball(2), 10.0)):
        ws = [np.zeros(D.n), np.full(D.n, 0.3 / D.n) + 0.1j, np.r_[-0.5, np.zeros(D.n - 1)]]
        vals = [selberg_constant(D, 2, w) for w in ws]
        worst = max(worst, max(_rel(x, expected) for x in vals), (max(vals) - min(vals)) / expected)
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-6 and elapsed < 30
    record(3, "Selberg constants 3 and 10", ok, f"max rel err {worst:.2e}, {elapsed:.2f} s")
    assert ok


def test_criterion_4_transformation_rule():
    rng = np.random.default_rng(2024)

    def ball_point():
        x = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        return x / np.linalg.norm(x) * rng.uniform(0, 0.9)

    worst = 0.0
    for d in (0, 1):
        Kb = closed_kernel(Ball(2), d)
        maps = [
            # Ball(2) onto the ball of radius 1/2
            (Kb, linear_map(np.eye(2) / 2), closed_kernel(DiagonalBall(2, (4, 4)), d), False),
            (Kb, linear_map(unitary_group.rvs(2, random_state=7)), Kb, False),
            # Siegel domain onto Ball(2)
            (siegel_kernel(2, d), cayley_data(2), Kb, True),
        ]
        for _ in range(20):
            z, w = ball_point(), ball_point()
            v = rng.standard_normal(2) + 1j * rng.standard_normal(2)
            for src, F, dst, siegel in maps:
                a, b = (cayley(z), cayley(w)) if siegel else (z, w)
                worst = max(worst, transform_kernel_residual(F, src, dst, a, b),
                            transform_metric_residual(F, src, dst, a, v))
    ok = worst < 1e-9
    record(4, "transformation rules (dilation, unitary, Cayley)", ok, f"max residual {worst:.2e} over 20 pairs")
    assert ok


def test_criterion_5_extremal_identities():
    worst_res, worst_drift = 0.0, 0.0
    for d in (0, 1):
        M = build_model(Ball(2), d, 30)
        for p in ([0, 0], [0.3, 0.2]):
            rep = extremal_identity_report(M, p, [1, 0.4 - 0.2j])
            worst_res = max(worst_res, max(i["residual"] for i in rep["identities"].values()))
            worst_drift = max(worst_drift, rep["drift"])
    pairs = [(DiagonalBall(2, (4, 1)), Ball(2)), (Ball(2), Polydisc(2)), (Ball(2), DiagonalBall(2, (0.5, 0.5))),
             (DiagonalBall(2, (2, 2)), DiagonalBall(2, (1, 2))), (DiagonalBall(2, (1, 4)), DiagonalBall(2, (1, 2)))]
    mono = [monotonicity_check(closed_kernel(a, 1), closed_kernel(b, 1), [0.1, 0.05j], [1, 0.5])["ok"]
            for a, b in pairs]
    ok = worst_res < 1e-7 and worst_drift < 1e-6 and all(mono)
    record(5, "extremal identities on Ball(2)", ok,
           f"max residual {worst_res:.2e}, drift {worst_drift:.2e}, monotone pairs {sum(mono)}/5")
    assert ok


def test_criterion_6_boundary_sweeps():
    t0 = time.perf_counter()
    worst_closed = 0.0
    for D in (Ball(2), DiagonalBall(2, (4, 1))):
        for d in (0, 1):
            K = closed_kernel(D, d)
            for v in ([0, 1], [1, 0], [1, 1j]):
                _, V = asymptotics_sweep(D, K, [0, 1], v, DEFAULT_DELTAS, tol=1e-6)
                worst_closed = max(worst_closed, max(V.errors.values()))
    M = build_model(SR, 0, 30)
    worst_series, window = 0.0, None
    for v in ([0, 1], [1, 0], [1, 1]):
        _, V = asymptotics_sweep(SR, M, [0, 1], v, [0.6, 0.5, 0.4, 0.35, 0.3, 0.25, 0.2], tol=1e-2)
        worst_series = max(worst_series, max(V.errors[t] for t in "abde"))
        window = V.window
    elapsed = time.perf_counter() - t0
    ok = worst_closed < 1e-6 and worst_series < 1e-2 and elapsed < 300
    record(6, "boundary asymptotics", ok, f"closed max err {worst_closed:.2e}, series (a,b,d,e) max err "
           f"{worst_series:.2e} on window {window}, {elapsed:.1f} s")
    assert ok


def test_criterion_7_ramadanov_discs():
    radii = [1 - 2.0**-j for j in range(1, 13)]
    family = [DiagonalBall(1, (r**-2,)) for r in radii]
    grid = [[r * np.exp(2j * math.pi * k / 24)] for r in np.linspace(0, 0.5, 6) for k in range(24)]
    res = ramadanov_run(family, closed_kernel(Ball(1), 1), 1, grid)
    ok = res.monotone and res.final < 1e-5
    record(7, "Ramadanov disc family", ok,
           f"monotone={res.monotone}, final sup diff {res.final:.3e} at j=12 (needs < 1e-5)")
    assert res.monotone
    assert res.final < 1e-5


def test_criterion_8_completeness():
    t0 = time.perf_counter()
    res = completeness_probe(closed_kernel(Ball(2), 1), [1, 0], [0.1, 0.5, 0.9, 0.99, 0.999])
    elapsed = time.perf_counter() - t0
    worst = max(_rel(q, math.sqrt(6)) for q in res.ratio_atanh)
    ok = worst < 1e-6 and res.length[-1] > 6 and res.passed and elapsed < 5
    record(8, "completeness probe", ok, f"ratio err {worst:.2e}, L(0.999)={res.length[-1]:.4f}, {elapsed:.2f} s")
    assert ok


def test_criterion_9_pinchuk():
    pin = pinchuk_normalize(QuadricRho(2), [0, 0])
    ident = max(float(np.abs(A - np.eye(2)).max())
                for A in (pin.premap, pin.P_matrix, pin.Lambda, pin.U, pin.linear_part))
    jets, images = [], []
    for D in (Ball(2), DiagonalBall(2, (4, 1))):
        p = pinchuk_normalize(D, [0, 1])
        jets.append(p.normal_form_residual())
        images.append(max(p.normal_image_residual(t) for t in (0.1, 0.01, 0.001)))
    ok = ident < 1e-12 and max(jets) < 1e-6 and max(images) < 1e-9
    record(9, "Pinchuk normalisation", ok, f"quadric {ident:.1e}, jet {max(jets):.1e}, normal image {max(images):.1e}")
    assert ok


@pytest.mark.parametrize("j", [12, 17])
def test_disc_family_gap_is_intrinsic(j):
    # at z = 0 the exact difference is 3/pi^2 (r^-4 - 1), independent of numerics
    r = 1 - 2.0**-j
    gap = ramadanov_run([DiagonalBall(1, (r**-2,))], closed_kernel(Ball(1), 1), 1, [[0]]).final
    assert gap == pytest.approx(3 / math.pi**2 * (r**-4 - 1), rel=1e-9)
