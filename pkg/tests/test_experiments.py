import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nskernel.core import Ball, ContractError, DiagonalBall, SmoothReinhardt
from nskernel.experiments import (DEFAULT_DELTAS, HypothesisError, asymptotic_targets, asymptotics_sweep,
                                  completeness_probe, expansion_epsilon, plot_files, ramadanov_run,
                                  richardson, sweep_csv)
from nskernel.kernel import ball_constant, build_model, closed_kernel

SR = SmoothReinhardt(2, (((1, 0), 1.0), ((0, 1), 1.0), ((2, 0), 0.1), ((0, 0), -1.0)))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=1, max_size=4))
def test_richardson_exact_on_polynomials(coef):
    xs = [0.5, 0.25, 0.125, 0.0625][: len(coef)]
    ys = [sum(c * x**k for k, c in enumerate(coef)) for x in xs]
    assert richardson(xs, ys) == pytest.approx(coef[0], abs=1e-11)


def test_targets():
    t = asymptotic_targets(2, 1, 1.0, 1.0)
    assert t["a"] == pytest.approx(ball_constant(2, 1) * (2 / (8 * math.pi**2)) ** 2, rel=1e-15)
    assert t["b"] == pytest.approx(36 / 8)
    assert t["d"] == pytest.approx(0.5 * math.sqrt(6))
    assert t["f"] == pytest.approx(-1 / 3) and t["g"] == pytest.approx(-0.5)
    # tangential direction on DiagonalBall(2, (4, 1)): Levi value 4
    assert asymptotic_targets(2, 0, 0.0, 4.0)["e"] == pytest.approx(math.sqrt(6), rel=1e-15)
    assert asymptotic_targets(1, 0, 1.0, 0.0)["a"] == pytest.approx(1 / (4 * math.pi), rel=1e-15)


def test_disc_rows_match_closed_form():
    rows, verdict = asymptotics_sweep(Ball(1), closed_kernel(Ball(1), 0), [1], [1], DEFAULT_DELTAS)
    for r in rows:
        assert r.qty["a"] == pytest.approx(1 / (math.pi * (2 - r.delta) ** 2), rel=1e-12)
    assert verdict.limits["a"] == pytest.approx(1 / (4 * math.pi), rel=1e-9)
    assert verdict.all_passed


@pytest.mark.parametrize("D", [Ball(2), DiagonalBall(2, (4, 1))])
@pytest.mark.parametrize("d", [0, 1])
@pytest.mark.parametrize("v", [[0, 1], [1, 0], [1, 1j]])
def test_closed_kernel_sweeps_pass(D, d, v):
    rows, verdict = asymptotics_sweep(D, closed_kernel(D, d), [0, 1], v, DEFAULT_DELTAS)
    assert verdict.all_passed, verdict.errors
    assert max(verdict.invariant_variation.values()) < 1e-6


def test_tangential_target_on_ellipsoid():
    _, verdict = asymptotics_sweep(DiagonalBall(2, (4, 1)), closed_kernel(DiagonalBall(2, (4, 1)), 0),
                                   [0, 1], [1, 0], DEFAULT_DELTAS)
    assert verdict.targets["e"] == pytest.approx(math.sqrt(6), rel=1e-15)
    assert verdict.limits["e"] == pytest.approx(math.sqrt(6), rel=1e-6)


@pytest.fixture(scope="module")
def sr_model():
    return build_model(SR, 0, 30)


def test_series_sweep_window(sr_model):
    deltas = [0.6, 0.5, 0.4, 0.35, 0.3, 0.25, 0.2]
    rows, verdict = asymptotics_sweep(SR, sr_model, [0, 1], [1, 1], deltas)
    assert verdict.skipped == [0.25, 0.2]
    assert verdict.window == [0.6, 0.3]
    for t in ("a", "b", "d", "e"):
        assert verdict.errors[t] < 1e-2, t
    text = sweep_csv(rows)
    assert text.splitlines()[0] == "delta,a,b,c,d,e,f,g" and len(text.splitlines()) == 6
    assert set(plot_files(rows)) == set("abcdefg")


def test_sweep_errors(sr_model):
    K = closed_kernel(Ball(2), 0)
    with pytest.raises(ContractError):
        asymptotics_sweep(Ball(2), K, [0, 1], [1, 0], [0.1, 0.2])
    with pytest.raises(ContractError):
        asymptotics_sweep(Ball(2), K, [0, 0.5], [1, 0], DEFAULT_DELTAS)
    with pytest.raises(ContractError):
        asymptotics_sweep(Ball(2), K, [0, 1], [0, 0], DEFAULT_DELTAS)
    with pytest.raises(ContractError):
        asymptotics_sweep(SR, sr_model, [0, 1], [0, 1], [0.2, 0.1, 0.05, 0.01])


def _disc_kernel_d1(r, z):
    # K_{D_r,1}(z) = 3 r^4 / (pi^2 (r^2 - |z|^2)^4)
    return 3 * r**4 / (math.pi**2 * (r * r - abs(z) ** 2) ** 4)


def test_ramadanov_discs_match_exact_difference():
    radii = [1 - 2.0**-j for j in range(1, 9)]
    family = [DiagonalBall(1, (r**-2,)) for r in radii]
    grid = [0.5 * np.exp(2j * math.pi * k / 16) for k in range(16)] + [0.25, 0]
    res = ramadanov_run(family, closed_kernel(Ball(1), 1), 1, grid)
    assert [r.contained for r in res.rows] == [False] + [True] * 7
    assert res.start == 2 and res.monotone
    for r, row in zip(radii[1:], res.rows[1:]):
        oracle = max(abs(_disc_kernel_d1(r, z) - _disc_kernel_d1(1, z)) for z in grid)
        assert row.sup_diff == pytest.approx(oracle, rel=1e-10)


def test_ramadanov_constant_family():
    res = ramadanov_run([Ball(2)] * 3, closed_kernel(Ball(2), 0), 0, [[0, 0], [0.3, 0.2j]])
    assert [r.sup_diff for r in res.rows] == [0.0, 0.0, 0.0]
    assert res.final == 0.0 and res.monotone


def test_ramadanov_hypothesis_failures():
    K = closed_kernel(Ball(1), 0)
    with pytest.raises(HypothesisError):
        ramadanov_run([DiagonalBall(1, (4,))], K, 0, [[0.6]])
    with pytest.raises(HypothesisError):
        ramadanov_run([DiagonalBall(1, (0.5,))], K, 0, [[0.1]])


def test_expansion_epsilon():
    assert expansion_epsilon(DiagonalBall(1, (0.25,)), Ball(1)) == pytest.approx(1.0, rel=1e-12)
    assert expansion_epsilon(DiagonalBall(1, (4,)), Ball(1)) == 0.0


@pytest.mark.parametrize("n,d,ratio", [(1, 0, math.sqrt(2)), (2, 1, math.sqrt(6))])
def test_completeness_on_balls(n, d, ratio):
    p0 = np.zeros(n)
    p0[0] = 1
    res = completeness_probe(closed_kernel(Ball(n), d), p0, [0.0, 0.5, 0.9, 0.99, 0.999])
    assert res.length[0] == 0.0 and res.ratio_atanh[0] is None
    assert res.ratio_atanh[1:] == pytest.approx([ratio] * 4, rel=1e-9)
    assert res.passed and res.C > 0
    assert res.to_csv().splitlines()[0] == "s,length,length_over_atanh"


def test_completeness_rejects_bad_samples():
    with pytest.raises(ContractError):
        completeness_probe(closed_kernel(Ball(1), 0), [1], [0.5, 0.2])
    with pytest.raises(ContractError):
        completeness_probe(closed_kernel(Ball(1), 0), [1], [0.5, 1.0])
