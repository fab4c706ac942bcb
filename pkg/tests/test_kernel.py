import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from nskernel.core import Ball, ContractError, DiagonalBall, Polydisc, SmoothReinhardt
from nskernel.kernel import (UncertifiedWarning, ball_constant, ball_moment, build_model,
                             closed_kernel, kernel_jet, load_model, save_model, selberg_constant)

BALL_T = SmoothReinhardt(2, (((1, 0), 1.0), ((0, 1), 1.0), ((0, 0), -1.0)))
SR = SmoothReinhardt(2, (((1, 0), 1.0), ((0, 1), 1.0), ((2, 0), 0.1), ((0, 0), -1.0)))


def _disc_weighted_moment(k, d):
    # weight K_0^{-d} = (pi (1 - r^2)^2)^d on the unit disc
    f = lambda r: 2 * math.pi * r ** (2 * k + 1) * (math.pi * (1 - r * r) ** 2) ** d
    return integrate.quad(f, 0, 1, epsabs=0, epsrel=1e-13)[0]


def _ball2_weighted_moment(a1, a2, d):
    # K_0 = 2 / (pi^2 (1 - |z|^2)^3) on the unit ball of C^2, polar in each variable
    f = lambda r2, r1: ((2 * math.pi) ** 2 * r1 ** (2 * a1 + 1) * r2 ** (2 * a2 + 1)
                        * (math.pi**2 / 2 * (1 - r1 * r1 - r2 * r2) ** 3) ** d)
    return integrate.dblquad(f, 0, 1, 0, lambda r1: math.sqrt(1 - r1 * r1), epsabs=0, epsrel=1e-12)[0]


@pytest.mark.parametrize("n,alpha", [(1, (0,)), (1, (3,)), (2, (0, 0)), (2, (2, 1)), (3, (1, 0, 2))])
def test_unweighted_ball_moments(n, alpha):
    oracle = math.pi**n * math.prod(math.factorial(a) for a in alpha) / math.factorial(n + sum(alpha))
    assert ball_moment(n, 0, alpha) == pytest.approx(oracle, rel=1e-13)


@pytest.mark.parametrize("k,d", [(0, 1), (1, 1), (3, 2), (5, 1)])
def test_weighted_disc_moments(k, d):
    assert ball_moment(1, d, (k,)) == pytest.approx(_disc_weighted_moment(k, d), rel=1e-11)


@pytest.mark.parametrize("alpha,d", [((0, 0), 1), ((1, 2), 1), ((2, 0), 2)])
def test_weighted_ball_moments(alpha, d):
    assert ball_moment(2, d, alpha) == pytest.approx(_ball2_weighted_moment(*alpha, d), rel=1e-9)


def test_disc_weighted_moment_value():
    # gamma_0 for the disc with d = 1 is pi^2 / 3
    assert ball_moment(1, 1, (0,)) == pytest.approx(math.pi**2 / 3, rel=1e-15)


def test_ball_constant():
    assert ball_constant(1, 0) == pytest.approx(1.0)
    assert ball_constant(1, 1) == pytest.approx(3.0)
    assert ball_constant(2, 1) == pytest.approx(math.gamma(6) / (2 * math.gamma(4)))


def test_build_trivial_model():
    M = build_model(Ball(1), 0, 0)
    assert len(M.alphas) == 1
    assert M.moments[(0,)] == pytest.approx(math.pi, rel=1e-15)


def test_disc_series_value():
    M = build_model(Ball(1), 0, 40)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert M.value(0.5).real == pytest.approx(16 / (9 * math.pi), rel=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.floats(-0.2, 0.2), st.floats(-0.2, 0.2), st.floats(-0.2, 0.2), st.floats(-0.2, 0.2),
       st.integers(0, 2))
def test_series_matches_closed_form(x1, y1, x2, y2, d):
    z = np.array([x1 + 1j * y1, x2 + 1j * y2])
    w = np.array([y2 + 0.1j, x1 - 0.2j * y1])
    for D in (Ball(2), DiagonalBall(2, (2, 1.5)), Polydisc(2)):
        M = build_model(D, d, 40)
        K = closed_kernel(D, d)
        assert M.value(z, w) == pytest.approx(K.value(z, w), rel=1e-10)


def test_polydisc_closed_value():
    assert closed_kernel(Polydisc(2), 1).value([0, 0]).real == pytest.approx(9 / math.pi**4, rel=1e-15)


def test_jet_against_closed_form():
    # d/dz d/dwbar of 1/(pi (1 - z wbar)^2) at 0 is 2/pi for the disc
    jet = kernel_jet(build_model(Ball(1), 0, 30), [0])
    assert jet[((1,), (1,))].real == pytest.approx(2 / math.pi, rel=1e-13)
    jet = kernel_jet(closed_kernel(Ball(2), 1), [0, 0])
    assert jet[((1, 0), (1, 0))].real == pytest.approx(6 * ball_constant(2, 1) * 4 / math.pi**4, rel=1e-13)


def test_reinhardt_quadrature_reproduces_ball():
    M = build_model(BALL_T, 0, 12)
    for a, g in M.moments.items():
        assert g == pytest.approx(ball_moment(2, 0, a), rel=1e-11)


def test_reinhardt_weighted_model_close_to_ball():
    M = build_model(BALL_T, 1, 6)
    for a, g in M.moments.items():
        assert g == pytest.approx(ball_moment(2, 1, a), rel=max(10 * M.weight_error, 1e-9))


def test_certificate_and_warning():
    M = build_model(SR, 0, 30)
    assert 0 < M.r_eval < 1 and M.tail_bound < 1e-10
    with pytest.warns(UncertifiedWarning):
        M.value([0, 0.95])
    assert M.jet_tail([0, 0.5]) < M.jet_tail([0, 0.8])


def test_guardrails():
    with pytest.raises(ContractError):
        build_model(Ball(4), 0, 2)
    with pytest.raises(ContractError):
        build_model(Ball(1), 0, 61)
    with pytest.raises(ContractError):
        build_model(Ball(1), -1, 2)


def test_save_load_roundtrip(tmp_path):
    M = build_model(SR, 0, 10)
    save_model(M, tmp_path / "m.txt")
    L = load_model(tmp_path / "m.txt")
    assert L.domain == M.domain and L.N == M.N
    assert np.array_equal(L.log_gammas, M.log_gammas)
    assert L.r_eval == M.r_eval and L.tail_bound == M.tail_bound
    with open(tmp_path / "bad.txt", "w") as fh:
        fh.write("not a model\n")
    with pytest.raises(ContractError):
        load_model(tmp_path / "bad.txt")


@pytest.mark.parametrize("D,s,expected", [(Ball(1), 2, 3.0), (Ball(2), 2, 10.0), (Polydisc(2), 2, 9.0)])
def test_selberg_constants(D, s, expected):
    for w in ([0.0] * D.n, [0.2] + [0.1j] * (D.n - 1)):
        assert selberg_constant(D, s, w) == pytest.approx(expected, rel=1e-8)
