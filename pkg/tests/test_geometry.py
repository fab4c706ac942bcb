import json
import math

import numpy as np
import pytest
from scipy.stats import unitary_group

from nskernel.core import Ball, ContractError, DiagonalBall, QuadricRho, SmoothReinhardt
from nskernel.geometry import (NotStronglyPseudoconvexError, PoleError, b_star, cayley, cayley_data,
                               cayley_det, dilation, frames_json, linear_map, pinchuk_normalize,
                               scaling_frame, siegel_kernel, transform_kernel_residual,
                               transform_metric_residual, transform_min_integral_residual, translation)
from nskernel.kernel import ball_constant, closed_kernel

SR = SmoothReinhardt(2, (((1, 0), 1.0), ((0, 1), 1.0), ((2, 0), 0.1), ((0, 0), -1.0)))


class _FlippedLevi(QuadricRho):
    """2 Re z_n - |'z|^2: the Levi form is negative at 0."""

    def value(self, z):
        z = np.asarray(z, complex)
        return float(2 * z[-1].real - np.sum(np.abs(z[:-1]) ** 2))

    def grad_z(self, z):
        z = np.asarray(z, complex)
        g = -np.conj(z)
        g[-1] = 1
        return g

    def hess_zzbar(self, z):
        return np.diag(np.r_[-np.ones(self.n - 1), 0.0]).astype(complex)


def test_cayley_examples():
    assert np.allclose(cayley(b_star(2)), 0)
    z = np.array([0.1 + 0.2j, -0.5])
    assert np.allclose(cayley(cayley(z)), z, atol=1e-15)
    for n in (1, 2, 3):
        assert cayley_det(b_star(n)) == pytest.approx((-1) ** n * 2 ** (-(n + 1) / 2), rel=1e-15)
        assert cayley_data(n).det_jacobian(b_star(n)) == pytest.approx(cayley_det(b_star(n)), rel=1e-14)
    with pytest.raises(PoleError):
        cayley([0.3, 1.0])


def test_cayley_derivative_at_b_star():
    # Phi'(b*) = -diag(1/sqrt 2, ..., 1/sqrt 2, 1/2)
    assert np.allclose(cayley_data(3).jac(b_star(3)), -np.diag([2**-0.5, 2**-0.5, 0.5]), atol=1e-15)


def test_biholo_probes():
    rng = np.random.default_rng(3)
    pts = [0.3 * (rng.standard_normal(2) + 1j * rng.standard_normal(2)) for _ in range(5)]
    pin = pinchuk_normalize(DiagonalBall(2, (4, 1)), [0.2, math.sqrt(1 - 0.16)]).biholo()
    maps = [cayley_data(2), linear_map(unitary_group.rvs(2, random_state=1)), translation([0.1, -0.2j]),
            dilation(0.3, 2), pin, cayley_data(2).compose(dilation(0.5, 2))]
    for F in maps:
        pr = F.probe(pts)
        assert pr["jacobian"] < 1e-6 and pr["inverse"] < 1e-9, F.name


def test_siegel_kernel_at_b_star():
    for n, d in ((1, 0), (2, 0), (2, 1), (3, 2)):
        target = ball_constant(n, d) * (math.factorial(n) / (2 ** (n + 1) * math.pi**n)) ** (d + 1)
        assert siegel_kernel(n, d).value(b_star(n)).real == pytest.approx(target, rel=1e-13)


@pytest.mark.parametrize("d", [0, 1])
def test_cayley_transforms_ball_to_siegel(d):
    rng = np.random.default_rng(11 + d)
    F = cayley_data(2)
    Kb, Ks = closed_kernel(Ball(2), d), siegel_kernel(2, d)
    for _ in range(5):
        z, w = (0.5 * (rng.standard_normal(2) + 1j * rng.standard_normal(2)) / 2 for _ in range(2))
        assert transform_kernel_residual(F, Kb, Ks, z, w) < 1e-12
        assert transform_metric_residual(F, Kb, Ks, z, [1, 0.3j]) < 1e-12


def test_dilation_disc_to_small_disc():
    # Ball(1) -> {4|z|^2 < 1} by z -> z / 2
    F = linear_map([[0.5]])
    K1, K2 = closed_kernel(Ball(1), 1), closed_kernel(DiagonalBall(1, (4,)), 1)
    assert transform_kernel_residual(F, K1, K2, [0], [0]) < 1e-10
    assert transform_kernel_residual(F, K1, K2, [0.3j], [-0.2]) < 1e-10
    assert transform_metric_residual(F, K1, K2, [0], [1]) < 1e-9


def test_identity_and_unitary_residuals():
    K = closed_kernel(Ball(2), 1)
    Id = linear_map(np.eye(2))
    assert transform_kernel_residual(Id, K, K, [0.1, 0.2], [0.1, 0.2]) == 0
    assert transform_metric_residual(Id, K, K, [0.1, 0.2], [1, 1]) == 0
    Urot = linear_map(unitary_group.rvs(2, random_state=5))
    assert transform_metric_residual(Urot, K, K, [0, 0], [1, 2j]) < 1e-12


@pytest.mark.parametrize("kind", ["I0", "I1", "I2", "I"])
def test_min_integral_transformation(kind):
    # DiagonalBall(2, (4, 1)) -> Ball(2) by diag(2, 1)
    F = linear_map(np.diag([2.0, 1.0]))
    for d in (0, 1):
        Ks, Kd = closed_kernel(DiagonalBall(2, (4, 1)), d), closed_kernel(Ball(2), d)
        assert transform_min_integral_residual(F, Ks, Kd, kind, [0.1, 0.2j], [1, 0.5]) < 1e-8


def test_pinchuk_quadric_is_identity():
    pin = pinchuk_normalize(QuadricRho(3), [0, 0, 0])
    I = np.eye(3)
    for A in (pin.premap, pin.P_matrix, pin.Lambda, pin.U, pin.linear_part):
        assert np.abs(A - I).max() < 1e-12
    assert np.abs(pin.a1_coeffs).max() < 1e-12


@pytest.mark.parametrize("D,zeta", [
    (Ball(2), [0, 1]),
    (DiagonalBall(2, (4, 1)), [0, 1]),
    (Ball(2), [0.6, 0.8j]),
    (Ball(3), [0.6, 0, 0.8j]),
    (DiagonalBall(2, (4, 1)), [0.2, math.sqrt(0.84)]),
    (SR, [0, 1]),
])
def test_pinchuk_normal_form(D, zeta):
    pin = pinchuk_normalize(D, zeta)
    assert np.abs(pin.forward(zeta)).max() < 1e-15
    assert pin.normal_form_residual() < 1e-12
    for t in (1e-1, 1e-3):
        assert pin.normal_image_residual(t) < 1e-12
    w = np.array([0.01 + 0.02j] + [0.0] * (D.n - 1))
    assert np.allclose(pin.forward(pin.inverse(w)), w, atol=1e-15)


def test_pinchuk_diagonal_ball_lambda():
    pin = pinchuk_normalize(DiagonalBall(2, (4, 1)), [0, 1])
    assert np.allclose(pin.Lambda, np.diag([2, 1]), atol=1e-14)
    H = pin.normal_form_jet()["H"]
    assert H[0, 0].real == pytest.approx(1.0, rel=1e-14)


def test_pinchuk_continuity():
    D = DiagonalBall(2, (4, 1))
    base = pinchuk_normalize(D, [0, 1]).linear_part
    gaps = []
    for k in range(5):
        s = 0.4 * 2.0**-k
        gaps.append(np.abs(pinchuk_normalize(D, [s / 2, math.sqrt(1 - s * s)]).linear_part - base).max())
    assert all(b < a for a, b in zip(gaps, gaps[1:])) and gaps[-1] < gaps[0] / 8


def test_pinchuk_errors():
    with pytest.raises(NotStronglyPseudoconvexError):
        pinchuk_normalize(_FlippedLevi(2), [0, 0])
    with pytest.raises(ContractError):
        pinchuk_normalize(Ball(2), [0, 0.5])


def test_scaling_frame_on_quadric():
    t = 0.01
    fr = scaling_frame(QuadricRho(2), [0, 0], t)
    assert fr.eta == pytest.approx(t, rel=1e-15)
    assert np.allclose(fr.image_of_p(), [0, -1], atol=1e-9)
    assert fr.det_T == pytest.approx(t**-1.5, rel=1e-14)
    rng = np.random.default_rng(0)
    Z = rng.standard_normal((200, 2)) + 1j * rng.standard_normal((200, 2))
    Z = Z / np.maximum(np.linalg.norm(Z, axis=1, keepdims=True), 1)
    Z = np.vstack([Z, [[0, 1], [0, -1j]]])
    limit = lambda z: 2 * z[1].real + abs(z[0]) ** 2
    for z in Z:
        assert fr.scaled_rho(z) == pytest.approx(limit(z) + t * abs(z[1]) ** 2, abs=1e-13)
    assert max(abs(fr.scaled_rho(z) - limit(z)) for z in Z) == pytest.approx(t, rel=1e-12)


def test_scaling_frame_on_ball():
    ratios = []
    for delta in (0.1, 0.01, 0.001):
        fr = scaling_frame(Ball(2), [0, 1], delta)
        assert np.allclose(fr.image_of_p(), [0, -1], atol=1e-9)
        assert fr.det_T == pytest.approx(fr.eta ** (-1.5), rel=1e-12)
        ratios.append(fr.eta / fr.delta)
    assert ratios == pytest.approx([1, 1, 1], rel=1e-12)


def test_scaled_defining_function_converges():
    # on |z| <= 1 the scaled ball approaches the Siegel quadric
    D = DiagonalBall(2, (4, 1))
    Z = [np.array([a, b]) for a in (0, 0.5, 1j) for b in (0, -0.5, 0.5j, -1)]
    sups = []
    for delta in (1e-2, 1e-3, 1e-4):
        fr = scaling_frame(D, [0, 1], delta)
        sups.append(max(abs(fr.scaled_rho(z) - (2 * z[1].real + abs(z[0]) ** 2)) for z in Z))
    assert sups[0] > sups[1] > sups[2]
    assert sups[2] < 10 * math.sqrt(1e-4)


def test_frames_json_roundtrip():
    frames = [scaling_frame(Ball(2), [0, 1], 0.1, j=0), scaling_frame(Ball(2), [0, 1], 0.05, j=1)]
    data = json.loads(frames_json(frames))
    assert [f["j"] for f in data] == [0, 1]
    assert data[0]["delta"] == pytest.approx(0.1)
    assert len(data[0]["T"]) == 2 and len(data[0]["T"][0][0]) == 2
