import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from hyperharmonic.boundary import Linear
from hyperharmonic.calculus import (
    ClosedForm,
    DegenerateConfiguration,
    InChart,
    comparison_check,
    derivatives,
    distance_field,
    distance_squared_field,
    energy_from_jacobian,
    euclidean_scale,
    frame_coefficients,
    identity_map,
    in_chart,
    interior_distortion,
    interior_energy,
    laplacian_scalar,
    local_geometry,
    tension,
    vertical_scaling,
)
from hyperharmonic.extension import LinearHarmonicMap
from hyperharmonic.geometry import BALL, HALFSPACE, PAPER_BALL, STANDARD, BallPoint, HalfSpacePoint, ball_translate

from conftest import ball_points, halfspace_points


def test_derivatives_of_polynomial(rng):
    F = ClosedForm(lambda z: np.stack([z[..., 0] ** 2 * z[..., 2], z[..., 1] * z[..., 2], z[..., 2] ** 3], -1))
    p = halfspace_points(rng, 5)
    _, jac, hess = derivatives(F, p)
    x, y, t = p.T
    np.testing.assert_allclose(jac[:, 0], np.column_stack([2 * x * t, 0 * x, x * x]), atol=1e-8)
    np.testing.assert_allclose(jac[:, 2, 2], 3 * t * t, rtol=1e-8)
    np.testing.assert_allclose(hess[:, 0, 0, 2], 2 * x, atol=1e-6)
    np.testing.assert_allclose(hess[:, 2, 2, 2], 6 * t, rtol=1e-6)


def test_euclidean_scale():
    assert euclidean_scale(np.array([0.0, 0.0, 0.5]), BALL) == pytest.approx(0.75)
    assert euclidean_scale(np.array([3.0, 1.0, 0.5]), HALFSPACE) == 0.5


def test_energy_from_jacobian_identity():
    assert energy_from_jacobian(np.eye(3), 2.0, 2.0) == pytest.approx(1.5)


@pytest.mark.parametrize("lam", [0.5, 2.0, 3.0])
def test_vertical_scaling_closed_forms(lam, rng):
    # hand computation: tau = (0, 0, 2 t (1/lam - lam)), so |tau| = 2 |1 - lam^2| / lam^2
    F = vertical_scaling(lam)
    p = halfspace_points(rng, 10)
    vec, norm = tension(F, p)
    np.testing.assert_allclose(norm, 2 * abs(1 - lam**2) / lam**2, rtol=1e-7)
    np.testing.assert_allclose(vec[:, 2], 2 * p[:, 2] * (1 / lam - lam), rtol=1e-7)
    np.testing.assert_allclose(interior_energy(F, p), (2 / lam**2 + 1) / 2, rtol=1e-9)
    np.testing.assert_allclose(interior_distortion(F, p), max(lam, 1 / lam), rtol=1e-9)


def test_isometries_are_harmonic_in_both_charts(rng):
    a = np.array([0.2, -0.1, 0.3])
    F = ClosedForm(lambda x: ball_translate(a, x), BALL, "translation")
    p = ball_points(rng, 10, 0.7)
    geo = local_geometry(F, p)
    assert geo.tension_norm.max() < 1e-6
    np.testing.assert_allclose(geo.energy, 1.5, atol=1e-7)
    np.testing.assert_allclose(geo.jacobian_determinant, 1.0, atol=1e-7)
    G = in_chart(F, HALFSPACE)
    assert isinstance(G, InChart) and in_chart(G, BALL) is F
    assert tension(G, halfspace_points(rng, 5))[1].max() < 1e-6


def test_scalar_point_api():
    H = LinearHarmonicMap(Linear(2.0, 0.0, 0.0, 1.0))
    p = HalfSpacePoint([0.1, 0.2], 0.8)
    vec, norm = tension(H, p)
    assert vec.shape == (3,) and norm < 1e-6
    assert interior_energy(H, p) == pytest.approx(1.5, abs=1e-8)
    with pytest.raises(ValueError):
        tension(H, BallPoint([0.0, 0.0, 0.1]))


@pytest.mark.parametrize(
    "u,expected",
    [
        (lambda z: z[..., 0], lambda p: 0.0 * p[:, 0]),
        (lambda z: z[..., 2], lambda p: -p[:, 2]),
        (lambda z: np.log(z[..., 2]), lambda p: -2.0 + 0.0 * p[:, 0]),
    ],
    ids=["x1", "t", "log_t"],
)
def test_laplacian_halfspace_closed_forms(u, expected, rng):
    # Delta u = t^2 (u_xx + u_yy + u_tt) - t u_t for curvature -1
    p = halfspace_points(rng, 8)
    np.testing.assert_allclose(laplacian_scalar(u, p, chart=HALFSPACE), expected(p), atol=1e-6)


def test_laplacian_scales_with_preset(rng):
    p = ball_points(rng, 5, 0.6)
    u = lambda z: np.sum(z * z, axis=-1)  # noqa: E731
    np.testing.assert_allclose(laplacian_scalar(u, p, preset=PAPER_BALL, chart=BALL),
                               4.0 * laplacian_scalar(u, p, preset=STANDARD, chart=BALL), rtol=1e-12)


def test_laplacian_of_squared_distance_from_origin():
    # d = 2 artanh(rho); Delta f(d) = f'' + 2 coth(d) f' in curvature -1, here f = d^2
    rho = 0.4
    d = 2 * np.arctanh(rho)
    u = lambda z: (2 * np.arctanh(np.linalg.norm(z, axis=-1))) ** 2  # noqa: E731
    got = laplacian_scalar(u, np.array([[rho, 0.0, 0.0]]), chart=BALL)
    assert got[0] == pytest.approx(2 + 4 * d / np.tanh(d), rel=1e-7)


def test_distance_fields():
    F, G = identity_map(), vertical_scaling(np.e)
    p = np.array([[0.0, 0.0, 1.0], [1.0, 2.0, 0.5]])
    np.testing.assert_allclose(distance_field(F, G, p), 1.0, rtol=1e-14)
    np.testing.assert_allclose(distance_squared_field(F, G)(p), 1.0, rtol=1e-14)


def test_frame_coefficients_of_isometry():
    # orthonormal columns: the first two frame directions carry total mass 2
    fc = frame_coefficients(identity_map(), vertical_scaling(2.0), HalfSpacePoint([0.3, 0.0], 1.0))
    assert fc.alpha_sum == pytest.approx(2.0, abs=1e-8)
    assert fc.d == pytest.approx(np.log(2.0))
    with pytest.raises(DegenerateConfiguration):
        frame_coefficients(identity_map(), identity_map(), np.array([[0.0, 0.0, 1.0]]))


@given(st.floats(0.3, 3.0), st.floats(-1, 1), st.floats(-1, 1), st.floats(0.2, 2))
def test_comparison_inequality_linear_pairs(a, x, y, t):
    F = LinearHarmonicMap(Linear(a, 0.0, 0.0, 1.0))
    G = LinearHarmonicMap(Linear(1.0, 0.4, 0.0, 1.5))
    p = np.array([[x, y, t]])
    assume(distance_field(F, G, p)[0] > 1e-2)
    rec = comparison_check(F, G, p, q_const=0.1)
    assert rec.margin_full[0] >= -1e-6
    assert rec.margin_1[0] >= -1e-6
    assert set(rec.margins) == {"full", "crude", "energy"}


def test_comparison_requires_standard_preset():
    with pytest.raises(ValueError):
        comparison_check(identity_map(), vertical_scaling(2.0), np.array([[0, 0, 1.0]]), preset=PAPER_BALL)
    with pytest.raises(DegenerateConfiguration):
        comparison_check(identity_map(), identity_map(), np.array([[0, 0, 1.0]]))
