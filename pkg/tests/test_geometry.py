import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hyperharmonic.geometry import (
    BALL,
    HALFSPACE,
    IDENTITY,
    PAPER_BALL,
    STANDARD,
    BallPoint,
    BallTranslation,
    CayleyTransform,
    DomainError,
    HalfSpacePoint,
    HalfSpaceSimilarity,
    TangentVector,
    apply_isometry,
    ball_distance,
    ball_translate,
    ball_translation_sending,
    cayley,
    cayley_array,
    cayley_pushforward,
    check_points,
    distance,
    exp_map,
    geodesic_step,
    get_preset,
    green,
    green_profile,
    green_r,
    halfspace_distance,
    lambda_radial_weight,
    lambda_weight,
    log_map,
    plane_action,
)

from conftest import ball_points, halfspace_points

coord = st.floats(-0.55, 0.55, allow_nan=False)
ball_pt = st.tuples(coord, coord, coord).map(np.array)
hs_pt = st.tuples(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.05, 5)).map(np.array)


def test_presets_and_densities():
    assert get_preset("paper_ball") is PAPER_BALL
    assert get_preset(STANDARD) is STANDARD
    with pytest.raises(ValueError):
        get_preset("nope")
    x = np.array([0.3, 0.0, 0.4])
    assert STANDARD.density(x, BALL) == pytest.approx(2 / 0.75)
    assert PAPER_BALL.density(x, BALL) == pytest.approx(1 / 0.75)
    assert STANDARD.density(np.array([1.0, 2.0, 0.5]), HALFSPACE) == pytest.approx(2.0)


def test_point_validation():
    with pytest.raises(DomainError):
        BallPoint([1.0, 0.0, 0.0])
    with pytest.raises(DomainError):
        HalfSpacePoint([0.0, 0.0], 0.0)
    with pytest.raises(DomainError):
        check_points(np.array([np.nan, 0, 0]), BALL)
    check_points(np.array([1.0, 0.0, 0.0]), BALL, allow_boundary=True)


def test_distance_known_values():
    # radial distance from the origin: 2 artanh(rho) for curvature -1
    p, q = BallPoint([0, 0, 0]), BallPoint([0.5, 0, 0])
    assert distance(STANDARD, p, q) == pytest.approx(2 * np.arctanh(0.5), rel=1e-14)
    assert distance(PAPER_BALL, p, q) == pytest.approx(np.arctanh(0.5), rel=1e-14)
    # vertical distance in the half-space is log of the height ratio
    a, b = HalfSpacePoint([0, 0], 1.0), HalfSpacePoint([0, 0], np.e**2)
    assert distance(STANDARD, a, b) == pytest.approx(2.0, rel=1e-14)
    with pytest.raises(ValueError):
        distance(STANDARD, p, a)


@given(hs_pt, hs_pt)
def test_cayley_is_isometry(p, q):
    d_half = halfspace_distance(p, q)
    d_ball = ball_distance(cayley_array(p), cayley_array(q))
    assert d_ball == pytest.approx(d_half, rel=1e-8, abs=1e-10)


@given(ball_pt)
def test_cayley_involution(x):
    np.testing.assert_allclose(cayley_array(cayley_array(x)), x, atol=1e-12)


def test_cayley_landmarks():
    np.testing.assert_allclose(cayley_array(np.zeros(3)), [0, 0, 1], atol=1e-15)
    np.testing.assert_allclose(cayley_array(np.array([1.0, 0, 0])), [1, 0, 0], atol=1e-15)
    p = cayley(BallPoint([0.1, 0.2, 0.3]))
    assert isinstance(p, HalfSpacePoint)
    assert isinstance(cayley(p), BallPoint)


def test_cayley_pushforward_matches_finite_differences(rng):
    y = ball_points(rng, 5)
    v = rng.normal(size=(5, 3))
    h = 1e-6
    fd = (cayley_array(y + h * v) - cayley_array(y - h * v)) / (2 * h)
    np.testing.assert_allclose(cayley_pushforward(y, v), fd, atol=1e-7)


@given(ball_pt, ball_pt, ball_pt)
def test_ball_translation_is_isometry(a, x, y):
    d0 = ball_distance(x, y)
    d1 = ball_distance(ball_translate(a, x), ball_translate(a, y))
    assert d1 == pytest.approx(d0, rel=1e-8, abs=1e-10)
    np.testing.assert_allclose(ball_translate(-a, ball_translate(a, x)), x, atol=1e-10)


@given(ball_pt, ball_pt)
def test_exp_log_roundtrip_ball(p, q):
    v = log_map(p, q, BALL)
    np.testing.assert_allclose(exp_map(p, v, BALL), q, atol=1e-9)
    # |v| in the metric equals the distance
    assert STANDARD.density(p, BALL) * np.linalg.norm(v) == pytest.approx(ball_distance(p, q), rel=1e-8, abs=1e-10)


@given(hs_pt, hs_pt)
def test_exp_log_roundtrip_halfspace(p, q):
    v = log_map(p, q, HALFSPACE)
    np.testing.assert_allclose(exp_map(p, v, HALFSPACE), q, rtol=1e-7, atol=1e-7)
    norm = np.linalg.norm(v) / p[2]
    assert norm == pytest.approx(halfspace_distance(p, q), rel=1e-7, abs=1e-9)


def test_geodesic_step_distance():
    p = HalfSpacePoint([0.2, -0.1], 0.7)
    v = TangentVector(p, [0.3, 0.1, -0.2])
    q = geodesic_step(STANDARD, p, v, 2.0)
    assert distance(STANDARD, p, q) == pytest.approx(2.0 * v.norm(), rel=1e-10)
    assert geodesic_step(STANDARD, p, v, 0.0) is p
    with pytest.raises(DomainError):
        geodesic_step(STANDARD, p, v, np.inf)


def test_isometries_preserve_distance(rng):
    pts = halfspace_points(rng, 10)
    g = HalfSpaceSimilarity(2.0, 0.4, (0.3, -1.0)) @ BallTranslation((0.1, 0.2, -0.3))
    img, chart = g.apply(pts, HALFSPACE)
    assert chart == HALFSPACE
    d0 = halfspace_distance(pts[:-1], pts[1:])
    np.testing.assert_allclose(halfspace_distance(img[:-1], img[1:]), d0, rtol=1e-10)
    back, _ = g.inverse().apply(img, HALFSPACE)
    np.testing.assert_allclose(back, pts, atol=1e-10)
    out, chart = CayleyTransform().apply(pts, HALFSPACE)
    assert chart == BALL
    np.testing.assert_array_equal(apply_isometry(IDENTITY, (pts, HALFSPACE))[0], pts)


def test_apply_isometry_on_points():
    q = apply_isometry(CayleyTransform(), BallPoint([0, 0, 0]))
    np.testing.assert_allclose(q.as_array(), [0, 0, 1], atol=1e-15)


def test_plane_action_is_similarity():
    g = HalfSpaceSimilarity(2.0, np.pi / 2, (1.0, 0.0))
    np.testing.assert_allclose(plane_action(g, [1.0 + 0j, 1j]), [1 + 2j, -1 + 0j], atol=1e-14)
    with pytest.raises(ValueError):
        plane_action(CayleyTransform(), [0j])


def test_ball_translation_sending():
    src = np.array([1.0, 0.0, 0.0])
    dst = np.array([0.0, 0.6, 0.8])
    g = ball_translation_sending(src, dst)
    np.testing.assert_allclose(g.apply(src, BALL)[0], dst, atol=1e-9)
    with pytest.raises(ValueError):
        ball_translation_sending(src, -src)


def test_green_profile_closed_form():
    r, rho = 0.8, np.array([0.1, 0.4, 0.79])
    expected = (1 / rho + rho - 1 / r - r) / 3
    np.testing.assert_allclose(green_profile(r, rho), expected, rtol=1e-12)
    assert green_profile(r, 0.9) == 0.0
    assert green_profile(r, 0.0) == np.inf
    assert green_r(0.5, np.array([0.0, 0.3, 0.0])) == pytest.approx(green_profile(0.5, 0.3))
    assert green(BallPoint([0.5, 0, 0])) == pytest.approx(0.25 / 1.5)
    with pytest.raises(ValueError):
        green_profile(1.5, 0.2)


def test_lambda_weights():
    assert lambda_weight(np.array([0.5, 0, 0])) == pytest.approx(0.75**-3)
    assert lambda_radial_weight(0.5) == pytest.approx(3 * 0.25 / 0.75**3)
    with pytest.raises(DomainError):
        lambda_weight(np.array([1.0, 0, 0]))


@given(arrays(float, 3, elements=st.floats(-0.5, 0.5)))
def test_tangent_norm_scales_with_preset(v):
    p = BallPoint([0.1, 0.0, 0.2])
    t = TangentVector(p, v)
    assert t.norm(PAPER_BALL) == pytest.approx(0.5 * t.norm(STANDARD), abs=1e-15)
