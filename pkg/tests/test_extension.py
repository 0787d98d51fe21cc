import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from hyperharmonic.boundary import Linear, MobiusBoundary, RadialPower
from hyperharmonic.extension import (
    GoodExtensionMap,
    LinearHarmonicMap,
    QuadratureError,
    QuadratureSpec,
    gauss_weierstrass,
    good_extension,
    good_extension_array,
    linear_harmonic,
    linear_harmonic_array,
    refine_quadrature,
)
from hyperharmonic.geometry import HalfSpacePoint, halfspace_distance, DomainError

from conftest import halfspace_points


def test_quadrature_spec_validation():
    with pytest.raises(ValueError):
        QuadratureSpec(nodes_per_axis=3)
    q = QuadratureSpec(8)
    offsets, weights = q.rule()
    assert weights.sum() == pytest.approx(1.0, abs=1e-14)
    assert q.with_nodes(16).nodes_per_axis == 16


def test_gauss_weierstrass_moments():
    # E|x + t y|^2 = |x|^2 + 2 t^2 for a standard 2-D Gaussian y
    x = np.array([[0.3, -0.4], [1.0, 2.0]])
    t = np.array([0.5, 2.0])
    val = gauss_weierstrass(lambda p: np.sum(p * p, axis=-1), x, t, QuadratureSpec(4))
    np.testing.assert_allclose(val, np.sum(x * x, axis=1) + 2 * t * t, rtol=1e-13)
    vec = gauss_weierstrass(lambda p: p, x, t, QuadratureSpec(4))
    np.testing.assert_allclose(vec, x, atol=1e-13)
    with pytest.raises(ValueError):
        gauss_weierstrass(lambda p: p[..., 0], x, np.array([0.0, 1.0]))


def test_gauss_weierstrass_rejects_non_finite():
    with pytest.raises(QuadratureError):
        gauss_weierstrass(lambda p: 1.0 / p[..., 0] * np.inf, np.zeros((1, 2)), 1.0, QuadratureSpec(4))


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(0.1, 3),
       st.floats(0.5, 2), st.floats(-1, 1), st.floats(-1, 1), st.floats(0.5, 2))
def test_linear_maps_extend_to_linear_harmonic(x, y, t, a, b, c, d):
    if a * d - b * c <= 0.1:
        return
    L = Linear(a, b, c, d)
    z = np.array([x, y, t])
    np.testing.assert_allclose(good_extension_array(L, z, QuadratureSpec(4)), linear_harmonic_array(L, z),
                               rtol=1e-12, atol=1e-12)


def test_radial_power_against_independent_quadrature():
    f = RadialPower(2.0)
    x, t = np.array([0.4, -0.3]), 0.7
    got = good_extension_array(f, np.array([x[0], x[1], t]), QuadratureSpec(128))
    # closed form of the vertical part: e(f) = 5 |p|^2
    assert got[2] == pytest.approx(t / np.sqrt(2) * np.sqrt(5 * (x @ x + 2 * t * t)), rel=1e-12)
    for k in range(2):
        def integrand(v, u, k=k):
            p = x + t * np.array([u, v])
            return (p * np.linalg.norm(p))[k] * np.exp(-(u * u + v * v) / 2) / (2 * np.pi)
        ref, _ = integrate.dblquad(integrand, -9, 9, -9, 9, epsabs=1e-11)
        # the conical kink of |p| at the origin limits the Hermite rule to algebraic convergence
        assert got[k] == pytest.approx(ref, abs=2e-5)


def test_similarity_equivariance(rng):
    f = RadialPower(1.5)
    A = MobiusBoundary(2.0 * np.exp(0.3j), 0.5 - 1j, 0.0, 1.0)
    pts = halfspace_points(rng, 8)
    lhs = good_extension_array(A @ f, pts)
    base = good_extension_array(f, pts)
    s = 2.0
    rot = np.array([[np.cos(0.3), -np.sin(0.3)], [np.sin(0.3), np.cos(0.3)]])
    expected = np.column_stack([s * base[:, :2] @ rot.T + np.array([0.5, -1.0]), s * base[:, 2]])
    np.testing.assert_allclose(lhs, expected, rtol=1e-10, atol=1e-12)


def test_extension_requires_map_fixing_infinity():
    with pytest.raises(ValueError):
        good_extension_array(MobiusBoundary(0.0, 1.0, 1.0, 0.0), np.array([0.0, 0.0, 1.0]))
    with pytest.raises(DomainError):
        good_extension_array(Linear(), np.array([0.0, 0.0, -1.0]))


def test_singular_node_jitter():
    # with an odd rule a node sits exactly on the singular point at the origin
    f = RadialPower(0.5)
    out = good_extension_array(f, np.array([0.0, 0.0, 1.0]), QuadratureSpec(5))
    assert np.all(np.isfinite(out))


def test_refinement_and_point_api():
    f = RadialPower(2.0)
    z = HalfSpacePoint([0.2, 0.1], 0.5)
    q = QuadratureSpec(4, refine_target=1e-10, max_nodes_per_axis=64)
    q2 = refine_quadrature(f, z.as_array()[None], q)
    assert q2.nodes_per_axis >= 8
    assert refine_quadrature(f, z.as_array()[None], QuadratureSpec(4)).nodes_per_axis == 4
    p = good_extension(f, z, q)
    ref = good_extension_array(f, z.as_array(), QuadratureSpec(64))
    np.testing.assert_allclose(p.as_array(), ref, rtol=1e-9)


def test_map_wrappers(rng):
    L = Linear(1.0, 0.5, 0.0, 2.0)
    pts = halfspace_points(rng, 6)
    assert GoodExtensionMap(L, QuadratureSpec(4)).chart == "halfspace"
    d = halfspace_distance(GoodExtensionMap(L, QuadratureSpec(4))(pts), LinearHarmonicMap(L)(pts))
    assert d.max() < 1e-12
    q = linear_harmonic(L, HalfSpacePoint([1.0, 1.0], 2.0))
    np.testing.assert_allclose(q.as_array(), [1.5, 2.0, 2.0 * np.sqrt(5.25 / 2)])
