import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hyperharmonic.geometry import DomainError
from hyperharmonic.hopf import (
    ClosedFormDiscMap,
    DiscFlowError,
    DiscGrid,
    GridDiscMap,
    circle_map_from,
    disc_affine,
    disc_density,
    disc_flow,
    disc_identity,
    disc_mobius,
    disc_tension,
    hopf_differential,
    hopf_holomorphy_residual,
    phi_n,
    rotation_identity_residual,
    wirtinger_fd,
)

disc_pt = st.tuples(st.floats(0, 0.95), st.floats(0, 2 * np.pi)).map(lambda p: p[0] * np.exp(1j * p[1]))


def warp(th, eps=0.2):
    return np.exp(1j * (th + eps * np.sin(th)))


def test_phi_n_examples():
    assert phi_n(2, 0.3 + 0.1j) == 1
    assert phi_n(3, 0.5) == 1
    assert phi_n(3, -0.5) == -1
    assert phi_n(4, 0.5j) == pytest.approx(-1)
    with pytest.raises(ValueError):
        phi_n(1, 0.1)


@given(disc_pt, st.integers(2, 12))
def test_rotation_identity_property(z, n):
    assert rotation_identity_residual(n, z) <= 1e-12


def test_rotation_identity_rejects_outside_points():
    with pytest.raises(ValueError):
        rotation_identity_residual(3, 1.5)


def test_density_conventions():
    assert disc_density(0.0) == 2.0
    assert disc_density(0.5, "paper") == pytest.approx(1 / 0.75)
    with pytest.raises(DomainError):
        disc_density(1.0)


@given(disc_pt)
def test_holomorphic_and_antiholomorphic_maps_have_zero_hopf(z):
    for F in (disc_identity(), disc_mobius(0.3, 0.7), ClosedFormDiscMap(np.conj, lambda w: 0 * w, lambda w: 1 + 0 * w)):
        assert abs(hopf_differential(F, z)) <= 1e-12


def test_affine_hopf_analytic_against_finite_differences(rng):
    a, b = 0.8, 0.1
    analytic = disc_affine(a, b)
    numeric = ClosedFormDiscMap(lambda z: a * z + b * np.conj(z))
    z = 0.9 * np.sqrt(rng.random(20)) * np.exp(2j * np.pi * rng.random(20))
    w = a * z + b * np.conj(z)
    expected = (2 / (1 - np.abs(w) ** 2)) ** 2 * a * b
    np.testing.assert_allclose(hopf_differential(analytic, z), expected, rtol=1e-13)
    np.testing.assert_allclose(hopf_differential(numeric, z), expected, atol=1e-8)
    np.testing.assert_allclose(hopf_differential(analytic, z, "paper"), expected / 4, rtol=1e-13)
    with pytest.raises(DomainError):
        hopf_differential(analytic, 1.0)


def test_wirtinger_fd_of_conjugate():
    fz, fzb = wirtinger_fd(np.conj, 0.3 + 0.2j)
    assert abs(fz) < 1e-10 and fzb == pytest.approx(1.0)


def test_mobius_validation():
    with pytest.raises(ValueError):
        disc_mobius(1.0)


def test_disc_grid_structure():
    g = DiscGrid(17)
    assert g.spacing == pytest.approx(0.125)
    assert np.all(np.abs(g.nodes) < 1 - 0.05 * g.spacing)
    assert len(g.nodes) == len(g.index)
    with pytest.raises(ValueError):
        DiscGrid(3)


def test_identity_is_exact_fixed_point():
    g = DiscGrid(33)
    F, rep = disc_flow(circle_map_from(disc_identity()), g)
    assert rep.converged and rep.iterations <= 1
    assert F.sup_distance(disc_identity()) < 1e-12
    assert disc_tension(F).max() < 1e-8


@pytest.mark.parametrize("a,angle,n", [(0.3, 0.0, 129), (0.2 + 0.1j, 0.5, 97)])
def test_disc_flow_recovers_mobius(a, angle, n):
    M = disc_mobius(a, angle)
    F, rep = disc_flow(circle_map_from(M), DiscGrid(n))
    assert rep.converged
    assert F.sup_distance(M) < 1e-4
    assert rep.summary()["converged"] is True


def test_holomorphy_residual_is_second_order():
    res = []
    for n in (33, 65):
        g = DiscGrid(n)
        F, rep = disc_flow(warp, g)
        assert rep.converged
        nodes = g.nodes[np.abs(g.nodes) <= 0.5]
        res.append(np.max(hopf_holomorphy_residual(F, nodes)))
    assert 3.0 < res[0] / res[1] < 5.0


def test_positive_control_is_far_from_holomorphic():
    z = 0.4 * np.exp(2j * np.pi * np.arange(10) / 10)
    assert np.max(hopf_holomorphy_residual(disc_affine(1.0, 0.3), z, 1e-4)) > 1.0


def test_grid_map_interpolation_and_table():
    g = DiscGrid(17)
    F = GridDiscMap(g, g.nodes, circle_map_from(disc_identity()))
    z = np.array([0.1 + 0.2j, -0.3j])
    np.testing.assert_allclose(F(z), z, atol=1e-14)
    fz, fzb = F.wirtinger(z)
    np.testing.assert_allclose(fz, 1.0, atol=1e-12)
    np.testing.assert_allclose(fzb, 0.0, atol=1e-12)
    table = F.hopf_table().splitlines()
    assert table[3] == "x,y,abs_hopf" and len(table) == 4 + len(g.nodes)
    with pytest.raises(DomainError):
        F(np.array([0.999 + 0j]))


def test_flow_argument_errors():
    g = DiscGrid(9)
    with pytest.raises(ValueError):
        disc_flow(warp, g, ds=0.0)
    with pytest.raises(DiscFlowError):
        disc_flow(warp, g, initial=lambda z: 2 * np.ones_like(z))
    _, rep = disc_flow(warp, g, max_iter=0)
    assert not rep.converged and rep.iterations == 0
