import numpy as np
import pytest

from hyperharmonic.boundary import Linear, RadialPower
from hyperharmonic.calculus import identity_map, in_chart, vertical_scaling
from hyperharmonic.extension import GoodExtensionMap, LinearHarmonicMap, QuadratureSpec
from hyperharmonic.flow import GridDomain, MapField, init_field
from hyperharmonic.geometry import BALL, HalfSpacePoint, cayley
from hyperharmonic.verify import (
    SphereSampler,
    XSetParams,
    as_interior_map,
    distance_between,
    grid_sup,
    phi_step_integral,
    x_measure,
    x_membership,
    y_measure,
)
from hyperharmonic.verify.sphere import green_ball_integral

Q4 = QuadratureSpec(4)


def test_params_validation():
    with pytest.raises(ValueError):
        XSetParams(0.5, 0.1)
    with pytest.raises(ValueError):
        XSetParams(2.0, -0.1)


def test_membership_margins_for_linear_map():
    m = x_membership(Linear(2.0, 0.0, 0.0, 1.0), HalfSpacePoint([0.1, 0.2], 0.5), XSetParams(3.0, 0.05), Q4)
    assert m.member.all()
    assert m.distortion_margin[0] == pytest.approx(1.0, abs=1e-6)
    assert m.energy_margin[0] == pytest.approx(0.5, abs=1e-6)
    assert m.tension_margin[0] == pytest.approx(0.05, abs=1e-6)
    # the same point seen in the ball chart gives the same margins
    mb = x_membership(Linear(2.0, 0.0, 0.0, 1.0), cayley(HalfSpacePoint([0.1, 0.2], 0.5)), XSetParams(3.0, 0.05), Q4)
    assert mb.distortion_margin[0] == pytest.approx(m.distortion_margin[0], abs=1e-6)


def test_membership_fails_on_distortion():
    m = x_membership(Linear(2.0, 0.0, 0.0, 1.0), np.array([[0.0, 0.0, 1.0]]), XSetParams(1.5, 0.05), Q4)
    assert not m.member.any()


def test_as_interior_map_dispatch():
    L = Linear()
    assert isinstance(as_interior_map(L), GoodExtensionMap)
    f = init_field(L, GridDomain.ball(0.3, 5), Q4)
    assert as_interior_map(f).field is f
    F = identity_map()
    assert as_interior_map(F) is F


def test_x_measure_limits_for_radial_power():
    # supplementary to the acceptance trend: the fraction rises to 1 close to the sphere
    params = XSetParams(4.0, 0.05)
    s = SphereSampler(count=256)
    fr = [x_measure(RadialPower(2.0), rho, params, s) for rho in (0.95, 0.99, 0.995, 0.9999)]
    assert fr == sorted(fr)
    assert fr[0] < 0.5 < fr[-1]
    assert fr[-1] == 1.0
    with pytest.raises(ValueError):
        x_measure(RadialPower(2.0), 1.0, params, s)


def test_phi_step_integral_constant_cases():
    params = XSetParams(4.0, 0.05)
    s = SphereSampler(count=64)
    r = 0.4
    # every point of a linear extension is in X, so Phi = C2 identically
    val = phi_step_integral(Linear(2.0, 0.0, 0.0, 1.0), 2.0, 0.3, params, r, s, Q4, n=16)
    assert val == pytest.approx(0.3 * green_ball_integral(r, 16), rel=1e-12)
    # with K1 below the distortion no point is in X
    val = phi_step_integral(Linear(3.0, 0.0, 0.0, 1.0), 2.0, 0.3, XSetParams(2.0, 0.05), r, s, Q4, n=16)
    assert val == pytest.approx(-2.0 * green_ball_integral(r, 16), rel=1e-12)
    with pytest.raises(ValueError):
        phi_step_integral(Linear(), -1.0, 0.3, params, r, s, Q4)


def test_y_measure_constant_distance():
    # vertical scaling by e moves every point distance 1
    y = y_measure(identity_map(), vertical_scaling(np.e), 0.5, SphereSampler(count=128))
    assert y.fraction == 1.0 and y.complement == 0.0
    assert y.sup == pytest.approx(1.0)
    assert y.sup_kind == "sample-sup" and not y.degenerate


def test_y_measure_degenerate_and_supplied():
    y = y_measure(identity_map(), identity_map(), 0.5, SphereSampler(count=32))
    assert y.degenerate and np.isnan(y.fraction)
    y = y_measure(identity_map(), vertical_scaling(np.e), 0.5, SphereSampler(count=32), sup=10.0)
    assert y.sup_kind == "supplied" and y.fraction == 0.0


def test_y_measure_with_field_uses_grid_sup():
    L = Linear(2.0, 0.0, 0.0, 1.0)
    field = init_field(L, GridDomain.ball(0.5, 9), Q4)
    shifted = MapField(field.grid, in_chart(vertical_scaling(np.e), BALL)(field.values), field.preset)
    d = distance_between(L, shifted, Q4)
    sup, arg = grid_sup(d, shifted)
    assert sup == pytest.approx(1.0, abs=1e-9)
    y = y_measure(L, shifted, 0.25, SphereSampler(count=64), quad=Q4)
    assert y.sup_kind == "grid-sup"
    assert y.fraction == pytest.approx(1.0)
    with pytest.raises(ValueError, match="interpolation range"):
        y_measure(L, shifted, 0.45, SphereSampler(count=64), quad=Q4)


def test_distance_between_point_api():
    d = distance_between(identity_map(), LinearHarmonicMap(Linear()))
    # ball-chart evaluation of two views of the same isometry
    assert d(np.array([[0.1, -0.2, 0.3]]))[0] == pytest.approx(0.0, abs=1e-7)
