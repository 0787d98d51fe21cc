"""The sets where the extension is nearly harmonic (X) and where maps are far apart (Y)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..boundary import BoundaryMap
from ..calculus import DEFAULT_STEP, in_chart, local_geometry
from ..extension import GoodExtensionMap, QuadratureSpec
from ..flow import MapField
from ..geometry import BALL, HALFSPACE, STANDARD, cayley_array, chart_distance
from .sphere import SphereSampler, green_kernel, radial_weighted_integral


@dataclass(frozen=True)
class XSetParams:
    """Distortion bound ``K1`` and tension bound ``eps`` of the set ``X``."""

    K1: float
    eps: float

    def __post_init__(self):
        if not self.K1 >= 1:
            raise ValueError("K1 must be at least 1")
        if not self.eps >= 0:
            raise ValueError("eps must be non-negative")


@dataclass(frozen=True)
class XMembership:
    """Margins of the three strict inequalities; positive margins mean the condition holds."""

    tension_margin: np.ndarray
    distortion_margin: np.ndarray
    energy_margin: np.ndarray

    @property
    def member(self):
        return (self.tension_margin > 0) & (self.distortion_margin > 0) & (self.energy_margin > 0)


def as_interior_map(F, quad: QuadratureSpec = QuadratureSpec()):
    """Interior map from a boundary map (its extension), a field, or an interior map."""
    if isinstance(F, BoundaryMap):
        return GoodExtensionMap(F, quad)
    if isinstance(F, MapField):
        return F.as_interior_map()
    return F


def x_membership(f, p, params: XSetParams, quad: QuadratureSpec = QuadratureSpec(), h: float = DEFAULT_STEP,
                 chart: str | None = None) -> XMembership:
    """Test ``|tau| < eps``, ``dist < K1`` and ``e > 1`` for the extension of ``f`` at ``p``.

    ``f`` is a boundary map (its extension is used) or an interior map.  The
    three quantities are isometry invariant, so points may be given in either
    chart (``chart`` defaults to that of ``p``, or the half-space for arrays).
    """
    F = as_interior_map(f, quad)
    if hasattr(p, "chart"):
        chart, pts = p.chart, p.as_array()[None]
    else:
        pts = np.atleast_2d(np.asarray(p, dtype=float))
        chart = chart or HALFSPACE
    if chart != F.chart:
        pts = cayley_array(pts)
    geo = local_geometry(F, pts, h, STANDARD)
    return XMembership(params.eps - geo.tension_norm, params.K1 - geo.distortion, geo.energy - 1.0)


def _ball_points(rho, sampler):
    return np.asarray(rho, dtype=float)[..., None, None] * sampler.nodes


def x_measure(f, rho: float, params: XSetParams, sampler: SphereSampler = SphereSampler(),
              quad: QuadratureSpec = QuadratureSpec(), h: float = DEFAULT_STEP) -> float:
    """Sampler fraction of directions ``zeta`` with ``rho zeta`` in ``X``."""
    if not 0.0 <= rho < 1.0:
        raise ValueError("radius must lie in [0, 1)")
    pts = _ball_points(rho, sampler).reshape(-1, 3)
    member = x_membership(f, pts, params, quad, h, chart=BALL).member
    return float(member @ sampler.weights)


def phi_step_integral(f, C1: float, C2: float, params: XSetParams, r: float,
                      sampler: SphereSampler = SphereSampler(), quad: QuadratureSpec = QuadratureSpec(),
                      h: float = DEFAULT_STEP, n: int = 64) -> float:
    """``int G_r Phi d lambda`` with ``Phi = C2`` on ``X`` and ``-C1`` off it."""
    if C1 < 0 or C2 < 0:
        raise ValueError("C1 and C2 must be non-negative")

    def step(pts):
        shape = pts.shape[:-1]
        member = x_membership(f, pts.reshape(-1, 3), params, quad, h, chart=BALL).member
        return np.where(member, C2, -C1).reshape(shape)

    return radial_weighted_integral(green_kernel(r), step, sampler, n)


# ---------------------------------------------------------------------------
# the set Y where two maps are far apart


@dataclass(frozen=True)
class DistanceField:
    """``d(x) = d(F(x), G(x))`` on the ball together with its supremum estimate.

    ``sup_kind`` is ``"grid-sup"`` (maximum over the nodes of a flow field) or
    ``"sample-sup"`` (maximum over the points where ``d`` has been evaluated).
    """

    F: object
    G: object
    preset: object = STANDARD

    def __call__(self, pts):
        pts = np.asarray(pts, dtype=float)
        return chart_distance(self.F(pts), self.G(pts), BALL, self.preset)


def distance_between(F, G, quad: QuadratureSpec = QuadratureSpec(), preset=STANDARD) -> DistanceField:
    """Distance field between two maps, both viewed in the ball chart."""
    return DistanceField(in_chart(as_interior_map(F, quad), BALL), in_chart(as_interior_map(G, quad), BALL), preset)


def grid_sup(d: DistanceField, field: MapField):
    """Maximum of ``d`` over the nodes of ``field`` and the node where it is attained."""
    nodes = field.grid.nodes
    vals = chart_distance(d.F(nodes), field.values, BALL, d.preset)
    k = int(np.argmax(vals))
    return float(vals[k]), nodes[k]


@dataclass(frozen=True)
class YMeasure:
    fraction: float
    sup: float
    sup_kind: str
    radius: float
    degenerate: bool

    @property
    def complement(self) -> float:
        return 1.0 - self.fraction


def y_measure(F, G, r: float, sampler: SphereSampler = SphereSampler(), sup: float | None = None,
              quad: QuadratureSpec = QuadratureSpec(), tol: float = 1e-6) -> YMeasure:
    """Fraction of ``zeta`` with ``d(r zeta) >= sup(d) / 2``.

    ``F`` and ``G`` are boundary maps, interior maps or flow fields.  When
    ``G`` is a flow field the supremum is taken over its nodes (grid-sup)
    unless given; otherwise over the sample points.  A supremum below ``tol``
    is reported as degenerate with fraction ``nan``.
    """
    if isinstance(G, MapField):
        _check_radius(G, r)
    d = distance_between(F, G, quad)
    vals = d(r * sampler.nodes)
    if sup is not None:
        kind = "supplied"
    elif isinstance(G, MapField):
        sup, _ = grid_sup(d, G)
        kind = "grid-sup"
    else:
        sup, kind = float(vals.max()), "sample-sup"
    if sup < tol:
        return YMeasure(float("nan"), sup, kind, r, True)
    frac = float((vals >= 0.5 * sup) @ sampler.weights)
    return YMeasure(frac, sup, kind, r, False)


def _check_radius(field: MapField, r: float):
    grid = field.grid
    if grid.chart != BALL:
        raise ValueError("flow field must live on a ball grid")
    limit = grid.radius - np.sqrt(3.0) * grid.h_min
    if r > limit:
        raise ValueError(f"radius {r} beyond the interpolation range {limit:.6g} of the grid")


__all__ = [
    "XSetParams", "XMembership", "x_membership", "x_measure", "phi_step_integral",
    "DistanceField", "distance_between", "grid_sup", "YMeasure", "y_measure", "as_interior_map",
]
