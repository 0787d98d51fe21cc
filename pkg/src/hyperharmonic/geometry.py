"""Models of hyperbolic 3-space: the Poincare ball and the upper half-space.

Points are handled in two forms.  The small dataclasses :class:`BallPoint`
and :class:`HalfSpacePoint` validate a single point and are what the public
single-point functions take.  Everything numerical underneath works on plain
``(..., 3)`` arrays tagged with a chart name (``"ball"`` or ``"halfspace"``);
a half-space point is stored as ``(x1, x2, t)``.

The metric normalisation is explicit.  ``STANDARD`` is curvature -1
(ball density ``2/(1-|x|^2)``, half-space density ``1/t``); ``PAPER_BALL``
halves both densities, which is the normalisation under which the Green
identity with ``G_r(x) = (1/3) int_{|x|}^r (1-s^2)/s^2 ds`` holds exactly.
Exponential and logarithm maps in chart coordinates do not depend on the
preset (a constant rescaling of the metric leaves the connection unchanged).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

BALL = "ball"
HALFSPACE = "halfspace"
CHARTS = (BALL, HALFSPACE)

_CAYLEY_CENTER = np.array([0.0, 0.0, -1.0])


class DomainError(ValueError):
    """A point lies outside the model it is claimed to belong to."""


# ---------------------------------------------------------------------------
# metric presets


@dataclass(frozen=True)
class MetricPreset:
    """Constant rescaling of the curvature -1 hyperbolic metric.

    ``scale`` multiplies the curvature -1 density, so distances scale by
    ``scale`` as well.
    """

    name: str
    scale: float

    def ball_density_at(self, x):
        x = np.asarray(x, dtype=float)
        return 2.0 * self.scale / _one_minus_sq(x)

    def halfspace_density_at(self, z):
        z = np.asarray(z, dtype=float)
        return self.scale / z[..., 2]

    def density(self, coords, chart: str):
        if chart == BALL:
            return self.ball_density_at(coords)
        if chart == HALFSPACE:
            return self.halfspace_density_at(coords)
        raise ValueError(f"unknown chart {chart!r}")

    def log_density_gradient(self, coords, chart: str):
        """Euclidean gradient of ``log density`` (independent of ``scale``)."""
        coords = np.asarray(coords, dtype=float)
        if chart == BALL:
            return 2.0 * coords / _one_minus_sq(coords)[..., None]
        out = np.zeros_like(coords)
        out[..., 2] = -1.0 / coords[..., 2]
        return out


STANDARD = MetricPreset("STANDARD", 1.0)
PAPER_BALL = MetricPreset("PAPER_BALL", 0.5)
PRESETS = {p.name: p for p in (STANDARD, PAPER_BALL)}


def get_preset(preset: Union[str, MetricPreset]) -> MetricPreset:
    if isinstance(preset, MetricPreset):
        return preset
    try:
        return PRESETS[preset.upper()]
    except KeyError:
        raise ValueError(f"unknown metric preset {preset!r}") from None


# ---------------------------------------------------------------------------
# points


@dataclass(frozen=True)
class BallPoint:
    coords: np.ndarray

    chart = BALL

    def __post_init__(self):
        c = np.array(self.coords, dtype=float).reshape(3)
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)
        check_points(c, BALL)

    @property
    def rho(self) -> float:
        return float(np.linalg.norm(self.coords))

    def as_array(self) -> np.ndarray:
        return self.coords


@dataclass(frozen=True)
class HalfSpacePoint:
    x: np.ndarray
    t: float

    chart = HALFSPACE

    def __post_init__(self):
        x = np.array(self.x, dtype=float).reshape(2)
        x.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "t", float(self.t))
        check_points(self.as_array(), HALFSPACE)

    @classmethod
    def from_array(cls, z) -> "HalfSpacePoint":
        z = np.asarray(z, dtype=float)
        return cls(z[:2], z[2])

    def as_array(self) -> np.ndarray:
        return np.array([self.x[0], self.x[1], self.t])


ModelPoint = Union[BallPoint, HalfSpacePoint]


def make_point(coords, chart: str) -> ModelPoint:
    if chart == BALL:
        return BallPoint(coords)
    if chart == HALFSPACE:
        return HalfSpacePoint.from_array(coords)
    raise ValueError(f"unknown chart {chart!r}")


@dataclass(frozen=True)
class TangentVector:
    """Chart-coordinate vector attached to a model point."""

    base: ModelPoint
    components: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        c = np.array(self.components, dtype=float).reshape(3)
        c.setflags(write=False)
        object.__setattr__(self, "components", c)

    def norm(self, preset=STANDARD) -> float:
        preset = get_preset(preset)
        dens = preset.density(self.base.as_array(), self.base.chart)
        return float(dens * np.linalg.norm(self.components))


def _one_minus_sq(x):
    r = np.linalg.norm(x, axis=-1)
    return (1.0 - r) * (1.0 + r)


def check_points(coords, chart: str, allow_boundary: bool = False) -> None:
    coords = np.asarray(coords, dtype=float)
    if not np.all(np.isfinite(coords)):
        raise DomainError("non-finite coordinates")
    if chart == BALL:
        r = np.linalg.norm(coords, axis=-1)
        bad = r > 1.0 if allow_boundary else r >= 1.0
        if np.any(bad):
            raise DomainError(f"point outside the unit ball (|x| = {np.max(r):.17g})")
    elif chart == HALFSPACE:
        t = coords[..., 2]
        bad = t < 0.0 if allow_boundary else t <= 0.0
        if np.any(bad):
            raise DomainError(f"point outside the upper half-space (t = {np.min(t):.17g})")
    else:
        raise ValueError(f"unknown chart {chart!r}")


# ---------------------------------------------------------------------------
# distances


def ball_distance(p, q, preset=STANDARD):
    """Vectorised distance between ball points."""
    preset = get_preset(preset)
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    num = np.linalg.norm(p - q, axis=-1)
    den = np.sqrt(_one_minus_sq(p) * _one_minus_sq(q))
    return preset.scale * 2.0 * np.arcsinh(num / den)


def halfspace_distance(p, q, preset=STANDARD):
    """Vectorised distance between half-space points ``(x1, x2, t)``."""
    preset = get_preset(preset)
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    num = np.linalg.norm(p - q, axis=-1)
    den = 2.0 * np.sqrt(p[..., 2] * q[..., 2])
    return preset.scale * 2.0 * np.arcsinh(num / den)


def chart_distance(p, q, chart: str, preset=STANDARD):
    if chart == BALL:
        return ball_distance(p, q, preset)
    if chart == HALFSPACE:
        return halfspace_distance(p, q, preset)
    raise ValueError(f"unknown chart {chart!r}")


def distance(preset, p: ModelPoint, q: ModelPoint) -> float:
    """Hyperbolic distance between two points of the same chart."""
    if p.chart != q.chart:
        raise ValueError("points are in different charts; convert one with cayley()")
    return float(chart_distance(p.as_array(), q.as_array(), p.chart, preset))


# ---------------------------------------------------------------------------
# Cayley transform and ball translations


def cayley_array(y):
    """Inversion in the sphere of radius sqrt(2) about (0, 0, -1).

    It exchanges the unit ball and the upper half-space, sends the ball
    origin to (0, 0, 1), the plane origin to the north pole, (1, 0, 0) to
    itself and infinity to the south pole.  It is its own inverse and an
    isometry for every preset.  Boundary points map to boundary points.
    """
    y = np.asarray(y, dtype=float)
    d = y - _CAYLEY_CENTER
    return _CAYLEY_CENTER + 2.0 * d / np.sum(d * d, axis=-1, keepdims=True)


def cayley_pushforward(y, v):
    """Differential of :func:`cayley_array` at ``y`` applied to ``v``."""
    y = np.asarray(y, dtype=float)
    v = np.asarray(v, dtype=float)
    d = y - _CAYLEY_CENTER
    dd = np.sum(d * d, axis=-1, keepdims=True)
    n = d / np.sqrt(dd)
    return 2.0 / dd * (v - 2.0 * n * np.sum(n * v, axis=-1, keepdims=True))


def to_chart(coords, chart: str, target: str):
    return coords if chart == target else cayley_array(coords)


def cayley(p: ModelPoint) -> ModelPoint:
    if p.chart == BALL:
        return HalfSpacePoint.from_array(cayley_array(p.as_array()))
    return BallPoint(cayley_array(p.as_array()))


def ball_translate(a, x):
    """Mobius translation of the ball taking the origin to ``a``.

    Works for ``|x| <= 1``; the inverse translation is ``ball_translate(-a, .)``.
    """
    a = np.asarray(a, dtype=float)
    x = np.asarray(x, dtype=float)
    ax = np.sum(a * x, axis=-1, keepdims=True)
    aa = np.sum(a * a, axis=-1, keepdims=True)
    xx = np.sum(x * x, axis=-1, keepdims=True)
    num = (1.0 + 2.0 * ax + xx) * a + (1.0 - aa) * x
    den = 1.0 + 2.0 * ax + aa * xx
    return num / den


# ---------------------------------------------------------------------------
# exponential and logarithm maps (chart coordinates, preset independent)


def _ball_exp(p, v):
    p, v = np.broadcast_arrays(np.asarray(p, float), np.asarray(v, float))
    nv = np.linalg.norm(v, axis=-1, keepdims=True)
    scale = _one_minus_sq(p)[..., None]
    with np.errstate(invalid="ignore", divide="ignore"):
        w = np.where(nv > 0, np.tanh(nv / scale) * v / nv, 0.0)
    return ball_translate(p, w)


def _ball_log(p, q):
    p, q = np.broadcast_arrays(np.asarray(p, float), np.asarray(q, float))
    w = ball_translate(-p, q)
    nw = np.linalg.norm(w, axis=-1, keepdims=True)
    scale = _one_minus_sq(p)[..., None]
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(nw > 0, scale * np.arctanh(nw) * w / nw, 0.0)


def _halfspace_exp(p, v):
    p, v = np.broadcast_arrays(np.asarray(p, float), np.asarray(v, float))
    t = p[..., 2]
    vh = v[..., :2]
    a = np.linalg.norm(vh, axis=-1)
    speed = np.hypot(a, v[..., 2]) / t
    phi = np.arctan2(v[..., 2], a)
    half = 0.5 * (phi - 0.5 * np.pi)
    c, s = np.cos(half), np.sin(half)
    w = 1j * np.exp(speed)
    gamma = (c * w + s) / (-s * w + c)
    with np.errstate(invalid="ignore", divide="ignore"):
        u = np.where(a[..., None] > 0, vh / a[..., None], 0.0)
    out = np.empty_like(p)
    out[..., :2] = p[..., :2] + (t * gamma.real)[..., None] * u
    out[..., 2] = t * gamma.imag
    return out


def _halfspace_log(p, q):
    p, q = np.broadcast_arrays(np.asarray(p, float), np.asarray(q, float))
    t = p[..., 2]
    uh = q[..., :2] - p[..., :2]
    a = np.linalg.norm(uh, axis=-1)
    re = a / t
    im = q[..., 2] / t
    d = halfspace_distance(p, q, STANDARD)
    dh, dv = re, 0.5 * (re * re + im * im - 1.0)
    nd = np.hypot(dh, dv)
    with np.errstate(invalid="ignore", divide="ignore"):
        ch = np.where(nd > 0, dh / nd, 0.0)
        cv = np.where(nd > 0, dv / nd, 0.0)
        u = np.where(a[..., None] > 0, uh / a[..., None], 0.0)
    out = np.empty_like(p)
    out[..., :2] = (t * d * ch)[..., None] * u
    out[..., 2] = t * d * cv
    return out


def exp_map(p, v, chart: str):
    """Riemannian exponential in chart coordinates (vectorised)."""
    if chart == BALL:
        return _ball_exp(p, v)
    if chart == HALFSPACE:
        return _halfspace_exp(p, v)
    raise ValueError(f"unknown chart {chart!r}")


def log_map(p, q, chart: str):
    """Chart-coordinate vector ``v`` at ``p`` with ``exp_map(p, v) == q``."""
    if chart == BALL:
        return _ball_log(p, q)
    if chart == HALFSPACE:
        return _halfspace_log(p, q)
    raise ValueError(f"unknown chart {chart!r}")


def geodesic_step(preset, p: ModelPoint, v: TangentVector, s: float) -> ModelPoint:
    """Move from ``p`` a hyperbolic distance ``s*|v|`` along the geodesic tangent to ``v``."""
    get_preset(preset)
    comps = np.asarray(v.components, dtype=float)
    if not (np.all(np.isfinite(comps)) and np.isfinite(s)):
        raise DomainError("non-finite tangent vector or step")
    if s == 0.0 or not np.any(comps):
        return p
    q = exp_map(p.as_array(), s * comps, p.chart)
    return make_point(q, p.chart)


# ---------------------------------------------------------------------------
# isometries


class IsometryElement:
    """Base class for the isometries used here.

    ``apply(coords, chart)`` acts on arrays of interior or boundary points and
    returns ``(coords, chart)``; similarities and ball translations keep the
    chart of their input, the Cayley transform switches it.
    """

    def apply(self, coords, chart: str):
        raise NotImplementedError

    def inverse(self) -> "IsometryElement":
        raise NotImplementedError

    def __matmul__(self, other: "IsometryElement") -> "Composition":
        return Composition((self, other))


@dataclass(frozen=True)
class HalfSpaceSimilarity(IsometryElement):
    """``(x, t) -> (scale * Q(angle) x + translation, scale * t)``."""

    scale: float = 1.0
    angle: float = 0.0
    translation: tuple = (0.0, 0.0)

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("similarity scale must be positive")
        object.__setattr__(self, "translation", tuple(float(b) for b in self.translation))

    @property
    def rotation(self) -> np.ndarray:
        c, s = np.cos(self.angle), np.sin(self.angle)
        return np.array([[c, -s], [s, c]])

    def _apply_halfspace(self, z):
        z = np.asarray(z, dtype=float)
        out = np.empty_like(z)
        out[..., :2] = self.scale * z[..., :2] @ self.rotation.T + np.asarray(self.translation)
        out[..., 2] = self.scale * z[..., 2]
        return out

    def apply(self, coords, chart):
        if chart == HALFSPACE:
            return self._apply_halfspace(coords), chart
        return cayley_array(self._apply_halfspace(cayley_array(coords))), chart

    def inverse(self):
        inv_rot = self.rotation.T / self.scale
        b = -inv_rot @ np.asarray(self.translation)
        return HalfSpaceSimilarity(1.0 / self.scale, -self.angle, tuple(b))


@dataclass(frozen=True)
class BallTranslation(IsometryElement):
    target: tuple

    def __post_init__(self):
        a = tuple(float(c) for c in np.asarray(self.target, dtype=float).reshape(3))
        object.__setattr__(self, "target", a)
        check_points(np.array(a), BALL)

    def apply(self, coords, chart):
        a = np.asarray(self.target)
        if chart == BALL:
            return ball_translate(a, coords), chart
        return cayley_array(ball_translate(a, cayley_array(coords))), chart

    def inverse(self):
        return BallTranslation(tuple(-np.asarray(self.target)))


@dataclass(frozen=True)
class CayleyTransform(IsometryElement):
    def apply(self, coords, chart):
        other = HALFSPACE if chart == BALL else BALL
        return cayley_array(coords), other

    def inverse(self):
        return self


@dataclass(frozen=True)
class Composition(IsometryElement):
    """``Composition((g1, g2, ..., gn))`` is ``g1 o g2 o ... o gn``; ``gn`` acts first."""

    elements: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))

    def apply(self, coords, chart):
        for g in reversed(self.elements):
            coords, chart = g.apply(coords, chart)
        return coords, chart

    def inverse(self):
        return Composition(tuple(g.inverse() for g in reversed(self.elements)))


IDENTITY = Composition(())


def apply_isometry(g: IsometryElement, p):
    """Apply ``g`` to a model point, or to an ``(coords, chart)`` pair of arrays."""
    if isinstance(p, (BallPoint, HalfSpacePoint)):
        coords, chart = g.apply(p.as_array(), p.chart)
        return make_point(coords, chart)
    coords, chart = p
    return g.apply(np.asarray(coords, dtype=float), chart)


def plane_action(g: IsometryElement, z: Sequence[complex]) -> np.ndarray:
    """Action of a half-space-preserving isometry on boundary-plane points given as complex numbers."""
    z = np.asarray(z, dtype=complex)
    pts = np.stack([z.real, z.imag, np.zeros(z.shape)], axis=-1)
    out, chart = g.apply(pts, HALFSPACE)
    if chart != HALFSPACE:
        raise ValueError("isometry does not preserve the half-space chart")
    return out[..., 0] + 1j * out[..., 1]


def ball_translation_sending(src, dst, tol: float = 1e-13) -> BallTranslation:
    """Ball translation carrying the boundary point ``src`` to ``dst`` on the unit sphere."""
    from scipy.optimize import brentq

    src = np.asarray(src, dtype=float) / np.linalg.norm(src)
    dst = np.asarray(dst, dtype=float) / np.linalg.norm(dst)
    chord = dst - src
    if np.linalg.norm(chord) < tol:
        return BallTranslation((0.0, 0.0, 0.0))
    if np.linalg.norm(dst + src) < tol:
        raise ValueError("antipodal boundary points: translation axis not unique")
    # translations along u push boundary points along great circles towards u;
    # u = chord direction puts src and dst on the same arc, src nearer -u
    u = chord / np.linalg.norm(chord)

    def angle_gap(k):
        img = ball_translate(k * u, src)
        return np.arctan2(np.dot(np.cross(img, dst), np.cross(src, dst) / np.linalg.norm(np.cross(src, dst))),
                          np.dot(img, dst))

    k = brentq(angle_gap, 0.0, 1.0 - 1e-15, xtol=1e-16, rtol=1e-15)
    return BallTranslation(tuple(k * u))


# ---------------------------------------------------------------------------
# measures and Green functions on the ball


def green_r(r: float, x):
    """Green function of the ball of radius ``r`` with pole at the origin.

    ``x`` is a :class:`BallPoint` or an array of points (last axis 3).
    Returns ``inf`` at the origin; use it only under integrals.
    """
    return green_profile(r, _radii(x))


def green_profile(r: float, rho):
    """``G_r`` as a function of the radius ``rho``.

    Closed form ``(1/rho + rho - 1/r - r) / 3`` inside the ball, zero outside,
    evaluated in the factored form ``(r - rho)(1 - r rho) / (3 r rho)`` which
    keeps full relative accuracy as ``rho -> r``.
    """
    if not 0.0 < r <= 1.0:
        raise ValueError("radius must lie in (0, 1]")
    rho = np.abs(np.asarray(rho, dtype=float))
    safe = np.where(rho == 0.0, 1.0, rho)
    val = (r - rho) * (1.0 - r * rho) / (3.0 * r * safe)
    val = np.where(rho <= r, val, 0.0)
    val = np.where(rho == 0.0, np.inf, val)
    return val if np.ndim(val) else float(val)


def green(x):
    """Whole-ball Green function ``G = G_1``, i.e. ``(1 - rho)^2 / (3 rho)``, of a point."""
    return green_profile(1.0, _radii(x))


def lambda_weight(x):
    """Density ``(1 - |x|^2)^{-3}`` of lambda against normalised Lebesgue measure."""
    if isinstance(x, BallPoint):
        x = x.coords
    x = np.asarray(x, dtype=float)
    check_points(x, BALL)
    val = _one_minus_sq(x) ** -3
    return val if np.ndim(val) else float(val)


def lambda_radial_weight(rho):
    """Radial weight ``3 rho^2 / (1 - rho^2)^3`` of lambda against ``d rho d sigma``."""
    rho = np.asarray(rho, dtype=float)
    return 3.0 * rho**2 / ((1.0 - rho) * (1.0 + rho)) ** 3


def _radii(x):
    if isinstance(x, BallPoint):
        return np.float64(x.rho)
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (3,):
        raise ValueError("expected ball points with a last axis of length 3")
    return np.linalg.norm(x, axis=-1)
