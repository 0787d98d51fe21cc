"""Differential geometry of maps between models of hyperbolic 3-space.

An interior map is any object with a ``chart`` attribute and a vectorised
``__call__`` taking ``(..., 3)`` chart coordinates to ``(..., 3)`` chart
coordinates; source and target share the chart.  Derivatives are central
differences with a step of fixed hyperbolic size (``h`` times the Euclidean
scale ``t`` or ``1 - |x|^2`` of the point) and one Richardson level.

Both charts are conformal, so with source density ``lam`` and target density
``mu`` (from a :class:`~hyperharmonic.geometry.MetricPreset`)

    e(F)   = 1/2 (mu(F)/lam)^2 |DF|^2
    tau(F) = lam^-2 ( Lap F + DF grad log lam + 2 DF DF^T g - |DF|^2 g ),
             g = grad log mu at F(p)

where the last two terms are the Christoffel contraction of a conformal
target metric.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .geometry import (
    BALL,
    HALFSPACE,
    STANDARD,
    ModelPoint,
    cayley_array,
    chart_distance,
    get_preset,
    log_map,
)

DEFAULT_STEP = 1e-3


class DegenerateConfiguration(ValueError):
    """Frames along the connecting geodesic are undefined (the images coincide)."""


# ---------------------------------------------------------------------------
# interior maps


@dataclass(frozen=True)
class ClosedForm:
    """Interior map given by a vectorised formula in one chart."""

    func: Callable
    chart: str = HALFSPACE
    name: str = "closed form"

    def __call__(self, z):
        return self.func(np.asarray(z, dtype=float))


@dataclass(frozen=True)
class InChart:
    """View of an interior map in the other chart, conjugated by the Cayley transform."""

    inner: object
    chart: str = BALL

    def __post_init__(self):
        if self.chart == self.inner.chart:
            raise ValueError("map is already in the requested chart")

    def __call__(self, z):
        return cayley_array(self.inner(cayley_array(z)))


def in_chart(F, chart: str):
    if F.chart == chart:
        return F
    if isinstance(F, InChart):
        return F.inner
    return InChart(F, chart)


def identity_map(chart: str = HALFSPACE) -> ClosedForm:
    return ClosedForm(lambda z: np.array(z, dtype=float), chart, "identity")


def vertical_scaling(lam: float) -> ClosedForm:
    """``(x, t) -> (x, lam t)``; a non-harmonic control map for ``lam != 1``."""

    def func(z):
        out = np.array(z, dtype=float)
        out[..., 2] *= lam
        return out

    return ClosedForm(func, HALFSPACE, f"vertical scaling {lam:g}")


# ---------------------------------------------------------------------------
# finite differences


def _as_array_points(p, chart):
    if isinstance(p, (tuple, list)) and p and hasattr(p[0], "chart"):
        p = np.stack([q.as_array() for q in p])
    elif hasattr(p, "chart"):
        if p.chart != chart:
            raise ValueError(f"point is in the {p.chart} chart, map is in the {chart} chart")
        p = p.as_array()
    return np.asarray(p, dtype=float)


def euclidean_scale(p, chart: str):
    """Euclidean length of a chart step of unit hyperbolic size (up to a constant)."""
    p = np.asarray(p, dtype=float)
    if chart == BALL:
        r = np.linalg.norm(p, axis=-1)
        return (1.0 - r) * (1.0 + r)
    return p[..., 2]


_PAIRS = [(0, 1), (0, 2), (1, 2)]


def _stencil(p, step):
    """Centre, +-e_i and +-e_i+-e_j points; returns ``(M, 19, 3)``."""
    m = p.shape[0]
    offs = [np.zeros(3)]
    for i in range(3):
        e = np.zeros(3)
        e[i] = 1.0
        offs += [e, -e]
    for i, j in _PAIRS:
        for si in (1.0, -1.0):
            for sj in (1.0, -1.0):
                e = np.zeros(3)
                e[i], e[j] = si, sj
                offs.append(e)
    offs = np.array(offs)
    return p[:, None, :] + step[:, None, None] * offs[None, :, :], m


def _derivs_from_values(vals, step):
    """Jacobian ``(M, k, 3)`` and Hessian ``(M, k, 3, 3)`` from stencil values ``(M, 19, k)``."""
    h = step[:, None]
    c = vals[:, 0]
    plus = vals[:, 1:7:2]
    minus = vals[:, 2:7:2]
    jac = (plus - minus) / (2.0 * h[:, :, None])
    jac = np.moveaxis(jac, 1, -1)
    hess = np.zeros(vals.shape[:1] + vals.shape[2:] + (3, 3))
    diag = (plus - 2.0 * c[:, None] + minus) / (h[:, :, None] ** 2)
    for i in range(3):
        hess[..., i, i] = diag[:, i]
    for n, (i, j) in enumerate(_PAIRS):
        pp, pm, mp, mm = (vals[:, 7 + 4 * n + k] for k in range(4))
        mixed = (pp - pm - mp + mm) / (4.0 * h**2)
        hess[..., i, j] = mixed
        hess[..., j, i] = mixed
    return jac, hess


def derivatives(F, p, h: float = DEFAULT_STEP, richardson: bool = True, with_hessian: bool = True):
    """Value, Jacobian and Hessian of a vector or scalar field at points ``p``.

    ``F`` maps ``(..., 3)`` to ``(..., k)`` or ``(...)``.  Returns arrays with a
    leading point axis.
    """
    chart = F.chart if hasattr(F, "chart") else HALFSPACE
    p = np.atleast_2d(np.asarray(p, dtype=float))
    base = h * euclidean_scale(p, chart)

    def level(step):
        pts, m = _stencil(p, step)
        if not with_hessian:
            pts = pts[:, :7]
        vals = np.asarray(F(pts.reshape(-1, 3)))
        scalar = vals.ndim == 1
        vals = vals.reshape(m, pts.shape[1], -1)
        if not np.all(np.isfinite(vals)):
            raise FloatingPointError("non-finite values in finite-difference stencil")
        if not with_hessian:
            pad = np.zeros((m, 19, vals.shape[-1]))
            pad[:, :7] = vals
            vals = pad
        jac, hess = _derivs_from_values(vals, step)
        return vals[:, 0], jac, hess, scalar

    v0, j1, h1, scalar = level(base)
    if richardson:
        _, j2, h2, _ = level(0.5 * base)
        jac = (4.0 * j2 - j1) / 3.0
        hess = (4.0 * h2 - h1) / 3.0
    else:
        jac, hess = j1, h1
    if scalar:
        return v0[:, 0], jac[:, 0], hess[:, 0]
    return v0, jac, hess


# ---------------------------------------------------------------------------
# pointwise quantities


def _densities(preset, p, fp, chart):
    preset = get_preset(preset)
    return preset.density(p, chart), preset.density(fp, chart)


def energy_from_jacobian(jac, lam, mu):
    return 0.5 * (mu / lam) ** 2 * np.sum(jac * jac, axis=(-2, -1))


def tension_from_derivatives(p, fp, jac, hess, chart, preset=STANDARD):
    """Tension vector in target chart coordinates and its hyperbolic norm."""
    preset = get_preset(preset)
    lam = preset.density(p, chart)
    mu = preset.density(fp, chart)
    grad_src = preset.log_density_gradient(p, chart)
    g = preset.log_density_gradient(fp, chart)
    lap = np.trace(hess, axis1=-2, axis2=-1)
    jjt = jac @ np.swapaxes(jac, -1, -2)
    frob = np.sum(jac * jac, axis=(-2, -1))
    tau = lap + np.einsum("...ai,...i->...a", jac, grad_src)
    tau = tau + 2.0 * np.einsum("...ab,...b->...a", jjt, g) - frob[..., None] * g
    tau = tau / lam[..., None] ** 2
    return tau, mu * np.linalg.norm(tau, axis=-1)


@dataclass(frozen=True)
class LocalGeometry:
    """First and second order data of a map at a batch of points."""

    points: np.ndarray
    images: np.ndarray
    jacobian: np.ndarray
    hessian: np.ndarray
    chart: str
    preset: object

    @property
    def source_density(self):
        return get_preset(self.preset).density(self.points, self.chart)

    @property
    def target_density(self):
        return get_preset(self.preset).density(self.images, self.chart)

    @property
    def energy(self):
        return energy_from_jacobian(self.jacobian, self.source_density, self.target_density)

    @property
    def tension(self):
        return tension_from_derivatives(
            self.points, self.images, self.jacobian, self.hessian, self.chart, self.preset
        )

    @property
    def tension_norm(self):
        return self.tension[1]

    @property
    def distortion(self):
        sv = np.linalg.svd(self.jacobian, compute_uv=False)
        with np.errstate(divide="ignore"):
            return np.where(sv[..., -1] > 0, sv[..., 0] / sv[..., -1], np.inf)

    @property
    def jacobian_determinant(self):
        """Hyperbolic Jacobian ``det(DF) (mu/lam)^3``."""
        return np.linalg.det(self.jacobian) * (self.target_density / self.source_density) ** 3

    @property
    def frame_matrix(self):
        """Matrix of ``F_*`` in orthonormal source and target frames, ``(M, 3, 3)``."""
        return (self.target_density / self.source_density)[..., None, None] * self.jacobian


def local_geometry(F, p, h: float = DEFAULT_STEP, preset=STANDARD, richardson: bool = True) -> LocalGeometry:
    p = np.atleast_2d(_as_array_points(p, F.chart))
    vals, jac, hess = derivatives(F, p, h, richardson)
    return LocalGeometry(p, vals, jac, hess, F.chart, preset)


def _scalar_or_array(values, p):
    if hasattr(p, "chart"):
        return values.reshape(-1)[0].item() if np.ndim(values) else float(values)
    return values


def interior_energy(F, p, h: float = DEFAULT_STEP, preset=STANDARD):
    """Energy density; independent of the preset."""
    geo = local_geometry(F, p, h, preset, richardson=True)
    return _scalar_or_array(geo.energy, p)


def tension(F, p, h: float = DEFAULT_STEP, preset=STANDARD):
    """Tension vector(s) in target chart coordinates and hyperbolic norm(s)."""
    geo = local_geometry(F, p, h, preset)
    vec, norm = geo.tension
    if hasattr(p, "chart"):
        return vec[0], float(norm[0])
    return vec, norm


def interior_distortion(F, p, h: float = DEFAULT_STEP):
    geo = local_geometry(F, p, h)
    return _scalar_or_array(geo.distortion, p)


def laplacian_scalar(u, p, h: float = DEFAULT_STEP, preset=STANDARD, chart: str | None = None):
    """Hyperbolic Laplacian of a scalar field ``u`` (vectorised callable).

    ``lam^-2 (Lap u + grad log lam . grad u)`` in three dimensions.
    """
    preset = get_preset(preset)
    if chart is None:
        chart = getattr(u, "chart", getattr(p, "chart", HALFSPACE))
    pts = np.atleast_2d(_as_array_points(p, chart))
    field = ClosedForm(lambda z: np.asarray(u(z), dtype=float), chart)
    _, grad, hess = derivatives(field, pts, h)
    lam = preset.density(pts, chart)
    gl = preset.log_density_gradient(pts, chart)
    val = (np.trace(hess, axis1=-2, axis2=-1) + np.sum(gl * grad, axis=-1)) / lam**2
    return _scalar_or_array(val, p)


def distance_field(F, G, p, preset=STANDARD):
    """Hyperbolic distance between ``F(p)`` and ``G(p)``."""
    chart = F.chart
    if G.chart != chart:
        G = in_chart(G, chart)
    pts = _as_array_points(p, chart)
    return _scalar_or_array(chart_distance(F(pts), G(pts), chart, preset), p)


def distance_squared_field(F, G, preset=STANDARD):
    """Scalar field ``d^2`` as a vectorised callable in the chart of ``F``."""
    G = in_chart(G, F.chart)
    return ClosedForm(lambda z: chart_distance(F(z), G(z), F.chart, preset) ** 2, F.chart, "d^2")


# ---------------------------------------------------------------------------
# frames along the connecting geodesic


def _complete_frame(e3):
    """Orthonormal frames with prescribed third vector, by Gram-Schmidt."""
    e3 = e3 / np.linalg.norm(e3, axis=-1, keepdims=True)
    basis = np.eye(3)
    # smallest-index Cartesian vector that is not (nearly) parallel to e3
    choice = np.argmax(np.abs(e3) < 0.9, axis=-1)
    seed = basis[choice]
    e1 = seed - np.sum(seed * e3, axis=-1, keepdims=True) * e3
    e1 /= np.linalg.norm(e1, axis=-1, keepdims=True)
    e2 = np.cross(e3, e1)
    return np.stack([e1, e2, e3], axis=-1)


@dataclass(frozen=True)
class FrameCoefficients:
    """``alpha[..., i, j] = <F_* u_i, v_j>``, ``beta`` likewise for ``G`` and ``w_j``."""

    alpha: np.ndarray
    beta: np.ndarray
    d: np.ndarray

    @property
    def horizontal_sum(self):
        """``sum_i sum_{j<=2} (alpha_i^j)^2 + (beta_i^j)^2``."""
        return self.alpha_sum + self.beta_sum

    @property
    def alpha_sum(self):
        return np.sum(self.alpha[..., :, :2] ** 2, axis=(-2, -1))

    @property
    def beta_sum(self):
        return np.sum(self.beta[..., :, :2] ** 2, axis=(-2, -1))


def _frame_coefficients_from(geo_f, geo_g, preset):
    chart = geo_f.chart
    fp, gp = geo_f.images, geo_g.images
    d = chart_distance(fp, gp, chart, preset)
    if np.any(d == 0.0):
        raise DegenerateConfiguration("F(p) == G(p): geodesic frame undefined; use the d -> 0 limit")
    v3 = -log_map(fp, gp, chart)
    w3 = -log_map(gp, fp, chart)
    vf = _complete_frame(v3)
    wf = _complete_frame(w3)
    alpha = np.einsum("...ai,...aj->...ij", geo_f.frame_matrix, vf)
    beta = np.einsum("...ai,...aj->...ij", geo_g.frame_matrix, wf)
    return FrameCoefficients(alpha, beta, d)


def frame_coefficients(F, G, p, h: float = DEFAULT_STEP, preset=STANDARD) -> FrameCoefficients:
    G = in_chart(G, F.chart)
    geo_f = local_geometry(F, p, h, preset)
    geo_g = local_geometry(G, p, h, preset)
    fc = _frame_coefficients_from(geo_f, geo_g, preset)
    if hasattr(p, "chart"):
        return FrameCoefficients(fc.alpha[0], fc.beta[0], float(fc.d[0]))
    return fc


# ---------------------------------------------------------------------------
# the comparison inequality for Laplacian of d^2


@dataclass(frozen=True)
class ComparisonRecord:
    lhs: np.ndarray
    rhs_full: np.ndarray
    rhs_1: np.ndarray
    rhs_2: np.ndarray | None
    d: np.ndarray
    tension_f: np.ndarray
    tension_g: np.ndarray

    @property
    def margin_full(self):
        return self.lhs - self.rhs_full

    @property
    def margin_1(self):
        return self.lhs - self.rhs_1

    @property
    def margin_2(self):
        return None if self.rhs_2 is None else self.lhs - self.rhs_2

    @property
    def margins(self) -> dict:
        out = {"full": self.margin_full, "crude": self.margin_1}
        if self.rhs_2 is not None:
            out["energy"] = self.margin_2
        return out


def comparison_check(F, G, p, h: float = DEFAULT_STEP, q_const: float | None = None, preset=STANDARD,
                     min_distance: float = 0.0) -> ComparisonRecord:
    """Evaluate both sides of the lower bound for ``Lap d^2``.

    The curvature -1 constants need the ``STANDARD`` preset.
    """
    preset = get_preset(preset)
    if preset is not STANDARD and preset.scale != 1.0:
        raise ValueError("the comparison inequality is stated for curvature -1 (STANDARD)")
    G = in_chart(G, F.chart)
    pts = np.atleast_2d(_as_array_points(p, F.chart))
    geo_f = local_geometry(F, pts, h, preset)
    geo_g = local_geometry(G, pts, h, preset)
    d = chart_distance(geo_f.images, geo_g.images, F.chart, preset)
    if np.any(d <= min_distance):
        raise DegenerateConfiguration("distance between the maps vanishes at a sample point")
    fc = _frame_coefficients_from(geo_f, geo_g, preset)
    lhs = laplacian_scalar(distance_squared_field(F, G, preset), pts, h, preset, F.chart)
    tf, tg = geo_f.tension_norm, geo_g.tension_norm
    rhs_1 = -2.0 * d * (tf + tg)
    rhs_full = rhs_1 + 2.0 * d * fc.horizontal_sum * np.tanh(d / 2.0)
    rhs_2 = None
    if q_const is not None:
        rhs_2 = rhs_1 + 2.0 * q_const * d * geo_f.energy * np.tanh(d / 2.0)
    return ComparisonRecord(lhs, rhs_full, rhs_1, rhs_2, d, tf, tg)
