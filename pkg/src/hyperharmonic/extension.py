"""Gauss-Weierstrass extension of boundary maps into the upper half-space.

For a plane map ``f`` the extension at ``(x, t)`` is

    horizontal = int f(x + t y) phi(y) dy
    vertical   = t / sqrt(2) * sqrt( int e(f)(x + t y) phi(y) dy )

with ``phi`` the standard 2-D Gaussian density and ``e(f)`` the squared
Frobenius norm of ``Df``.  Both integrals are evaluated with a tensor
Gauss-Hermite rule after the substitution ``y = sqrt(2) u``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .boundary import BoundaryMap, Linear, boundary_energy
from .geometry import HALFSPACE, HalfSpacePoint, check_points

logger = logging.getLogger(__name__)

_CHUNK_SAMPLES = 1 << 21


class QuadratureError(RuntimeError):
    """Non-finite integrand samples survived the jitter policy."""


@lru_cache(maxsize=32)
def _hermite_rule(n: int):
    u, w = np.polynomial.hermite.hermgauss(n)
    uu, vv = np.meshgrid(u, u, indexing="ij")
    offsets = np.sqrt(2.0) * np.stack([uu.ravel(), vv.ravel()], axis=-1)
    weights = np.outer(w, w).ravel() / np.pi
    offsets.setflags(write=False)
    weights.setflags(write=False)
    return offsets, weights


@dataclass(frozen=True)
class QuadratureSpec:
    """Tensor Gauss-Hermite rule for Gaussian convolutions.

    ``refine_target`` switches on node doubling (see :func:`refine_quadrature`);
    ``jitter`` is the relative offset, in units of ``t``, applied to nodes that
    land exactly on a singular point of the integrand.
    """

    nodes_per_axis: int = 32
    jitter: float = 1e-9
    refine_target: float | None = None
    max_nodes_per_axis: int = 256

    def __post_init__(self):
        if int(self.nodes_per_axis) != self.nodes_per_axis or self.nodes_per_axis < 4:
            raise ValueError("nodes_per_axis must be an integer >= 4")
        object.__setattr__(self, "nodes_per_axis", int(self.nodes_per_axis))

    def rule(self):
        return _hermite_rule(self.nodes_per_axis)

    def with_nodes(self, n: int) -> "QuadratureSpec":
        return QuadratureSpec(n, self.jitter, self.refine_target, self.max_nodes_per_axis)


def _sample_points(x, t, offsets, singular_points, jitter):
    pts = x[:, None, :] + t[:, None, None] * offsets[None, :, :]
    for s in singular_points:
        hit = np.linalg.norm(pts - s, axis=-1) <= 1e-12 * t[:, None]
        if np.any(hit):
            shift = jitter * np.broadcast_to(t[:, None], hit.shape)[hit]
            pts[hit] += shift[:, None] * np.array([np.sqrt(0.5), np.sqrt(0.5)])
    return pts


def _broadcast_xt(x, t):
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    shape = np.broadcast_shapes(x.shape[:-1], t.shape)
    x = np.broadcast_to(x, shape + (2,)).reshape(-1, 2)
    t = np.broadcast_to(t, shape).reshape(-1)
    if np.any(t <= 0):
        raise ValueError("Gauss-Weierstrass scale t must be positive")
    return x, t, shape


def gauss_weierstrass(
    g: Callable,
    x,
    t,
    quad: QuadratureSpec = QuadratureSpec(),
    singular_points: Sequence = (),
):
    """Gaussian smoothing ``int g(x + t y) phi(y) dy`` of a plane field.

    ``g`` maps ``(..., 2)`` points to scalars ``(...)`` or vectors ``(..., k)``.
    ``x`` is ``(..., 2)`` and ``t`` broadcasts against ``x[..., 0]``.
    """
    x, t, shape = _broadcast_xt(x, t)
    offsets, weights = quad.rule()
    sing = [np.asarray(s, dtype=float) for s in singular_points]
    chunk = max(1, _CHUNK_SAMPLES // len(weights))
    out = []
    for i in range(0, len(t), chunk):
        pts = _sample_points(x[i:i + chunk], t[i:i + chunk], offsets, sing, quad.jitter)
        vals = np.asarray(g(pts), dtype=float)
        _check_finite(vals, pts)
        out.append(np.tensordot(weights, np.moveaxis(vals, 1, 0), axes=1))
    res = np.concatenate(out, axis=0)
    return res.reshape(shape + res.shape[1:])


def _check_finite(vals, pts):
    bad = ~np.isfinite(vals)
    if bad.ndim > pts.ndim - 1:
        bad = bad.any(axis=tuple(range(pts.ndim - 1, bad.ndim)))
    if np.any(bad):
        loc = pts[bad][0]
        raise QuadratureError(f"non-finite integrand at node ({loc[0]:.17g}, {loc[1]:.17g})")


def good_extension_array(f: BoundaryMap, z, quad: QuadratureSpec = QuadratureSpec()):
    """Vectorised extension of ``f`` at half-space points ``z`` of shape ``(..., 3)``."""
    if not f.fixes_infinity:
        raise ValueError("the Gaussian extension needs a boundary map fixing infinity")
    z = np.asarray(z, dtype=float)
    check_points(z, HALFSPACE)
    shape = z.shape[:-1]
    z = z.reshape(-1, 3)
    x, t = z[:, :2], z[:, 2]
    offsets, weights = quad.rule()
    sing = [np.asarray(s, dtype=float) for s in f.singular_points]
    chunk = max(1, _CHUNK_SAMPLES // len(weights))
    out = np.empty_like(z)
    for i in range(0, len(t), chunk):
        sl = slice(i, i + chunk)
        pts = _sample_points(x[sl], t[sl], offsets, sing, quad.jitter)
        fv = f(pts)
        ev = boundary_energy(f, pts)
        _check_finite(fv, pts)
        _check_finite(ev, pts)
        out[sl, :2] = np.einsum("k,mkj->mj", weights, fv)
        mean_e = ev @ weights
        if np.any(mean_e < 0):
            logger.warning("negative smoothed energy %.3g clamped to 0", mean_e.min())
            mean_e = np.maximum(mean_e, 0.0)
        out[sl, 2] = t[sl] / np.sqrt(2.0) * np.sqrt(mean_e)
    return out.reshape(shape + (3,))


def refine_quadrature(f: BoundaryMap, z, quad: QuadratureSpec) -> QuadratureSpec:
    """Double the node count until the extension at ``z`` moves by less than the target.

    The change is measured relative to the height of the image point, which is
    the hyperbolic scale there.
    """
    if quad.refine_target is None:
        return quad
    prev = good_extension_array(f, z, quad)
    n = quad.nodes_per_axis
    while 2 * n <= quad.max_nodes_per_axis:
        cand = quad.with_nodes(2 * n)
        cur = good_extension_array(f, z, cand)
        change = np.max(np.linalg.norm(cur - prev, axis=-1) / cur[..., 2])
        logger.debug("refine %d -> %d nodes: change %.3g", n, 2 * n, change)
        n, prev = 2 * n, cur
        if change < quad.refine_target:
            return cand
    logger.warning("quadrature refinement hit %d nodes without reaching %.3g", n, quad.refine_target)
    return quad.with_nodes(n)


def good_extension(f: BoundaryMap, z: HalfSpacePoint, quad: QuadratureSpec = QuadratureSpec()) -> HalfSpacePoint:
    quad = refine_quadrature(f, z.as_array()[None], quad)
    return HalfSpacePoint.from_array(good_extension_array(f, z.as_array(), quad))


@dataclass(frozen=True)
class GoodExtensionMap:
    """The extension of a boundary map, evaluatable on half-space arrays."""

    boundary: BoundaryMap
    quad: QuadratureSpec = QuadratureSpec()

    chart = HALFSPACE

    def __call__(self, z):
        return good_extension_array(self.boundary, z, self.quad)


def linear_harmonic_array(L: Linear, z):
    """Closed-form harmonic extension ``(L x, sqrt(e(L)/2) t)``."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    out[..., :2] = z[..., :2] @ L.matrix.T
    out[..., 2] = np.sqrt(np.sum(L.matrix**2) / 2.0) * z[..., 2]
    return out


def linear_harmonic(L: Linear, z: HalfSpacePoint) -> HalfSpacePoint:
    return HalfSpacePoint.from_array(linear_harmonic_array(L, z.as_array()))


@dataclass(frozen=True)
class LinearHarmonicMap:
    linear: Linear

    chart = HALFSPACE

    def __call__(self, z):
        return linear_harmonic_array(self.linear, z)
