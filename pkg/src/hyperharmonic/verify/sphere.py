"""Spherical averages, radial integrals against the hyperbolic volume, Green identity."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from ..calculus import DEFAULT_STEP, laplacian_scalar
from ..geometry import BALL, PAPER_BALL, get_preset, green_profile, lambda_radial_weight

_GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))


class DivergenceError(ArithmeticError):
    """A radial integral does not converge at the sphere at infinity."""


@dataclass(frozen=True)
class SphereSampler:
    """Quadrature nodes on the unit sphere for the probability measure sigma.

    ``scheme`` is ``"fibonacci"`` (deterministic spiral lattice) or ``"random"``
    (uniform points from a seeded generator).
    """

    scheme: str = "fibonacci"
    count: int = 2048
    seed: int = 0

    def __post_init__(self):
        if self.scheme not in ("fibonacci", "random"):
            raise ValueError(f"unknown sphere scheme {self.scheme!r}")
        if int(self.count) != self.count or self.count < 1:
            raise ValueError("count must be a positive integer")
        object.__setattr__(self, "count", int(self.count))

    @property
    def nodes(self) -> np.ndarray:
        return _nodes(self.scheme, self.count, self.seed)

    @property
    def weights(self) -> np.ndarray:
        return np.full(self.count, 1.0 / self.count)

    def describe(self) -> str:
        if self.scheme == "fibonacci":
            return f"fibonacci({self.count})"
        return f"random({self.count}, seed={self.seed})"


@lru_cache(maxsize=16)
def _nodes(scheme: str, count: int, seed: int) -> np.ndarray:
    if scheme == "fibonacci":
        k = np.arange(count)
        z = 1.0 - (2.0 * k + 1.0) / count
        r = np.sqrt((1.0 - z) * (1.0 + z))
        phi = _GOLDEN_ANGLE * k
        pts = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=-1)
    else:
        g = np.random.default_rng(seed).standard_normal((count, 3))
        pts = g / np.linalg.norm(g, axis=1, keepdims=True)
    pts.setflags(write=False)
    return pts


def spherical_average(F: Callable, rho, sampler: SphereSampler = SphereSampler()):
    """Mean of ``F`` over the sphere of radius ``rho`` (scalar or 1-d array of radii)."""
    rho_arr = np.atleast_1d(np.asarray(rho, dtype=float))
    if np.any(rho_arr < 0) or np.any(rho_arr >= 1):
        raise ValueError("radius must lie in [0, 1)")
    pts = rho_arr[:, None, None] * sampler.nodes[None, :, :]
    vals = np.asarray(F(pts), dtype=float)
    out = vals @ sampler.weights
    return out if np.ndim(rho) else float(out[0])


@lru_cache(maxsize=16)
def _legendre(n: int):
    return np.polynomial.legendre.leggauss(n)


def radial_rule(r: float, n: int = 64):
    """Open Gauss-Legendre nodes and weights on ``(0, r)``."""
    x, w = _legendre(n)
    return 0.5 * r * (x + 1.0), 0.5 * r * w


@dataclass(frozen=True)
class RadialProfile:
    """Radial function ``Phi(rho)`` vanishing for ``rho > support``."""

    func: Callable
    support: float = 1.0

    def __call__(self, rho):
        rho = np.asarray(rho, dtype=float)
        return np.where(rho <= self.support, self.func(rho), 0.0)


def green_kernel(r: float) -> RadialProfile:
    """``G_r`` as a radial profile supported on ``[0, r]``."""
    return RadialProfile(lambda rho: green_profile(r, rho), r)


def _radial_integral_on(Phi, F, sampler, lower, upper, n):
    rho, w = radial_rule(upper - lower, n)
    rho = rho + lower
    if F is None:
        avr = np.ones_like(rho)
    else:
        avr = spherical_average(F, rho, sampler)
    return float(np.sum(w * lambda_radial_weight(rho) * Phi(rho) * avr))


def radial_weighted_integral(Phi, F, sampler: SphereSampler = SphereSampler(), n: int = 64) -> float:
    """``int Phi F d lambda`` in polar form ``int 3 rho^2 Phi Avr_F / (1 - rho^2)^3 d rho``.

    ``Phi`` is a :class:`RadialProfile`; ``F`` a scalar field on the ball, or
    ``None`` for ``F = 1``.  Profiles reaching the unit sphere are integrated
    over the panels ``(1 - 10^-k, 1 - 10^-(k+1))``; if the panel contributions
    do not shrink the integral is reported as divergent.
    """
    if not isinstance(Phi, RadialProfile):
        Phi = RadialProfile(Phi)
    if Phi.support < 1.0:
        return _radial_integral_on(Phi, F, sampler, 0.0, Phi.support, n)
    edges = [0.0] + [1.0 - 10.0**-k for k in range(1, 9)]
    panels = [_radial_integral_on(Phi, F, sampler, a, b, n) for a, b in zip(edges[:-1], edges[1:])]
    tail = np.abs(panels[-3:])
    if not np.all(np.isfinite(panels)) or tail[-1] > 0.5 * tail[-2] and tail[-1] > 1e-14 * abs(sum(panels)):
        raise DivergenceError(
            "radial integral does not settle at the sphere: last panel contributions "
            + ", ".join(f"{v:.6g}" for v in panels[-3:])
        )
    return float(sum(panels))


def green_ball_integral(r: float, n: int = 64) -> float:
    """``int G_r d lambda``; the integrand is smooth on ``[0, r]``, so the rule is exact to rounding."""
    if not 0.0 < r < 1.0:
        raise ValueError("radius must lie in (0, 1)")
    return _radial_integral_on(green_kernel(r), None, None, 0.0, r, n)


def monte_carlo_ball_integral(Phi, F, count: int, seed: int = 0):
    """Plain Monte-Carlo estimate of ``int Phi F d lambda`` with its standard error.

    Points are uniform in the unit ball (lambda has density ``(1-|x|^2)^-3``
    against the normalised Lebesgue measure).
    """
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((count, 3))
    u = g / np.linalg.norm(g, axis=1, keepdims=True)
    support = getattr(Phi, "support", 1.0)
    rho = support * rng.random(count) ** (1.0 / 3.0)
    x = rho[:, None] * u
    vals = Phi(rho) / ((1.0 - rho) * (1.0 + rho)) ** 3
    if F is not None:
        vals = vals * np.asarray(F(x), dtype=float)
    # uniform on the ball of radius ``support`` has mass support^3 in the unit ball
    vals = vals * support**3
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(count))


@dataclass(frozen=True)
class GreenTerms:
    """The three terms of ``F(0) + int G_r Lap F d lambda = Avr_F(r)``."""

    value_at_origin: float
    integral: float
    average: float

    @property
    def residual(self) -> float:
        return abs(self.value_at_origin + self.integral - self.average)

    @property
    def integral_ratio(self) -> float:
        """``(Avr_F(r) - F(0)) / int G_r Lap F``, equal to 1 when the identity holds."""
        return (self.average - self.value_at_origin) / self.integral


def laplacian_radial_integral(lap: Callable, r: float, sampler: SphereSampler, n: int = 64) -> float:
    """``int G_r L d lambda`` for a field ``L`` already holding the Laplacian values."""
    return radial_weighted_integral(green_kernel(r), lap, sampler, n)


def green_identity_terms(F: Callable, r: float, preset=PAPER_BALL, sampler: SphereSampler = SphereSampler(),
                         n: int = 64, h: float = DEFAULT_STEP) -> GreenTerms:
    """Evaluate the Green identity for a scalar field ``F`` on the ball of radius ``r``.

    The Laplacian is that of ``preset`` (finite differences of fixed hyperbolic
    step).  The identity holds for the ``PAPER_BALL`` normalisation.
    """
    if not 0.0 < r < 1.0:
        raise ValueError("radius must lie in (0, 1)")
    preset = get_preset(preset)

    def lap(pts):
        shape = pts.shape[:-1]
        flat = pts.reshape(-1, 3)
        out = np.concatenate([
            np.atleast_1d(laplacian_scalar(F, flat[i:i + 4096], h, preset, BALL))
            for i in range(0, len(flat), 4096)
        ])
        return out.reshape(shape)

    f0 = float(np.asarray(F(np.zeros((1, 3))), dtype=float)[0])
    integral = laplacian_radial_integral(lap, r, sampler, n)
    avg = spherical_average(F, r, sampler)
    return GreenTerms(f0, integral, avg)


def green_identity_residual(F: Callable, r: float, preset=PAPER_BALL, sampler: SphereSampler = SphereSampler(),
                            n: int = 64, h: float = DEFAULT_STEP) -> float:
    return green_identity_terms(F, r, preset, sampler, n, h).residual


def green_estimate_values(rho):
    """``G(rho) rho / (1 - rho^2)^2`` evaluated from the Green function."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0) or np.any(rho >= 1):
        raise ValueError("radii must lie in (0, 1)")
    return green_profile(1.0, rho) * rho / ((1.0 - rho) * (1.0 + rho)) ** 2


def green_estimate_scan(rho=None, count: int = 1000, clip: float = 1e-12):
    """Minimum and maximum of ``G(rho) rho / (1 - rho^2)^2`` over a radius grid.

    The default grid has ``count`` equispaced radii on ``[0, 1]`` with the end
    points moved inside by ``clip``, so the limits at 0 and 1 are approached.
    """
    if rho is None:
        rho = np.clip(np.linspace(0.0, 1.0, count), clip, 1.0 - clip)
    vals = green_estimate_values(rho)
    return float(vals.min()), float(vals.max())


__all__ = [
    "DivergenceError", "SphereSampler", "spherical_average", "radial_rule", "RadialProfile", "green_kernel",
    "radial_weighted_integral", "green_ball_integral", "monte_carlo_ball_integral", "GreenTerms",
    "laplacian_radial_integral", "green_identity_terms", "green_identity_residual", "green_estimate_values",
    "green_estimate_scan",
]
