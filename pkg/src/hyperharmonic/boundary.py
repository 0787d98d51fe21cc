"""Quasiconformal self-maps of the plane with closed-form derivatives.

Points of the boundary plane are ``(..., 2)`` float arrays.  Every map
exposes ``__call__``, ``differential`` (``(..., 2, 2)`` Jacobian matrices),
``inverse_points`` and a list of ``singular_points`` where the derivative
fails to exist; the Gauss-Weierstrass quadrature uses the latter to nudge
nodes off the singular set.

Maps have a one-line text form used by the CLI config, e.g.
``mobius(1, 0.5+0.25j, 0, 1) o linear(2, 0, 0, 1)``.  ``o`` is composition:
the right-most map acts first.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .geometry import IsometryElement, plane_action


class NotDifferentiableError(ValueError):
    """Raised when a derivative is requested on the singular set of a map."""


def _as_points(x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (2,):
        raise ValueError("plane points need a last axis of length 2")
    return x


def _to_complex(x):
    return x[..., 0] + 1j * x[..., 1]


def _from_complex(z):
    return np.stack([z.real, z.imag], axis=-1)


def _fmt(v) -> str:
    v = complex(v)
    if v.imag == 0.0:
        return repr(v.real)
    return repr(v).strip("()")


class BoundaryMap:
    is_conformal = False
    fixes_infinity = True

    def __call__(self, x):
        raise NotImplementedError

    def differential(self, x):
        raise NotImplementedError

    def inverse_points(self, y):
        raise NotImplementedError

    @property
    def singular_points(self) -> list:
        return []

    def extended_image(self, z):
        """Image of a point of the extended plane; ``None`` stands for infinity."""
        if z is None:
            if self.fixes_infinity:
                return None
            raise NotImplementedError
        return self(np.asarray(z, dtype=float)[None])[0]

    def to_text(self) -> str:
        raise NotImplementedError

    def __matmul__(self, other: "BoundaryMap") -> "Composition":
        return Composition((self, other))

    def _check_regular(self, x, atol=0.0):
        for s in self.singular_points:
            if np.any(np.linalg.norm(x - s, axis=-1) <= atol):
                raise NotDifferentiableError(
                    f"{self.to_text() if self._has_text() else type(self).__name__} "
                    f"is not differentiable at {tuple(s)}"
                )

    def _has_text(self) -> bool:
        try:
            self.to_text()
        except NotImplementedError:
            return False
        return True


@dataclass(frozen=True)
class Linear(BoundaryMap):
    """``(x1, x2) -> (a x1 + b x2, c x1 + d x2)`` with ``ad - bc > 0``."""

    a: float = 1.0
    b: float = 0.0
    c: float = 0.0
    d: float = 1.0

    def __post_init__(self):
        if not self.a * self.d - self.b * self.c > 0:
            raise ValueError("linear boundary map must satisfy ad - bc > 0")

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]], dtype=float)

    @property
    def is_conformal(self) -> bool:
        return self.a == self.d and self.b == -self.c

    def __call__(self, x):
        return _as_points(x) @ self.matrix.T

    def differential(self, x):
        x = _as_points(x)
        return np.broadcast_to(self.matrix, x.shape[:-1] + (2, 2)).copy()

    def inverse_points(self, y):
        return _as_points(y) @ np.linalg.inv(self.matrix).T

    def to_text(self):
        return f"linear({_fmt(self.a)}, {_fmt(self.b)}, {_fmt(self.c)}, {_fmt(self.d)})"


@dataclass(frozen=True)
class RadialPower(BoundaryMap):
    """``z -> z |z|^(k-1)``; radial stretch ``k |z|^(k-1)``, tangential ``|z|^(k-1)``."""

    k: float = 2.0

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError("radial power exponent must be positive")

    @property
    def is_conformal(self) -> bool:
        return self.k == 1.0

    @property
    def singular_points(self):
        return [] if self.k == 1.0 else [np.zeros(2)]

    def __call__(self, x):
        x = _as_points(x)
        r = np.linalg.norm(x, axis=-1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(r > 0, r ** (self.k - 1.0), 0.0)
        return x * scale

    def differential(self, x):
        x = _as_points(x)
        self._check_regular(x)
        r = np.linalg.norm(x, axis=-1)
        u = x / r[..., None]
        outer = u[..., :, None] * u[..., None, :]
        return (r ** (self.k - 1.0))[..., None, None] * (np.eye(2) + (self.k - 1.0) * outer)

    def inverse_points(self, y):
        y = _as_points(y)
        r = np.linalg.norm(y, axis=-1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(r > 0, r ** (1.0 / self.k - 1.0), 0.0)
        return y * scale

    def to_text(self):
        return f"radial_power({_fmt(self.k)})"


@dataclass(frozen=True)
class MobiusBoundary(BoundaryMap):
    """Plane Mobius map ``z -> (a z + b) / (c z + d)`` in complex notation."""

    a: complex = 1.0
    b: complex = 0.0
    c: complex = 0.0
    d: complex = 1.0

    is_conformal = True

    def __post_init__(self):
        for name in "abcd":
            object.__setattr__(self, name, complex(getattr(self, name)))
        if abs(self.a * self.d - self.b * self.c) == 0:
            raise ValueError("degenerate Mobius coefficients")

    @property
    def fixes_infinity(self) -> bool:
        return self.c == 0

    @property
    def singular_points(self):
        if self.c == 0:
            return []
        pole = -self.d / self.c
        return [np.array([pole.real, pole.imag])]

    def _complex_eval(self, z):
        return (self.a * z + self.b) / (self.c * z + self.d)

    def extended_image(self, z, rtol: float = 1e-9):
        if z is None:
            return None if self.c == 0 else _from_complex(self.a / self.c)
        w = complex(z[0], z[1])
        den = self.c * w + self.d
        if abs(den) <= rtol * (abs(self.c * w) + abs(self.d)):
            return None
        return _from_complex((self.a * w + self.b) / den)

    def __call__(self, x):
        return _from_complex(self._complex_eval(_to_complex(_as_points(x))))

    def differential(self, x):
        x = _as_points(x)
        self._check_regular(x)
        z = _to_complex(x)
        fp = (self.a * self.d - self.b * self.c) / (self.c * z + self.d) ** 2
        out = np.empty(x.shape[:-1] + (2, 2))
        out[..., 0, 0] = fp.real
        out[..., 0, 1] = -fp.imag
        out[..., 1, 0] = fp.imag
        out[..., 1, 1] = fp.real
        return out

    def inverse(self) -> "MobiusBoundary":
        return MobiusBoundary(self.d, -self.b, -self.c, self.a)

    def inverse_points(self, y):
        return self.inverse()(y)

    def to_text(self):
        return f"mobius({_fmt(self.a)}, {_fmt(self.b)}, {_fmt(self.c)}, {_fmt(self.d)})"


@dataclass(frozen=True)
class Composition(BoundaryMap):
    """``Composition((f1, ..., fn))`` is ``f1 o ... o fn``."""

    maps: tuple = ()

    def __post_init__(self):
        flat = []
        for m in self.maps:
            flat.extend(m.maps if isinstance(m, Composition) else (m,))
        object.__setattr__(self, "maps", tuple(flat))

    @property
    def is_conformal(self) -> bool:
        return all(m.is_conformal for m in self.maps)

    @property
    def fixes_infinity(self) -> bool:
        # follow infinity through the chain; poles are matched to a relative tolerance
        z = None
        for m in reversed(self.maps):
            try:
                z = m.extended_image(z)
            except NotImplementedError:
                return False
        return z is None

    @property
    def singular_points(self):
        pts = []
        for i, m in enumerate(self.maps):
            inner = self.maps[i + 1:]
            for s in m.singular_points:
                s = np.asarray(s, dtype=float)
                with np.errstate(divide="ignore", invalid="ignore"):
                    for g in inner:
                        s = g.inverse_points(s)
                # a singularity pulled back to infinity never meets a quadrature node
                if np.all(np.isfinite(s)):
                    pts.append(s)
        return pts

    def __call__(self, x):
        x = _as_points(x)
        for m in reversed(self.maps):
            x = m(x)
        return x

    def differential(self, x):
        x = _as_points(x)
        jac = np.broadcast_to(np.eye(2), x.shape[:-1] + (2, 2))
        for m in reversed(self.maps):
            jac = m.differential(x) @ jac
            x = m(x)
        return jac

    def inverse_points(self, y):
        for m in self.maps:
            y = m.inverse_points(y)
        return y

    def to_text(self):
        if not self.maps:
            return "linear(1.0, 0.0, 0.0, 1.0)"
        return " o ".join(m.to_text() for m in self.maps)


class SampledMap(BoundaryMap):
    """Arbitrary plane map with central-difference derivatives.

    Meant for experiments only; derivatives carry an ``O(step^2)`` error.
    """

    def __init__(self, func: Callable, step: float = 1e-5, singular_points: Sequence = ()):
        self.func = func
        self.step = step
        self._singular = [np.asarray(s, dtype=float) for s in singular_points]

    @property
    def singular_points(self):
        return self._singular

    def __call__(self, x):
        return np.asarray(self.func(_as_points(x)), dtype=float)

    def differential(self, x):
        return finite_difference_differential(self, x, self.step)

    def inverse_points(self, y):
        raise NotImplementedError("sampled maps have no inverse")


# ---------------------------------------------------------------------------
# derived quantities


def finite_difference_differential(f, x, h: float = 1e-6):
    """Central-difference Jacobian, used as an independent check on ``differential``."""
    x = _as_points(x)
    cols = []
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        cols.append((f(x + e) - f(x - e)) / (2.0 * h))
    return np.stack(cols, axis=-1)


@dataclass(frozen=True)
class BoundaryDerivative:
    matrix: np.ndarray

    @property
    def singular_values(self):
        return np.linalg.svd(self.matrix, compute_uv=False)

    @property
    def jacobian(self) -> float:
        return float(np.linalg.det(self.matrix))


def differential(f: BoundaryMap, x) -> BoundaryDerivative:
    jac = f.differential(np.asarray(x, dtype=float).reshape(2))
    return BoundaryDerivative(np.asarray(jac).reshape(2, 2))


def boundary_energy(f: BoundaryMap, x):
    """Squared Frobenius norm of the differential (vectorised)."""
    jac = f.differential(x)
    return np.sum(jac * jac, axis=(-2, -1))


def distortion_boundary(f: BoundaryMap, x):
    """Ratio of the singular values of the differential (vectorised)."""
    sv = np.linalg.svd(f.differential(x), compute_uv=False)
    return sv[..., 0] / sv[..., 1]


def normalize(f: BoundaryMap) -> BoundaryMap:
    """Post-compose with a complex similarity so that 0 and 1 are fixed.

    Only maps fixing infinity can be normalised this way.
    """
    if not f.fixes_infinity:
        raise ValueError("map does not fix infinity; conjugate it first")
    w0, w1 = _to_complex(f(np.array([[0.0, 0.0], [1.0, 0.0]])))
    if w1 == w0:
        raise ValueError("degenerate map: f(0) == f(1)")
    m = MobiusBoundary(1.0 / (w1 - w0), -w0 / (w1 - w0), 0.0, 1.0)
    return Composition((m, f))


def mobius_from_isometry(g: IsometryElement) -> MobiusBoundary:
    """Boundary action of a half-space-preserving isometry as a plane Mobius map."""
    candidates = np.array([0.137 + 0.251j, -0.419 + 0.733j, 0.621 - 0.388j,
                           -0.275 - 0.514j, 1.312 + 0.077j])
    images = plane_action(g, candidates)
    ok = np.isfinite(images) & (np.abs(images) < 1e10)
    if ok.sum() < 3:
        raise ValueError("could not fit a Mobius map to the isometry")
    z = candidates[ok][:3]
    w = images[ok][:3]
    m = np.linalg.solve(_cross_ratio_matrix(w), _cross_ratio_matrix(z))
    m = m / np.sqrt(np.linalg.det(m))
    a, b, c, d = m.ravel()
    if abs(c) < 1e-14 * max(abs(a), abs(d)):
        c = 0.0
    return MobiusBoundary(a, b, c, d)


def _cross_ratio_matrix(z):
    z1, z2, z3 = z
    return np.array([[z2 - z3, -z1 * (z2 - z3)], [z2 - z1, -z3 * (z2 - z1)]])


def conjugate(outer: IsometryElement, f: BoundaryMap, inner: IsometryElement) -> BoundaryMap:
    """Boundary map of ``outer o f o inner`` for half-space-preserving isometries."""
    return Composition((mobius_from_isometry(outer), f, mobius_from_isometry(inner)))


# ---------------------------------------------------------------------------
# text form

_TERM = re.compile(r"^\s*([a-z_]+)\s*(?:\((.*)\))?\s*$")


def parse_map(text: str) -> BoundaryMap:
    """Parse the one-line text form produced by ``to_text``."""
    parts = re.split(r"\s+o\s+", text.strip())
    maps = [_parse_term(p) for p in parts]
    return maps[0] if len(maps) == 1 else Composition(tuple(maps))


def _parse_term(term: str) -> BoundaryMap:
    m = _TERM.match(term)
    if not m:
        raise ValueError(f"cannot parse boundary map term {term!r}")
    name, args = m.group(1), m.group(2)
    values = [a.strip() for a in args.split(",")] if args and args.strip() else []
    try:
        if name == "identity" and not values:
            return Linear(1.0, 0.0, 0.0, 1.0)
        if name == "linear" and len(values) == 4:
            return Linear(*(float(v) for v in values))
        if name == "radial_power" and len(values) == 1:
            return RadialPower(float(values[0]))
        if name == "mobius" and len(values) == 4:
            return MobiusBoundary(*(complex(v.replace(" ", "")) for v in values))
    except ValueError as exc:
        raise ValueError(f"bad parameters in {term!r}: {exc}") from None
    raise ValueError(f"unknown boundary map {term!r}")
