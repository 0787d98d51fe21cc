"""Constants of the distance estimate: ledger arithmetic and brute-force oracles."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.spatial.transform import Rotation

from ..boundary import BoundaryMap, conjugate
from ..calculus import DEFAULT_STEP, local_geometry
from ..extension import GoodExtensionMap, QuadratureSpec
from ..flow import MapField
from ..geometry import (
    BALL,
    HALFSPACE,
    IDENTITY,
    STANDARD,
    IsometryElement,
    ball_translation_sending,
    cayley_array,
    chart_distance,
)
from .sphere import green_ball_integral

TANH_QUARTER = float(np.tanh(0.25))
MEASURED = "measured"
SUPPLIED = "supplied"
_INPUTS = ("K", "q", "T", "D")


class MissingConstantsError(ValueError):
    def __init__(self, missing):
        self.missing = tuple(missing)
        super().__init__("missing constants: " + ", ".join(self.missing))


# ---------------------------------------------------------------------------
# ledger


@dataclass(frozen=True)
class ConstantsLedger:
    """Inputs ``K, q, T, D`` with provenance; every other field is derived on read.

    ``psi_K`` uses ``int G_r d lambda`` as its radial factor (the plain
    ``int_0^r G_r(rho) d rho`` diverges at the origin).
    """

    K: float
    q: float
    T: float
    D: float
    r0: float
    provenance: dict = field(default_factory=dict)
    radial_nodes: int = 64

    def __post_init__(self):
        for name in _INPUTS:
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v!r}")
        if not 0.0 < self.r0 < 1.0:
            raise ValueError("r0 must lie in (0, 1)")
        prov = dict(self.provenance)
        for name in _INPUTS:
            tag = prov.setdefault(name, SUPPLIED)
            if tag not in (MEASURED, SUPPLIED):
                raise ValueError(f"provenance of {name} must be {MEASURED!r} or {SUPPLIED!r}")
        object.__setattr__(self, "provenance", prov)

    @property
    def D_prime(self) -> float:
        return 2.0 * (self.D - 1.0)

    @property
    def D_second(self) -> float:
        return (self.D + 1.0) ** 2

    @property
    def eps0(self) -> float:
        return 0.25 * self.q * TANH_QUARTER

    @property
    def C1(self) -> float:
        return 2.0 * self.T

    @property
    def C2(self) -> float:
        return 0.5 * self.q * TANH_QUARTER

    @property
    def P(self) -> float:
        return 2.0 * self.T + 0.5 * self.q * TANH_QUARTER

    @property
    def M(self) -> float:
        return self.D_prime + 1.0

    def green_integral(self, r: float) -> float:
        return green_ball_integral(r, self.radial_nodes)

    def phi_K(self, r: float) -> float:
        return 4.0 / 3.0 * (self.D_prime + self.D_second + 2.0 * self.T * self.green_integral(r))

    def psi_K(self, r: float) -> float:
        return self.P * self.phi_K(r) * self.green_integral(r)

    @property
    def D1(self) -> float:
        return self.psi_K(self.r0) + self.D_second

    def as_dict(self) -> dict:
        out = {name: getattr(self, name) for name in _INPUTS}
        out["r0"] = self.r0
        out.update({f"provenance.{k}": v for k, v in sorted(self.provenance.items())})
        out.update({
            "D_prime": self.D_prime, "D_second": self.D_second, "eps0": self.eps0, "P": self.P,
            "M": self.M, "C1": self.C1, "C2": self.C2, "phi_K(r0)": self.phi_K(self.r0),
            "psi_K(r0)": self.psi_K(self.r0), "D1": self.D1,
        })
        return out

    def to_text(self) -> str:
        lines = ["# constants ledger"]
        for k, v in self.as_dict().items():
            lines.append(f"{k}: {v!r}" if isinstance(v, float) else f"{k}: {v}")
        return "\n".join(lines) + "\n"


def constants_ledger_build(K=None, q=None, T=None, D=None, r0=None, provenance: dict | None = None,
                           radial_nodes: int = 64) -> ConstantsLedger:
    """Ledger from explicit inputs; absent inputs are an error, never defaulted."""
    given = {"K": K, "q": q, "T": T, "D": D, "r0": r0}
    missing = [k for k, v in given.items() if v is None]
    if missing:
        raise MissingConstantsError(missing)
    return ConstantsLedger(float(K), float(q), float(T), float(D), float(r0), dict(provenance or {}),
                           radial_nodes)


def increasing_on(func, grid) -> bool:
    vals = [func(r) for r in grid]
    return bool(np.all(np.diff(vals) > 0))


# ---------------------------------------------------------------------------
# brute-force oracles


def energy_jacobian_ratio(sigma):
    """``e / J^(2/3)`` for singular values ``sigma`` (last axis), i.e. ``(1/2) sum s^2 / (prod s)^(2/3)``."""
    s = np.asarray(sigma, dtype=float)
    return 0.5 * np.sum(s * s, axis=-1) / np.prod(s, axis=-1) ** (2.0 / 3.0)


def k2_oracle(K1: float, grid: int = 201) -> float:
    """Supremum of ``e / J^(2/3)`` over singular triples with ratio at most ``K1``.

    Dense search over ``1 = s3 <= s2 <= s1 <= K1`` followed by bounded local
    refinement from the best grid point.
    """
    if not K1 >= 1:
        raise ValueError("K1 must be at least 1")
    if K1 == 1:
        return float(energy_jacobian_ratio([1.0, 1.0, 1.0]))
    a = np.linspace(1.0, K1, grid)
    u = np.linspace(0.0, 1.0, grid)
    A, U = np.meshgrid(a, u, indexing="ij")
    B = 1.0 + U * (A - 1.0)
    vals = energy_jacobian_ratio(np.stack([A, B, np.ones_like(A)], axis=-1))
    i, j = np.unravel_index(np.argmax(vals), vals.shape)

    def neg(x):
        s1, w = x
        return -float(energy_jacobian_ratio([s1, 1.0 + w * (s1 - 1.0), 1.0]))

    res = minimize(neg, [A[i, j], U[i, j]], method="L-BFGS-B", bounds=[(1.0, K1), (0.0, 1.0)])
    return float(max(vals[i, j], -res.fun))


def k2_closed_form(K1: float) -> float:
    """Value of the vertex ``(K1, 1, 1)``, where the supremum is attained."""
    return (K1 * K1 + 2.0) / (2.0 * K1 ** (2.0 / 3.0))


def c_ratio(A, v3):
    """``|det A|^(2/3) / sum_{i, j<=2} alpha_i^j^2`` for frame matrices ``A`` and geodesic directions ``v3``.

    Columns of ``A`` are images of the source frame; ``v3`` is a unit target
    vector.  Degree-0 homogeneous in ``A``.
    """
    A = np.asarray(A, dtype=float)
    v3 = np.asarray(v3, dtype=float)
    v3 = v3 / np.linalg.norm(v3, axis=-1, keepdims=True)
    along = np.einsum("...ai,...a->...i", A, v3)
    horiz = np.sum(A * A, axis=(-2, -1)) - np.sum(along * along, axis=-1)
    return np.abs(np.linalg.det(A)) ** (2.0 / 3.0) / horiz


@dataclass(frozen=True)
class COracleResult:
    value: float
    sample_max: float
    samples: int
    seed: int
    K1: float


def _random_rotations(rng, n):
    q = rng.standard_normal((n, 4))
    return Rotation.from_quat(q / np.linalg.norm(q, axis=1, keepdims=True)).as_matrix()


def c_oracle(K1: float, samples: int = 100_000, seed: int = 0, refine: bool = True) -> COracleResult:
    """Supremum of :func:`c_ratio` over frame matrices of distortion at most ``K1``.

    Without a distortion bound the ratio is unbounded, so the matrices are
    ``U diag(s) V^T`` with random rotations and singular values in
    ``[1, K1]``; geodesic directions are random unit vectors.  The best sample
    seeds a local refinement.  Deterministic for a fixed seed.
    """
    if not K1 >= 1:
        raise ValueError("K1 must be at least 1")
    rng = np.random.default_rng(seed)
    U = _random_rotations(rng, samples)
    V = _random_rotations(rng, samples)
    s = np.exp(rng.random((samples, 3)) * np.log(K1))
    s[:, 2] = 1.0
    A = U * s[:, None, :] @ np.swapaxes(V, -1, -2)
    v = rng.standard_normal((samples, 3))
    keep = np.abs(np.linalg.det(A)) > 1e-12
    ratios = c_ratio(A[keep], v[keep])
    k = int(np.argmax(ratios))
    best = float(ratios[k])
    if not refine:
        return COracleResult(best, best, int(keep.sum()), seed, float(K1))

    # parameters: two log-singular values (squashed into [0, log K1]), rotation vector of U, v3 angles
    logk = np.log(K1)

    def unpack(x):
        s1, s2 = np.exp(logk / (1.0 + np.exp(-x[:2])))
        Um = Rotation.from_rotvec(x[2:5]).as_matrix()
        th, ph = x[5], x[6]
        v3 = np.array([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)])
        return Um * np.array([s1, s2, 1.0]), v3

    Ub = U[keep][k]
    sb = s[keep][k]
    vb = v[keep][k] / np.linalg.norm(v[keep][k])
    frac = np.clip(np.log(sb[:2]) / logk, 1e-6, 1 - 1e-6) if logk > 0 else np.full(2, 0.5)
    x0 = np.concatenate([np.log(frac / (1 - frac)), Rotation.from_matrix(Ub).as_rotvec(),
                         [np.arccos(np.clip(vb[2], -1, 1)), np.arctan2(vb[1], vb[0])]])
    res = minimize(lambda x: -float(c_ratio(*unpack(x))), x0, method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 20000})
    return COracleResult(max(best, -float(res.fun)), best, int(keep.sum()), seed, float(K1))


def c_closed_form(K1: float) -> float:
    """``K1^(2/3) / 2``: worst geodesic direction along the top singular vector, ``s = (K1, 1, 1)``."""
    return K1 ** (2.0 / 3.0) / 2.0


def q_from(C: float, K2: float) -> float:
    return 1.0 / (C * K2)


# ---------------------------------------------------------------------------
# measured constants


@dataclass(frozen=True)
class Measured:
    """An empirically measured constant with the location of its maximiser."""

    value: float
    argmax: tuple
    points: int
    tag: str = MEASURED


def halfspace_lattice(n: int = 5, extent: float = 2.0, heights=(0.25, 0.5, 1.0, 2.0)) -> np.ndarray:
    """Points ``(x, y, t)`` on an ``n x n`` square of half-width ``extent`` at each height."""
    xs = np.linspace(-extent, extent, n)
    X, Y, T = np.meshgrid(xs, xs, np.asarray(heights, dtype=float), indexing="ij")
    return np.stack([X.ravel(), Y.ravel(), T.ravel()], axis=-1)


def tension_sup_estimate(f: BoundaryMap, lattice=None, quad: QuadratureSpec = QuadratureSpec(),
                         h: float = DEFAULT_STEP) -> Measured:
    """Largest tension of the extension of ``f`` over a half-space lattice (empirical ``T``)."""
    pts = halfspace_lattice() if lattice is None else np.atleast_2d(np.asarray(lattice, dtype=float))
    norms = local_geometry(GoodExtensionMap(f, quad), pts, h).tension_norm
    k = int(np.argmax(norms))
    return Measured(float(norms[k]), tuple(pts[k]), len(pts))


def _apply(g: IsometryElement, pts):
    out, chart = g.apply(pts, HALFSPACE)
    return out if chart == HALFSPACE else cayley_array(out)


def conjugation_distance(f: BoundaryMap, I: IsometryElement, J: IsometryElement, lattice=None,
                         quad: QuadratureSpec = QuadratureSpec()) -> Measured:
    """Largest distance between ``I o Psi(f) o J`` and ``Psi(I o f o J)`` over a lattice (empirical ``D``)."""
    g = conjugate(I, f, J)
    if not g.fixes_infinity:
        raise ValueError("conjugated boundary map does not fix infinity; its extension is undefined")
    pts = halfspace_lattice() if lattice is None else np.atleast_2d(np.asarray(lattice, dtype=float))
    lhs = _apply(I, GoodExtensionMap(f, quad)(_apply(J, pts)))
    rhs = GoodExtensionMap(g, quad)(pts)
    d = chart_distance(lhs, rhs, HALFSPACE)
    k = int(np.argmax(d))
    return Measured(float(d[k]), tuple(pts[k]), len(pts))


def normalizing_isometry(f: BoundaryMap, J: IsometryElement) -> IsometryElement:
    """Ball translation ``I`` with ``I o f o J`` fixing infinity."""
    inf_ball = np.array([0.0, 0.0, -1.0])
    src_ball, _ = J.apply(inf_ball, BALL)
    if np.linalg.norm(src_ball - inf_ball) < 1e-14:
        if not f.fixes_infinity:
            raise ValueError("boundary map moves infinity; no translation is needed for J but f must fix it")
        return IDENTITY
    src = cayley_array(src_ball)
    img = f(src[None, :2])[0]
    target = cayley_array(np.array([img[0], img[1], 0.0]))
    return ball_translation_sending(target, inf_ball)


# ---------------------------------------------------------------------------
# quasi-isometry constants


@dataclass(frozen=True)
class QIConstants:
    L: float
    A: float
    pairs: int
    L_grid: np.ndarray
    A_of_L: np.ndarray


def qi_constants(F, points=None, pairs: int = 1000, seed: int = 0, L_grid=None) -> QIConstants:
    """Smallest ``(L, A)`` (minimising ``L + A`` over ``L_grid``) with

        d(p, q) / L - A <= d(F(p), F(q)) <= L d(p, q) + A

    on seeded random pairs.  ``F`` is a :class:`MapField` (pairs of nodes) or
    an interior map together with sample ``points`` in its chart.
    """
    if pairs < 1:
        raise ValueError("need at least one pair")
    if isinstance(F, MapField):
        src, img, chart = F.grid.nodes, F.values, F.grid.chart
    else:
        if points is None:
            raise ValueError("sample points are required for an interior map")
        src = np.atleast_2d(np.asarray(points, dtype=float))
        img, chart = F(src), F.chart
    rng = np.random.default_rng(seed)
    i = rng.integers(0, len(src), pairs)
    j = rng.integers(0, len(src), pairs)
    ok = i != j
    i, j = i[ok], j[ok]
    ds = chart_distance(src[i], src[j], chart, STANDARD)
    dt = chart_distance(img[i], img[j], chart, STANDARD)
    if dt.max() <= 1e-12 * max(1.0, ds.max()):
        raise ValueError("degenerate map: all sampled image distances vanish")
    if L_grid is None:
        L_grid = np.round(np.arange(1.0, 20.0 + 1e-9, 0.001), 12)
    L_grid = np.asarray(L_grid, dtype=float)
    upper = np.max(dt[None, :] - L_grid[:, None] * ds[None, :], axis=1)
    lower = np.max(ds[None, :] / L_grid[:, None] - dt[None, :], axis=1)
    A = np.maximum(np.maximum(upper, lower), 0.0)
    k = int(np.argmin(L_grid + A))
    return QIConstants(float(L_grid[k]), float(A[k]), int(ok.sum()), L_grid, A)


__all__ = [
    "TANH_QUARTER", "MEASURED", "SUPPLIED", "MissingConstantsError", "ConstantsLedger",
    "constants_ledger_build", "increasing_on", "energy_jacobian_ratio", "k2_oracle", "k2_closed_form",
    "c_ratio", "COracleResult", "c_oracle", "c_closed_form", "q_from", "Measured", "halfspace_lattice",
    "tension_sup_estimate", "conjugation_distance", "normalizing_isometry", "QIConstants", "qi_constants",
]
