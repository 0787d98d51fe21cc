"""Hopf differentials of maps of the unit disc and a 2-D harmonic map heat flow.

The disc carries the density ``rho(w) = 2 / (1 - |w|^2)`` (curvature -1); the
Hopf differential of ``f`` is ``rho(f)^2 f_z conj(f_zbar) dz^2``, which is
holomorphic when ``f`` is harmonic.  The harmonic map equation reads

    Lap f + 8 conj(f) f_z f_zbar / (1 - |f|^2) = 0,

and :func:`disc_flow` relaxes it on a Cartesian grid clipped to the disc, with
Shortley-Weller stencils at the circle.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .geometry import DomainError

logger = logging.getLogger(__name__)

DISC_DENSITIES = {"standard": 2.0, "paper": 1.0}


class DiscFlowError(RuntimeError):
    """The disc flow could not keep the image inside the disc."""


def disc_density(w, convention: str = "standard"):
    """Hyperbolic density at ``w``; ``"standard"`` is ``2/(1-|w|^2)``, ``"paper"`` half of it."""
    w = np.asarray(w, dtype=complex)
    s = 1.0 - np.abs(w) ** 2
    if np.any(s <= 0):
        raise DomainError("point on or outside the unit circle")
    return DISC_DENSITIES[convention] / s


def wirtinger_fd(F: Callable, z, h: float = 1e-5):
    """``(f_z, f_zbar)`` from central differences of step ``h``."""
    z = np.asarray(z, dtype=complex)
    fx = (F(z + h) - F(z - h)) / (2.0 * h)
    fy = (F(z + 1j * h) - F(z - 1j * h)) / (2.0 * h)
    return 0.5 * (fx - 1j * fy), 0.5 * (fx + 1j * fy)


# ---------------------------------------------------------------------------
# disc maps


class DiscMap:
    """A map of the unit disc to itself with Wirtinger derivatives."""

    name = "disc map"

    def __call__(self, z):
        raise NotImplementedError

    def wirtinger(self, z):
        return wirtinger_fd(self, z)


@dataclass(frozen=True)
class ClosedFormDiscMap(DiscMap):
    """``func`` with optional analytic ``f_z`` and ``f_zbar`` (finite differences otherwise)."""

    func: Callable
    dz: Callable | None = None
    dzbar: Callable | None = None
    name: str = "closed form"

    def __call__(self, z):
        return np.asarray(self.func(np.asarray(z, dtype=complex)), dtype=complex)

    def wirtinger(self, z):
        z = np.asarray(z, dtype=complex)
        if self.dz is None or self.dzbar is None:
            return wirtinger_fd(self, z)
        return (np.asarray(self.dz(z), dtype=complex) + 0 * z, np.asarray(self.dzbar(z), dtype=complex) + 0 * z)


def disc_identity() -> ClosedFormDiscMap:
    return ClosedFormDiscMap(lambda z: z, lambda z: np.ones_like(z), lambda z: np.zeros_like(z), "identity")


def disc_mobius(a: complex = 0.0, angle: float = 0.0) -> ClosedFormDiscMap:
    """Automorphism ``e^{i angle} (z - a) / (1 - conj(a) z)`` for ``|a| < 1``."""
    a = complex(a)
    if abs(a) >= 1:
        raise ValueError("need |a| < 1")
    rot = np.exp(1j * angle)
    return ClosedFormDiscMap(
        lambda z: rot * (z - a) / (1.0 - np.conj(a) * z),
        lambda z: rot * (1.0 - abs(a) ** 2) / (1.0 - np.conj(a) * z) ** 2,
        lambda z: np.zeros_like(z),
        f"mobius(a={a!r}, angle={angle!r})",
    )


def disc_affine(a: complex, b: complex) -> ClosedFormDiscMap:
    """``a z + b conj(z)``; maps the disc into itself when ``|a| + |b| <= 1``."""
    a, b = complex(a), complex(b)
    return ClosedFormDiscMap(lambda z: a * z + b * np.conj(z), lambda z: a + 0 * z, lambda z: b + 0 * z,
                             f"affine({a!r}, {b!r})")


def hopf_differential(F: DiscMap, z, convention: str = "standard"):
    """``rho(F)^2 F_z conj(F_zbar)`` at ``z`` (complex scalar or array)."""
    z = np.asarray(z, dtype=complex)
    if np.any(np.abs(z) >= 1):
        raise DomainError("Hopf differential needs |z| < 1")
    w = F(z)
    fz, fzb = F.wirtinger(z)
    out = disc_density(w, convention) ** 2 * fz * np.conj(fzb)
    return out if out.ndim else complex(out)


def phi_n(n: int, z, dtype=complex):
    """``2^(n-2) z^(n-2)``, evaluated in ``dtype``."""
    if int(n) != n or n < 2:
        raise ValueError("n must be an integer >= 2")
    n = int(n)
    z = np.asarray(z, dtype=dtype)
    out = (2 * z) ** (n - 2)
    return out if out.ndim else out[()]


_PI_LONG = np.longdouble("3.141592653589793238462643383279502884")


def rotation_identity_residual(n: int, z):
    """``|phi_n(R z) R'^2 - phi_n(z)|`` for the rotation ``R z = e^{2 pi i/n} z``.

    Evaluated in extended precision: ``|phi_12|`` reaches ``2^10`` on the disc,
    where double rounding of ``R z`` alone costs about ``1e-12``.
    """
    z = np.asarray(z, dtype=np.clongdouble)
    if np.any(np.abs(z) > 1):
        raise ValueError("need |z| <= 1")
    rot = np.exp(np.clongdouble(2j) * _PI_LONG / n)
    res = np.abs(phi_n(n, rot * z, np.clongdouble) * rot**2 - phi_n(n, z, np.clongdouble)).astype(float)
    return res if np.ndim(res) else float(res)


def hopf_holomorphy_residual(F: DiscMap, z, h: float | None = None, convention: str = "standard"):
    """``|d/dzbar Hopf(F)|`` at ``z`` by central differences of step ``h``.

    For grid maps the default step is the lattice spacing, so at nodes the
    differences use nodal values only.
    """
    if h is None:
        h = getattr(F, "spacing", 1e-4)
    z = np.asarray(z, dtype=complex)

    def hopf(w):
        return hopf_differential(F, w, convention)

    _, dzb = wirtinger_fd(hopf, z, h)
    res = np.abs(dzb)
    return res if np.ndim(res) else float(res)


# ---------------------------------------------------------------------------
# grids on the disc


@dataclass(frozen=True)
class DiscGrid:
    """Nodes of the lattice ``[-1, 1]^2`` with spacing ``2/(n-1)`` inside the disc.

    A node is interior when ``|z| < 1 - margin * h``; every stencil arm leaving
    the interior is cut where the axis line meets the unit circle.
    """

    n: int
    margin: float = 0.05

    def __post_init__(self):
        if self.n < 5:
            raise ValueError("need at least 5 nodes per axis")

    @property
    def spacing(self) -> float:
        return 2.0 / (self.n - 1)

    @cached_property
    def axis(self) -> np.ndarray:
        return np.linspace(-1.0, 1.0, self.n)

    @cached_property
    def _lookup(self) -> np.ndarray:
        x = self.axis
        zz = x[:, None] + 1j * x[None, :]
        inside = np.abs(zz) < 1.0 - self.margin * self.spacing
        table = np.full((self.n, self.n), -1, dtype=np.int64)
        table[inside] = np.arange(int(inside.sum()))
        return table

    @cached_property
    def index(self) -> np.ndarray:
        return np.argwhere(self._lookup >= 0)

    @cached_property
    def nodes(self) -> np.ndarray:
        i, j = self.index.T
        return self.axis[i] + 1j * self.axis[j]

    @cached_property
    def arms(self):
        """Per node and direction (+x, -x, +y, -y): neighbour id or -1, arm length, boundary point."""
        h = self.spacing
        m = len(self.nodes)
        ids = np.full((m, 4), -1, dtype=np.int64)
        length = np.full((m, 4), h)
        point = np.zeros((m, 4), dtype=complex)
        steps = [(1, 0), (-1, 0), (0, 1), (0, -1)]
        for k, (di, dj) in enumerate(steps):
            ni, nj = self.index[:, 0] + di, self.index[:, 1] + dj
            ok = (ni >= 0) & (ni < self.n) & (nj >= 0) & (nj < self.n)
            nb = np.full(m, -1, dtype=np.int64)
            nb[ok] = self._lookup[ni[ok], nj[ok]]
            ids[:, k] = nb
            cut = nb < 0
            z = self.nodes[cut]
            if di:
                s = np.sqrt(1.0 - z.imag**2) * di - z.real
                point[cut, k] = z + s
            else:
                s = np.sqrt(1.0 - z.real**2) * dj - z.imag
                point[cut, k] = z + 1j * s
            length[cut, k] = np.abs(s)
        return ids, length, point

    @cached_property
    def operators(self):
        """Sparse ``(Dx, Dy, Lap)`` over interior nodes and the boundary-arm weights."""
        ids, length, _ = self.arms
        m = len(self.nodes)
        rows = np.arange(m)
        mats = []
        bweights = []
        for plus, minus in ((0, 1), (2, 3)):
            ap, am = length[:, plus], length[:, minus]
            # first derivative on the three points -am, 0, ap
            cp = am / (ap * (ap + am))
            cm = -ap / (am * (ap + am))
            c0 = -(cp + cm)
            # second derivative
            lp = 2.0 / (ap * (ap + am))
            lm = 2.0 / (am * (ap + am))
            l0 = -(lp + lm)
            mats.append((cp, cm, c0, lp, lm, l0, plus, minus))
        D = []
        lap_rows, lap_cols, lap_vals = [], [], []
        lap_b = np.zeros((m, 4))
        d_b = []
        for cp, cm, c0, lp, lm, l0, plus, minus in mats:
            r, c, v = [rows], [rows], [c0]
            lap_rows.append(rows)
            lap_cols.append(rows)
            lap_vals.append(l0)
            b = np.zeros((m, 4))
            for k, cw, lw in ((plus, cp, lp), (minus, cm, lm)):
                nb = ids[:, k]
                ok = nb >= 0
                r.append(rows[ok])
                c.append(nb[ok])
                v.append(cw[ok])
                lap_rows.append(rows[ok])
                lap_cols.append(nb[ok])
                lap_vals.append(lw[ok])
                b[~ok, k] = cw[~ok]
                lap_b[~ok, k] = lw[~ok]
            D.append(sp.csr_matrix((np.concatenate(v), (np.concatenate(r), np.concatenate(c))), shape=(m, m)))
            d_b.append(b)
        lap = sp.csr_matrix(
            (np.concatenate(lap_vals), (np.concatenate(lap_rows), np.concatenate(lap_cols))), shape=(m, m)
        )
        return D[0], D[1], lap, d_b[0], d_b[1], lap_b


def _boundary_values(grid: DiscGrid, g: Callable) -> np.ndarray:
    ids, _, point = grid.arms
    out = np.zeros(point.shape, dtype=complex)
    cut = ids < 0
    theta = np.angle(point[cut])
    vals = np.asarray(g(theta), dtype=complex)
    if np.any(np.abs(np.abs(vals) - 1.0) > 1e-9):
        raise ValueError("boundary values must lie on the unit circle")
    out[cut] = vals
    return out


class GridDiscMap(DiscMap):
    """Node values of a disc map with bilinear interpolation off-node.

    Values and Wirtinger derivatives at nodes come from the Shortley-Weller
    stencils; between nodes both are interpolated.  Points in the thin shell
    next to the circle that is not covered by interior cells raise
    :class:`DomainError`.
    """

    name = "grid field"

    def __init__(self, grid: DiscGrid, values, boundary: Callable):
        self.grid = grid
        self.values = np.asarray(values, dtype=complex)
        self.values.setflags(write=False)
        self.boundary = boundary
        self._bvals = _boundary_values(grid, boundary)

    @property
    def spacing(self) -> float:
        return self.grid.spacing

    @cached_property
    def node_wirtinger(self):
        Dx, Dy, _, bx, by, _ = self.grid.operators
        fx = Dx @ self.values + np.sum(bx * self._bvals, axis=1)
        fy = Dy @ self.values + np.sum(by * self._bvals, axis=1)
        return 0.5 * (fx - 1j * fy), 0.5 * (fx + 1j * fy)

    def _interp(self, data, z):
        z = np.asarray(z, dtype=complex)
        shape = z.shape
        z = z.ravel()
        h = self.grid.spacing
        u = (z.real + 1.0) / h
        v = (z.imag + 1.0) / h
        i0 = np.clip(np.floor(u).astype(np.int64), 0, self.grid.n - 2)
        j0 = np.clip(np.floor(v).astype(np.int64), 0, self.grid.n - 2)
        fu, fv = u - i0, v - j0
        out = np.zeros(len(z), dtype=complex)
        table = self.grid._lookup
        for di, dj in ((0, 0), (1, 0), (0, 1), (1, 1)):
            ids = table[i0 + di, j0 + dj]
            if np.any(ids < 0):
                raise DomainError("interpolation cell leaves the interior lattice")
            w = (fu if di else 1.0 - fu) * (fv if dj else 1.0 - fv)
            out += w * data[ids]
        return out.reshape(shape)

    def __call__(self, z):
        return self._interp(self.values, z)

    def wirtinger(self, z):
        fz, fzb = self.node_wirtinger
        return self._interp(fz, z), self._interp(fzb, z)

    def node_hopf(self, convention: str = "standard") -> np.ndarray:
        fz, fzb = self.node_wirtinger
        return disc_density(self.values, convention) ** 2 * fz * np.conj(fzb)

    def sup_distance(self, F: DiscMap) -> float:
        """Largest Euclidean distance to ``F`` over the nodes."""
        return float(np.max(np.abs(self.values - F(self.grid.nodes))))

    def hopf_table(self, convention: str = "standard") -> str:
        """``x,y,abs_hopf`` rows over the nodes, with a ``#`` header."""
        hop = np.abs(self.node_hopf(convention))
        lines = ["# |Hopf| on disc grid nodes", f"# n: {self.grid.n}", f"# density: {convention}", "x,y,abs_hopf"]
        lines += [f"{float(z.real)!r},{float(z.imag)!r},{float(v)!r}" for z, v in zip(self.grid.nodes, hop)]
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# the flow


@dataclass
class DiscFlowReport:
    iterations: int
    history: list
    converged: bool
    tol: float
    step_sizes: list = field(default_factory=list)

    @property
    def final_sup_tension(self) -> float:
        return self.history[-1] if self.history else float("nan")

    def summary(self) -> dict:
        return {
            "iterations": self.iterations,
            "converged": self.converged,
            "tol": self.tol,
            "final_sup_tension": self.final_sup_tension,
        }


def disc_tension(F: GridDiscMap) -> np.ndarray:
    """Hyperbolic tension ``rho(F)/rho(z)^2 |Lap F + N(F)|`` at the interior nodes."""
    return _tension(F.grid, F.values, F._bvals)[1]


def _tension(grid, f, bvals):
    _, _, lap, _, _, lb = grid.operators
    lapf = lap @ f + np.sum(lb * bvals, axis=1)
    nonlin = _nonlinear(grid, f, bvals)
    res = lapf + nonlin
    z = grid.nodes
    scale = disc_density(f) / disc_density(z) ** 2
    return res, scale * np.abs(res)


def _nonlinear(grid, f, bvals):
    Dx, Dy, _, bx, by, _ = grid.operators
    fx = Dx @ f + np.sum(bx * bvals, axis=1)
    fy = Dy @ f + np.sum(by * bvals, axis=1)
    fz, fzb = 0.5 * (fx - 1j * fy), 0.5 * (fx + 1j * fy)
    return 8.0 * np.conj(f) * fz * fzb / (1.0 - np.abs(f) ** 2)


def disc_flow(boundary: Callable, grid: DiscGrid, tol: float = 1e-8, max_iter: int = 2000,
              ds: float = 1.0, initial: Callable | None = None,
              max_halvings: int = 30) -> tuple:
    """Relax ``f_s = Lap f + N(f)`` with Dirichlet data ``boundary(theta)`` on the circle.

    ``N(f) = c(f) f_zbar`` with ``c = 8 conj(f) f_z / (1 - |f|^2)``; ``f_zbar``
    is complex linear in ``f``, so each step lags only ``c`` and solves

        (I - ds (Lap + c D_zbar)) f_new = f + ds (b + c b_zbar)

    with ``b``, ``b_zbar`` the boundary contributions.  The step is halved
    whenever the image would leave the disc and regrows towards ``ds`` after
    accepted steps.  The initial field defaults to
    the Euclidean harmonic extension of the data.  Returns
    ``(GridDiscMap, DiscFlowReport)``; non-convergence is flagged in the
    report, not raised.
    """
    if not ds > 0:
        raise ValueError("ds must be positive")
    bvals = _boundary_values(grid, boundary)
    Dx, Dy, lap, bx, by, lb = grid.operators
    m = len(grid.nodes)
    b = np.sum(lb * bvals, axis=1)
    Dzb = 0.5 * (Dx + 1j * Dy)
    bzb = 0.5 * np.sum((bx + 1j * by) * bvals, axis=1)
    ds_max = ds
    eye = sp.identity(m, format="csc", dtype=complex)
    if initial is None:
        f = _solve(splu(sp.csc_matrix(-lap)), b)
    else:
        f = np.asarray(initial(grid.nodes), dtype=complex)
    if np.any(np.abs(f) >= 1):
        raise DiscFlowError("initial field leaves the disc")
    history = [float(_tension(grid, f, bvals)[1].max())]
    steps = []
    it = 0
    while history[-1] >= tol and it < max_iter:
        fz = 0.5 * ((Dx @ f) - 1j * (Dy @ f)) + 0.5 * np.sum((bx - 1j * by) * bvals, axis=1)
        c = 8.0 * np.conj(f) * fz / (1.0 - np.abs(f) ** 2)
        op = lap + sp.diags(c) @ Dzb
        for _ in range(max_halvings + 1):
            lu = splu(sp.csc_matrix(eye - ds * op))
            new = lu.solve(f + ds * (b + c * bzb))
            if np.all(np.abs(new) < 1.0):
                break
            ds *= 0.5
        else:
            raise DiscFlowError("image leaves the disc even after step halving")
        f = new
        it += 1
        steps.append(ds)
        ds = min(2.0 * ds, ds_max)
        history.append(float(_tension(grid, f, bvals)[1].max()))
    report = DiscFlowReport(it, history, history[-1] < tol, tol, steps)
    if not report.converged:
        logger.warning("disc flow stopped at sup tension %.3g after %d steps", history[-1], it)
    return GridDiscMap(grid, f, boundary), report


def _solve(lu, rhs):
    return lu.solve(np.ascontiguousarray(rhs.real)) + 1j * lu.solve(np.ascontiguousarray(rhs.imag))


def circle_map_from(F: DiscMap) -> Callable:
    """Boundary trace ``theta -> F(e^{i theta})`` of a closed-form disc map."""
    return lambda theta: F(np.exp(1j * np.asarray(theta, dtype=float)))


__all__ = [
    "DISC_DENSITIES", "DiscFlowError", "disc_density", "wirtinger_fd", "DiscMap", "ClosedFormDiscMap",
    "disc_identity", "disc_mobius", "disc_affine", "hopf_differential", "phi_n", "rotation_identity_residual",
    "hopf_holomorphy_residual", "DiscGrid", "GridDiscMap", "DiscFlowReport", "disc_tension", "disc_flow",
    "circle_map_from",
]
