"""The main inequality chain for the distance ``d(f) = d(Psi(f), H(f))`` on a ball.

With ``N`` the supremum of ``d`` and ``I_r = int G_r Lap d^2 d lambda`` the
report checks, line by line,

* ``green``:         ``d^2(0) + I_r = Avr_{d^2}(r)`` (residual against a tolerance),
* ``average``:       ``Avr_{d^2}(r) <= N^2``,
* ``normalization``: ``d(0) > N - D - 1`` (a precondition, recorded with the maximiser),
* ``main``:          ``N^2 - D' N - D'' + I_r <= Avr_{d^2}(r)``,
* ``measure``:       ``sigma(S^2 \\ Y(r)) <= phi_K(r) / N`` when ``N >= 1``,
* ``estimate``:      ``I_{r0} - N int G_{r0} Phi d lambda >= -psi_K(r0)``,
* ``endgame``:       ``N <= D1`` when ``N >= 1``.

The Laplacian is that of the ball density ``1/(1-|x|^2)``, the normalisation
under which the Green identity holds.  When the second map is a flow field,
``d^2`` is formed at the lattice nodes, differentiated with the seven-point
stencil and interpolated trilinearly; ``N`` is then the grid supremum.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from ..boundary import BoundaryMap
from ..calculus import DEFAULT_STEP, in_chart, laplacian_scalar
from ..extension import QuadratureSpec
from ..flow import MapField, grid_laplacian, interpolate_nodes
from ..geometry import BALL, PAPER_BALL, STANDARD, DomainError, chart_distance
from .constants import ConstantsLedger
from .sets import XSetParams, as_interior_map, phi_step_integral
from .sphere import (
    GreenTerms,
    SphereSampler,
    laplacian_radial_integral,
    radial_rule,
    spherical_average,
)


@dataclass(frozen=True)
class ChainLine:
    """One checked inequality; ``margin >= -slack`` passes."""

    name: str
    lhs: float
    rhs: float
    margin: float
    passed: bool
    applicable: bool = True
    note: str = ""


@dataclass(frozen=True)
class ChainReport:
    lines: tuple
    terms: dict
    meta: dict = field(default_factory=dict)

    @property
    def all_pass(self) -> bool:
        return all(line.passed for line in self.lines)

    def line(self, name: str) -> ChainLine:
        for ln in self.lines:
            if ln.name == name:
                return ln
        raise KeyError(name)

    def to_text(self) -> str:
        """``key: value`` blocks: metadata, measured terms, then one block per line."""
        out = ["# main chain report"]
        out += [f"{k}: {_fmt(v)}" for k, v in self.meta.items()]
        out.append("")
        out.append("# terms")
        out += [f"{k}: {_fmt(v)}" for k, v in self.terms.items()]
        for ln in self.lines:
            out.append("")
            out.append(f"[{ln.name}]")
            out.append(f"lhs: {ln.lhs!r}")
            out.append(f"rhs: {ln.rhs!r}")
            out.append(f"margin: {ln.margin!r}")
            out.append(f"applicable: {str(ln.applicable).lower()}")
            out.append(f"result: {'pass' if ln.passed else 'fail'}")
            if ln.note:
                out.append(f"note: {ln.note}")
        out.append("")
        out.append(f"all_pass: {str(self.all_pass).lower()}")
        return "\n".join(out) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["line", "lhs", "rhs", "margin", "applicable", "result"])
        for ln in self.lines:
            w.writerow([ln.name, repr(ln.lhs), repr(ln.rhs), repr(ln.margin),
                        str(ln.applicable).lower(), "pass" if ln.passed else "fail"])
        return buf.getvalue()


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, np.ndarray):
        return " ".join(repr(float(x)) for x in v.ravel())
    return str(v)


def _label(f) -> str:
    if isinstance(f, BoundaryMap) and f._has_text():
        return f.to_text()
    return getattr(f, "name", None) or type(f).__name__


def _chunked(func, pts, size=4096):
    shape = pts.shape[:-1]
    flat = pts.reshape(-1, 3)
    out = np.concatenate([np.atleast_1d(func(flat[i:i + size])) for i in range(0, len(flat), size)])
    return out.reshape(shape)


class _GridDistance:
    """``d^2`` and its Laplacian from node values of a flow field."""

    def __init__(self, F, field_: MapField, preset):
        grid = field_.grid
        if grid.chart != BALL:
            raise ValueError("flow field must live on a ball grid")
        self.grid = grid
        self.d2_nodes = chart_distance(F(grid.nodes), field_.values, BALL, STANDARD) ** 2
        self.lap_nodes = grid_laplacian(grid, self.d2_nodes, preset)
        k = int(np.argmax(self.d2_nodes))
        self.sup = float(np.sqrt(self.d2_nodes[k]))
        self.argmax = grid.nodes[k]
        self.sup_kind = "grid-sup"
        self.limit = grid.radius - (1.0 + np.sqrt(3.0)) * grid.h_min

    def d2(self, pts):
        return interpolate_nodes(self.grid, self.d2_nodes, pts)

    def lap(self, pts):
        return interpolate_nodes(self.grid, self.lap_nodes, pts)


class _ClosedDistance:
    """``d^2`` of two interior maps with a finite-difference Laplacian."""

    def __init__(self, F, G, preset, h):
        self.F, self.G, self.preset, self.h = F, G, preset, h
        self.sup = None
        self.argmax = None
        self.sup_kind = "sample-sup"
        self.limit = 1.0

    def d2(self, pts):
        return chart_distance(self.F(pts), self.G(pts), BALL, STANDARD) ** 2

    def lap(self, pts):
        return _chunked(lambda p: laplacian_scalar(self.d2, p, self.h, self.preset, BALL), pts)

    def observe(self, pts):
        vals = np.sqrt(np.maximum(self.d2(pts.reshape(-1, 3)), 0.0))
        k = int(np.argmax(vals))
        if self.sup is None or vals[k] > self.sup:
            self.sup = float(vals[k])
            self.argmax = pts.reshape(-1, 3)[k]


def _line(name, lhs, rhs, slack, applicable=True, note="", upper=True):
    """``lhs <= rhs`` when ``upper`` else ``lhs >= rhs``."""
    margin = float(rhs - lhs) if upper else float(lhs - rhs)
    passed = (not applicable) or margin >= -slack
    return ChainLine(name, float(lhs), float(rhs), margin, bool(passed), bool(applicable), note)


def main_chain_report(f, H, r: float, ledger: ConstantsLedger, sampler: SphereSampler = SphereSampler(),
                      quad: QuadratureSpec = QuadratureSpec(), n: int = 64, green_tol: float = 1e-3,
                      slack: float = 1e-6, estimate_sampler: SphereSampler = SphereSampler(count=256),
                      estimate_nodes: int = 16, h: float = DEFAULT_STEP) -> ChainReport:
    """Evaluate the main inequality chain for ``f`` against ``H`` on the ball of radius ``r``.

    ``f`` is a boundary map (its good extension is used) or an interior map;
    ``H`` a flow field (typically from ``solve_restricted`` at radius at least
    ``r``) or any interior map standing in for it.  The lemma estimate is
    evaluated at ``r1 = ledger.r0``, which must not exceed ``r``.
    """
    if not 0.0 < r < 1.0:
        raise ValueError("radius must lie in (0, 1)")
    if ledger.r0 > r:
        raise ValueError(f"ledger r0={ledger.r0} exceeds the report radius {r}")
    F = in_chart(as_interior_map(f, quad), BALL)
    preset = PAPER_BALL
    if isinstance(H, MapField):
        dist = _GridDistance(F, H, preset)
    else:
        dist = _ClosedDistance(F, in_chart(as_interior_map(H, quad), BALL), preset, h)
    if r > dist.limit:
        raise ValueError(f"radius {r} beyond the Laplacian range {dist.limit:.6g} of the grid")

    origin = np.zeros((1, 3))
    d2_origin = float(dist.d2(origin)[0])
    if isinstance(dist, _ClosedDistance):
        rho, _ = radial_rule(r, n)
        dist.observe(origin)
        dist.observe(rho[:, None, None] * sampler.nodes)
        dist.observe(r * sampler.nodes)
    try:
        integral = laplacian_radial_integral(dist.lap, r, sampler, n)
        average = spherical_average(dist.d2, r, sampler)
        r1 = ledger.r0
        integral_r1 = integral if r1 == r else laplacian_radial_integral(dist.lap, r1, sampler, n)
        sphere_d = np.sqrt(np.maximum(dist.d2(r * sampler.nodes), 0.0))
    except DomainError as exc:
        raise ValueError(f"distance field undefined inside the ball of radius {r}: {exc}") from exc
    terms_green = GreenTerms(d2_origin, integral, average)
    N = dist.sup
    d0 = float(np.sqrt(max(d2_origin, 0.0)))

    lines = [
        ChainLine("green", d2_origin + integral, average, green_tol - terms_green.residual,
                  terms_green.residual <= green_tol, True, f"residual {terms_green.residual!r}"),
        _line("average", average, N * N, slack),
        _line("normalization", d0, N - ledger.D - 1.0, 0.0, upper=False,
              note="maximiser " + " ".join(repr(float(v)) for v in dist.argmax)),
        _line("main", N * N - ledger.D_prime * N - ledger.D_second + integral, average, slack),
    ]

    big = N >= 1.0
    frac_out = float((sphere_d < 0.5 * N) @ sampler.weights) if N > 0 else 0.0
    phi = ledger.phi_K(r)
    lines.append(_line("measure", frac_out, phi / N if N > 0 else np.inf, slack, applicable=big,
                       note="" if big else "sup below 1"))

    params = XSetParams(2.0 * ledger.K, ledger.eps0)
    phi_int = phi_step_integral(F, ledger.C1, ledger.C2, params, r1, estimate_sampler, quad, h, estimate_nodes)
    psi = ledger.psi_K(r1)
    lines.append(_line("estimate", integral_r1 - N * phi_int, -psi, slack, upper=False))
    lines.append(_line("endgame", N, ledger.D1, slack, applicable=big, note="" if big else "sup below 1"))

    terms = {
        "d2_origin": d2_origin,
        "green_integral_r": integral,
        "average_r": average,
        "green_residual": terms_green.residual,
        "sup_d": N,
        "sup_kind": dist.sup_kind,
        "argmax": np.asarray(dist.argmax, dtype=float),
        "outside_Y_fraction": frac_out,
        "phi_K_r": phi,
        "r1": r1,
        "green_integral_r1": integral_r1,
        "phi_step_integral_r1": phi_int,
        "psi_K_r1": psi,
        "D1": ledger.D1,
    }
    meta = {
        "radius": float(r),
        "map": _label(f),
        "sampler": sampler.describe(),
        "estimate_sampler": estimate_sampler.describe(),
        "radial_nodes": n,
        "estimate_radial_nodes": estimate_nodes,
        "quadrature": f"gauss-hermite nodes_per_axis={quad.nodes_per_axis} jitter={quad.jitter!r}",
        "fd_step": float(h),
        "green_tol": float(green_tol),
        "slack": float(slack),
    }
    if isinstance(H, MapField):
        meta["grid"] = " ".join(f"{k}={v}" for k, v in H.grid.metadata().items())
    for k, v in ledger.as_dict().items():
        meta[f"ledger.{k}"] = v
    return ChainReport(tuple(lines), terms, meta)


__all__ = ["ChainLine", "ChainReport", "main_chain_report"]
