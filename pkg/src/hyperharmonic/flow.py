"""Harmonic map heat flow on truncated lattice domains.

The discrete energy of a field ``F`` on a lattice of spacing ``h`` is

    E_h(F) = sum over lattice edges ab of 1/2 lam(mid_ab) h d(F(a), F(b))^2

(``lam`` the source density), and the discrete tension at an interior node is
minus its gradient divided by the node volume ``lam(a)^3 h^3``:

    tau(a) = sum_b lam(mid_ab) log_{F(a)} F(b) / (lam(a)^3 h^2).

This is consistent with the continuum tension to second order.  The flow
moves every interior node simultaneously along the geodesic
``exp_{F(a)}(ds * tau(a))``; boundary nodes carry frozen Dirichlet data.
"""
from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .boundary import BoundaryMap, parse_map
from .extension import QuadratureSpec, good_extension_array
from .geometry import (
    BALL,
    HALFSPACE,
    STANDARD,
    DomainError,
    cayley_array,
    chart_distance,
    check_points,
    exp_map,
    get_preset,
    log_map,
)

logger = logging.getLogger(__name__)

_NEIGHBOURS = np.array(
    [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]]
)


class FlowError(RuntimeError):
    """A flow step could not be completed even after step halving."""


# ---------------------------------------------------------------------------
# domains


@dataclass(frozen=True)
class GridDomain:
    """Cartesian lattice clipped to a ball ``|x| <= r`` or a half-space box.

    ``bounds`` holds ``(lo, hi)`` per axis, ``shape`` the node count per axis.
    For a ball the lattice is the cube ``[-r, r]^3`` restricted to the closed
    ball.  Interior nodes are domain nodes whose six neighbours are all in the
    domain; the remaining domain nodes form the boundary.
    """

    chart: str
    bounds: tuple
    shape: tuple
    radius: float | None = None

    def __post_init__(self):
        if self.chart not in (BALL, HALFSPACE):
            raise ValueError(f"unknown chart {self.chart!r}")
        if len(self.shape) != 3 or min(self.shape) < 3:
            raise ValueError("need at least 3 nodes per axis")
        for lo, hi in self.bounds:
            if not hi > lo:
                raise ValueError("empty axis range")
        if self.chart == BALL:
            if self.radius is None or not 0.0 < self.radius < 1.0:
                raise ValueError("ball grid radius must lie in (0, 1)")
        elif self.bounds[2][0] <= 0.0:
            raise ValueError("half-space box needs t_min > 0")

    @classmethod
    def ball(cls, radius: float, n: int) -> "GridDomain":
        return cls(BALL, ((-radius, radius),) * 3, (n, n, n), float(radius))

    @classmethod
    def box(cls, xrange, yrange, trange, shape) -> "GridDomain":
        if np.isscalar(shape):
            shape = (shape,) * 3
        bounds = tuple((float(a), float(b)) for a, b in (xrange, yrange, trange))
        return cls(HALFSPACE, bounds, tuple(int(s) for s in shape))

    @cached_property
    def spacing(self) -> np.ndarray:
        return np.array([(hi - lo) / (n - 1) for (lo, hi), n in zip(self.bounds, self.shape)])

    @property
    def h_min(self) -> float:
        return float(self.spacing.min())

    @cached_property
    def axes(self):
        return [np.linspace(lo, hi, n) for (lo, hi), n in zip(self.bounds, self.shape)]

    @cached_property
    def _mask(self) -> np.ndarray:
        """Boolean ``shape`` array of domain membership."""
        if self.chart == HALFSPACE:
            return np.ones(self.shape, dtype=bool)
        x, y, z = np.meshgrid(*self.axes, indexing="ij")
        # tolerance so that lattice points on the sphere count as inside
        return x * x + y * y + z * z <= self.radius**2 * (1.0 + 1e-12)

    @cached_property
    def indices(self) -> np.ndarray:
        """Index triples of the domain nodes, in C order, ``(N, 3)``."""
        return np.argwhere(self._mask)

    @cached_property
    def nodes(self) -> np.ndarray:
        """Chart coordinates of the domain nodes, ``(N, 3)``."""
        idx = self.indices
        return np.stack([self.axes[k][idx[:, k]] for k in range(3)], axis=-1)

    @cached_property
    def _lookup(self) -> np.ndarray:
        table = np.full(self.shape, -1, dtype=np.int64)
        table[tuple(self.indices.T)] = np.arange(len(self.indices))
        return table

    def node_id(self, index) -> int:
        i = tuple(int(v) for v in index)
        if any(not 0 <= v < n for v, n in zip(i, self.shape)):
            return -1
        return int(self._lookup[i])

    @cached_property
    def _neighbour_table(self) -> np.ndarray:
        """Node ids of the six neighbours of every node (``-1`` when absent)."""
        idx = self.indices
        out = np.full((len(idx), 6), -1, dtype=np.int64)
        shape = np.array(self.shape)
        for k, off in enumerate(_NEIGHBOURS):
            nb = idx + off
            ok = np.all((nb >= 0) & (nb < shape), axis=1)
            out[ok, k] = self._lookup[tuple(nb[ok].T)]
        return out

    @cached_property
    def interior(self) -> np.ndarray:
        """Boolean mask over domain nodes."""
        return np.all(self._neighbour_table >= 0, axis=1)

    @property
    def boundary(self) -> np.ndarray:
        return ~self.interior

    @cached_property
    def interior_ids(self) -> np.ndarray:
        return np.flatnonzero(self.interior)

    @cached_property
    def interior_neighbours(self) -> np.ndarray:
        return self._neighbour_table[self.interior_ids]

    @cached_property
    def edges(self) -> np.ndarray:
        """Pairs of node ids joined by a lattice edge inside the domain."""
        tab = self._neighbour_table
        pairs = []
        for k in (0, 2, 4):
            a = np.flatnonzero(tab[:, k] >= 0)
            pairs.append(np.stack([a, tab[a, k]], axis=1))
        return np.concatenate(pairs)

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        d = self.nodes[self.edges[:, 1]] - self.nodes[self.edges[:, 0]]
        return np.linalg.norm(d, axis=1)

    def metadata(self) -> dict:
        return {
            "chart": self.chart,
            "shape": " ".join(str(n) for n in self.shape),
            "bounds": " ".join(repr(float(v)) for pair in self.bounds for v in pair),
            "radius": repr(float(self.radius)) if self.radius is not None else "none",
        }

    @classmethod
    def from_metadata(cls, meta: dict) -> "GridDomain":
        shape = tuple(int(v) for v in meta["shape"].split())
        vals = [float(v) for v in meta["bounds"].split()]
        bounds = tuple((vals[2 * i], vals[2 * i + 1]) for i in range(3))
        radius = None if meta["radius"] == "none" else float(meta["radius"])
        return cls(meta["chart"], bounds, shape, radius)


# ---------------------------------------------------------------------------
# discrete operators


def _edge_midpoint_density(grid: GridDomain, preset, a_ids, b_ids):
    mid = 0.5 * (grid.nodes[a_ids] + grid.nodes[b_ids])
    return preset.density(mid, grid.chart)


@dataclass(frozen=True)
class _Weights:
    """Precomputed source weights ``lam(mid) / (lam(a)^3 h^2)`` per interior edge."""

    tension: np.ndarray
    edge_energy: np.ndarray


def _weights(grid: GridDomain, preset) -> _Weights:
    key = (grid, preset.name, preset.scale)
    hit = _WEIGHT_CACHE.get(key)
    if hit is not None:
        return hit
    ids = grid.interior_ids
    nb = grid.interior_neighbours
    lam_a = preset.density(grid.nodes[ids], grid.chart)
    h_axis = np.repeat(grid.spacing, 2)[None, :]
    lam_mid = _edge_midpoint_density(grid, preset, np.repeat(ids, 6), nb.ravel()).reshape(nb.shape)
    tension_w = lam_mid / (lam_a[:, None] ** 3 * h_axis**2)
    e = grid.edges
    cell = np.prod(grid.spacing)
    edge_w = 0.5 * _edge_midpoint_density(grid, preset, e[:, 0], e[:, 1]) * cell / grid.edge_lengths**2
    out = _Weights(tension_w, edge_w)
    _WEIGHT_CACHE[key] = out
    return out


_WEIGHT_CACHE: dict = {}


def discrete_tension(grid: GridDomain, values: np.ndarray, preset=STANDARD):
    """Tension vectors (chart components) and hyperbolic norms at interior nodes."""
    preset = get_preset(preset)
    w = _weights(grid, preset)
    ids = grid.interior_ids
    nb = grid.interior_neighbours
    base = values[ids]
    logs = log_map(base[:, None, :], values[nb], grid.chart)
    tau = np.einsum("mk,mkj->mj", w.tension, logs)
    norm = preset.density(base, grid.chart) * np.linalg.norm(tau, axis=1)
    return tau, norm


def discrete_energy(grid: GridDomain, values: np.ndarray, preset=STANDARD) -> float:
    """Lattice Dirichlet energy (interior and boundary edges alike)."""
    preset = get_preset(preset)
    w = _weights(grid, preset)
    e = grid.edges
    d = chart_distance(values[e[:, 0]], values[e[:, 1]], grid.chart, preset)
    return float(np.sum(w.edge_energy * d * d))


# ---------------------------------------------------------------------------
# fields


@dataclass(frozen=True, eq=False)
class MapField:
    """Target chart coordinates at every domain node; boundary values are frozen.

    The value array is read-only, so fields can be shared between readers.
    """

    grid: GridDomain
    values: np.ndarray
    preset: object = STANDARD
    label: str = ""

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != (len(self.grid.nodes), 3):
            raise ValueError(f"expected values of shape {(len(self.grid.nodes), 3)}, got {vals.shape}")
        check_points(vals, self.grid.chart)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "preset", get_preset(self.preset))

    def with_values(self, values) -> "MapField":
        return MapField(self.grid, values, self.preset, self.label)

    @cached_property
    def _tension(self):
        return discrete_tension(self.grid, self.values, self.preset)

    @property
    def tension_vectors(self) -> np.ndarray:
        return self._tension[0]

    @property
    def tension_norms(self) -> np.ndarray:
        return self._tension[1]

    @property
    def sup_tension(self) -> float:
        n = self.tension_norms
        return float(n.max()) if n.size else 0.0

    @cached_property
    def energy(self) -> float:
        return discrete_energy(self.grid, self.values, self.preset)

    def value_at(self, index) -> np.ndarray:
        i = self.grid.node_id(index)
        if i < 0:
            raise KeyError(f"node {tuple(index)} is not in the domain")
        return self.values[i]

    def as_interior_map(self) -> "GridFieldMap":
        return GridFieldMap(self)

    def sup_distance(self, other_values) -> float:
        """Largest hyperbolic distance to another set of node values."""
        d = chart_distance(self.values, np.asarray(other_values, float), self.grid.chart, self.preset)
        return float(d.max())


def interpolate_nodes(grid: GridDomain, node_values, z):
    """Trilinear interpolation of per-node data at chart points ``z`` of shape ``(..., 3)``.

    Every corner of the enclosing lattice cell must be a domain node carrying
    finite data; otherwise :class:`DomainError` is raised.
    """
    node_values = np.asarray(node_values, dtype=float)
    z = np.asarray(z, dtype=float)
    shape = z.shape[:-1]
    z = z.reshape(-1, 3)
    lo = np.array([b[0] for b in grid.bounds])
    u = (z - lo) / grid.spacing
    base = np.clip(np.floor(u).astype(np.int64), 0, np.array(grid.shape) - 2)
    frac = u - base
    if np.any(frac < -1e-9) or np.any(frac > 1 + 1e-9):
        raise DomainError("point outside the lattice")
    tail = node_values.shape[1:]
    out = np.zeros((len(z),) + tail)
    for corner in np.ndindex(2, 2, 2):
        c = np.array(corner)
        ids = grid._lookup[tuple((base + c).T)]
        if np.any(ids < 0):
            raise DomainError("interpolation cell leaves the grid domain")
        vals = node_values[ids]
        if not np.all(np.isfinite(vals)):
            raise DomainError("interpolation cell touches nodes without data")
        wgt = np.prod(np.where(c == 1, frac, 1.0 - frac), axis=1)
        out += wgt.reshape((-1,) + (1,) * len(tail)) * vals
    return out.reshape(shape + tail)


@dataclass(frozen=True)
class GridFieldMap:
    """Trilinear interpolation of a field; values off the lattice are approximate."""

    field: MapField
    approximate: bool = True

    @property
    def chart(self) -> str:
        return self.field.grid.chart

    def __call__(self, z):
        return interpolate_nodes(self.field.grid, self.field.values, z)


def grid_laplacian(grid: GridDomain, node_values, preset=STANDARD) -> np.ndarray:
    """Seven-point hyperbolic Laplacian of scalar node data; ``nan`` on boundary nodes.

    ``lam^-2 (Lap u + grad log lam . grad u)`` with central differences.
    """
    preset = get_preset(preset)
    u = np.asarray(node_values, dtype=float)
    ids = grid.interior_ids
    nb = grid.interior_neighbours
    h = grid.spacing
    lap = np.zeros(len(ids))
    grad = np.zeros((len(ids), 3))
    for k in range(3):
        up, down = u[nb[:, 2 * k]], u[nb[:, 2 * k + 1]]
        lap += (up - 2.0 * u[ids] + down) / h[k] ** 2
        grad[:, k] = (up - down) / (2.0 * h[k])
    pts = grid.nodes[ids]
    gl = preset.log_density_gradient(pts, grid.chart)
    out = np.full(len(u), np.nan)
    out[ids] = (lap + np.sum(gl * grad, axis=1)) / preset.density(pts, grid.chart) ** 2
    return out


def _extension_in_chart(f: BoundaryMap, z, chart, quad):
    if chart == HALFSPACE:
        return good_extension_array(f, z, quad)
    return cayley_array(good_extension_array(f, cayley_array(z), quad))


def init_field(f: BoundaryMap, grid: GridDomain, quad: QuadratureSpec = QuadratureSpec(),
               preset=STANDARD) -> MapField:
    """Field equal to the Gaussian extension of ``f`` at every node.

    For ball grids the extension is transported through the Cayley transform.
    """
    try:
        vals = _extension_in_chart(f, grid.nodes, grid.chart, quad)
        check_points(vals, grid.chart)
    except (ArithmeticError, ValueError) as exc:
        bad = _first_bad_node(f, grid, quad)
        raise FlowError(f"extension failed at node {bad}: {exc}") from exc
    return MapField(grid, vals, preset, f.to_text() if f._has_text() else "")


def _first_bad_node(f, grid, quad):
    for k, idx in enumerate(grid.indices):
        try:
            v = _extension_in_chart(f, grid.nodes[k:k + 1], grid.chart, quad)
            check_points(v, grid.chart)
        except (ArithmeticError, ValueError):
            return tuple(int(i) for i in idx)
    return None


def field_from_function(F, grid: GridDomain, preset=STANDARD) -> MapField:
    """Sample an interior map (in the grid chart) at every node."""
    return MapField(grid, F(grid.nodes), preset)


# ---------------------------------------------------------------------------
# stepping


def flow_step(field: MapField, ds: float, max_halvings: int = 20):
    """One Jacobi step of length ``ds``; returns ``(new_field, sup_tension, ds_used)``.

    A step that produces non-finite values or leaves the model is retried
    with half the step, up to ``max_halvings`` times.
    """
    if ds < 0:
        raise ValueError("step must be non-negative")
    if ds == 0:
        return field, field.sup_tension, 0.0
    grid = field.grid
    ids = grid.interior_ids
    tau = field.tension_vectors
    for _ in range(max_halvings + 1):
        moved = exp_map(field.values[ids], ds * tau, grid.chart)
        try:
            check_points(moved, grid.chart)
        except DomainError:
            logger.info("step %.3g rejected, halving", ds)
            ds *= 0.5
            continue
        vals = np.array(field.values)
        vals[ids] = moved
        new = field.with_values(vals)
        return new, new.sup_tension, ds
    raise FlowError(f"step rejected {max_halvings + 1} times")


@dataclass
class FlowReport:
    """Per-step history of a flow run.

    ``history[k]`` is the sup-tension after step ``k + 1``; ``initial_sup_tension``
    is the value before the first step.
    """

    iterations: int = 0
    history: list = field(default_factory=list)
    initial_sup_tension: float = float("nan")
    step_sizes: list = field(default_factory=list)
    energy_history: list = field(default_factory=list)
    converged: bool = False
    tol: float = float("nan")

    @property
    def final_sup_tension(self) -> float:
        return self.history[-1] if self.history else self.initial_sup_tension

    @property
    def flagged(self) -> bool:
        """True when the run stopped without meeting its tolerance."""
        return not self.converged

    @property
    def step_size(self) -> float:
        return self.step_sizes[-1] if self.step_sizes else float("nan")

    def window_decreasing(self, window: int = 50) -> bool:
        """Every value is below the one ``window`` steps earlier."""
        h = np.asarray([self.initial_sup_tension] + list(self.history))
        if len(h) <= window:
            return bool(np.all(np.diff(h) < 0))
        return bool(np.all(h[window:] < h[:-window]))

    def summary(self) -> dict:
        return {
            "iterations": self.iterations,
            "converged": self.converged,
            "tol": self.tol,
            "initial_sup_tension": self.initial_sup_tension,
            "final_sup_tension": self.final_sup_tension,
            "step_size": self.step_size,
        }


def default_step(grid: GridDomain, c: float = 0.2) -> float:
    """Parabolic step heuristic ``c h_min^2``."""
    return c * grid.h_min**2


def run_flow(field: MapField, tol: float, max_iter: int, ds: float | None = None, c: float = 0.2,
             record_energy: bool = False, callback=None):
    """Iterate :func:`flow_step` until the sup-tension drops below ``tol``.

    Returns ``(field, report)``.  Hitting ``max_iter`` is not an error: the
    report is returned with ``converged = False``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if max_iter < 0:
        raise ValueError("max_iter must be non-negative")
    if ds is None:
        ds = default_step(field.grid, c)
    report = FlowReport(initial_sup_tension=field.sup_tension, tol=tol)
    if record_energy:
        report.energy_history.append(field.energy)
    sup = report.initial_sup_tension
    while sup >= tol and report.iterations < max_iter:
        field, sup, ds = flow_step(field, ds)
        report.iterations += 1
        report.history.append(sup)
        report.step_sizes.append(ds)
        if record_energy:
            report.energy_history.append(field.energy)
        if callback is not None:
            callback(report.iterations, field, sup)
    report.converged = sup < tol
    if not report.converged:
        logger.warning("flow stopped after %d steps at sup-tension %.3g (tol %.3g)", report.iterations, sup, tol)
    return field, report


def solve_restricted(f: BoundaryMap, r: float, resolution: int, tol: float, max_iter: int = 200000,
                     quad: QuadratureSpec = QuadratureSpec(), c: float = 0.2):
    """Numerical harmonic map of the ball ``|x| <= r`` with the extension of ``f`` as data.

    Returns ``(field, report)``.
    """
    if not 0.0 < r < 1.0:
        raise ValueError("radius must lie in (0, 1)")
    grid = GridDomain.ball(r, resolution)
    return run_flow(init_field(f, grid, quad), tol, max_iter, c=c)


# ---------------------------------------------------------------------------
# checkpoints


_CHECKPOINT_MAGIC = "# hyperharmonic field checkpoint v1"


def _values_digest(values: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(values, dtype="<f8").tobytes()).hexdigest()


def save_checkpoint(field: MapField, path, extra: dict | None = None) -> None:
    """Plain-text checkpoint, one record per node, floats in round-trip form.

    Header lines start with ``#`` and hold ``key: value`` grid metadata.  Each
    record is ``i j k kind x y z`` with ``kind`` ``i`` (interior) or ``b``.
    """
    meta = field.grid.metadata()
    meta["preset"] = field.preset.name
    meta["label"] = field.label or "none"
    meta["nodes"] = str(len(field.values))
    meta["sha256"] = _values_digest(field.values)
    if extra:
        meta.update({k: str(v) for k, v in extra.items()})
    lines = [_CHECKPOINT_MAGIC, "# columns: i j k kind x y z"]
    lines += [f"# {k}: {v}" for k, v in meta.items()]
    kinds = np.where(field.grid.interior, "i", "b")
    for idx, kind, v in zip(field.grid.indices, kinds, field.values):
        lines.append(f"{idx[0]} {idx[1]} {idx[2]} {kind} {float(v[0])!r} {float(v[1])!r} {float(v[2])!r}")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_checkpoint(path) -> MapField:
    meta, rows = {}, []
    with open(path, encoding="ascii") as fh:
        first = fh.readline().rstrip("\n")
        if first != _CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not a field checkpoint")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, sep, val = line[1:].partition(":")
                if sep:
                    meta[key.strip()] = val.strip()
                continue
            parts = line.split()
            if len(parts) != 7:
                raise ValueError(f"{path}:{lineno}: expected 7 fields, got {len(parts)}")
            rows.append(parts)
    grid = GridDomain.from_metadata(meta)
    values = np.empty((len(grid.nodes), 3))
    seen = np.zeros(len(grid.nodes), dtype=bool)
    for parts in rows:
        nid = grid.node_id(parts[:3])
        if nid < 0:
            raise ValueError(f"{path}: node {parts[:3]} outside the grid domain")
        values[nid] = [float(v) for v in parts[4:]]
        seen[nid] = True
    if not seen.all():
        raise ValueError(f"{path}: {int((~seen).sum())} nodes missing")
    if "sha256" in meta and _values_digest(values) != meta["sha256"]:
        raise ValueError(f"{path}: checksum mismatch")
    label = "" if meta.get("label", "none") == "none" else meta["label"]
    return MapField(grid, values, meta.get("preset", "STANDARD"), label)


def boundary_map_of(field: MapField) -> BoundaryMap | None:
    """Boundary map recorded in the field label, if any."""
    return parse_map(field.label) if field.label else None
