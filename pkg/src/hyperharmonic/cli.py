"""Command-line interface: ``hyperharmonic {extend,flow,verify,constants,hopf}``.

Every command reads a configuration (``--config``), writes comma-separated
tables and ``key: value`` reports into ``--out``, and stamps each file with
the configuration hash, the seed and the canonical configuration itself.
Exit codes: 0 when every asserted check passes, 1 when one fails (or a flow
stops before converging), 2 for usage and configuration errors.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys

import numpy as np

from .config import ConfigError, ExperimentConfig, load_config

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(RuntimeError):
    """Configuration is valid but cannot be run as asked."""


# ---------------------------------------------------------------------------
# output helpers


def _num(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_table(path, cfg: ExperimentConfig, title: str, columns, rows, notes=()):
    """Comma-separated table preceded by ``#`` header lines."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_num(v) for v in row])
    head = cfg.header_lines(title) + [f"# {n}" for n in notes]
    _write(path, "\n".join(head) + "\n" + buf.getvalue())


def write_report(path, cfg: ExperimentConfig, title: str, items):
    """``key: value`` report; ``items`` is a sequence of pairs (a ``None`` key starts a block)."""
    lines = cfg.header_lines(title)
    for key, val in items:
        if key is None:
            lines.append("")
            lines.append(f"[{val}]")
        else:
            lines.append(f"{key}: {_num(val)}")
    _write(path, "\n".join(lines) + "\n")


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _quad(cfg):
    from .extension import QuadratureSpec
    q = cfg.section("quadrature")
    return QuadratureSpec(nodes_per_axis=q["nodes_per_axis"], jitter=q["jitter"])


def _preset(name):
    from .geometry import PAPER_BALL, STANDARD
    return PAPER_BALL if name == "paper_ball" else STANDARD


def _boundary(cfg):
    from .boundary import parse_map
    return parse_map(cfg.get("map", "boundary"))


# ---------------------------------------------------------------------------
# commands


def cmd_extend(cfg: ExperimentConfig, out: str) -> int:
    from .calculus import local_geometry
    from .extension import GoodExtensionMap

    f = _boundary(cfg)
    if not f.fixes_infinity:
        raise UsageError("the extension needs a boundary map fixing infinity")
    lat = cfg.section("lattice")
    axes = [np.linspace(lo, hi, n) for lo, hi, n in (lat["x"], lat["y"], lat["t"])]
    if axes[2][0] <= 0:
        raise UsageError("lattice heights must be positive")
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    F = GoodExtensionMap(f, _quad(cfg))
    geo = local_geometry(F, pts, lat["fd_step"], _preset(cfg.get("run", "preset")))
    rows = [
        (*p, *v, tn, dist, e)
        for p, v, tn, dist, e in zip(pts, geo.images, geo.tension_norm, geo.distortion, geo.energy)
    ]
    write_table(
        os.path.join(out, "extend.csv"), cfg, "extend",
        ["x", "y", "t", "X", "Y", "T", "tension", "distortion", "energy"], rows,
        notes=["columns: lattice point (x, y, t); extension image (X, Y, T); |tension|, distortion, energy density"],
    )
    return EXIT_OK


def cmd_flow(cfg: ExperimentConfig, out: str) -> int:
    from .flow import GridDomain, init_field, run_flow, save_checkpoint

    f = _boundary(cfg)
    g = cfg.section("grid")
    grid = GridDomain.ball(g["radius"], g["n"])
    field = init_field(f, grid, _quad(cfg), _preset(cfg.get("run", "preset")))
    field, report = run_flow(field, g["tol"], g["max_iter"], c=g["c"], record_energy=g["record_energy"])
    ckpt = os.path.join(out, g["checkpoint"])
    save_checkpoint(field, ckpt, extra={"config-sha256": cfg.sha256, "seed": cfg.seed})
    with open(ckpt, "a", encoding="ascii") as fh:
        fh.write("\n".join(cfg.header_lines("flow checkpoint configuration")) + "\n")
    items = [(k, v) for k, v in report.summary().items()]
    items += [("window_decreasing_50", report.window_decreasing(50)), ("checkpoint", g["checkpoint"])]
    write_report(os.path.join(out, "flow_report.txt"), cfg, "flow report", items)
    energies = report.energy_history[1:] if g["record_energy"] else [""] * report.iterations
    rows = [(0, report.initial_sup_tension, 0.0, report.energy_history[0] if g["record_energy"] else "")]
    rows += [(k + 1, s, ds, e) for k, (s, ds, e) in enumerate(zip(report.history, report.step_sizes, energies))]
    write_table(os.path.join(out, "flow_history.csv"), cfg, "flow history",
                ["iteration", "sup_tension", "step_size", "energy"], rows)
    return EXIT_OK if report.converged else EXIT_FAIL


def _calibration_family():
    def const(p):
        return np.full(p.shape[:-1], 2.5)

    def x1(p):
        return p[..., 0]

    def sq(p):
        return np.sum(p * p, axis=-1)

    def comp(p):
        return 1.0 - np.sum(p * p, axis=-1)

    return [("constant", const), ("x1", x1), ("norm_squared", sq), ("one_minus_norm_squared", comp)]


def _ledger_from(cfg, measured=()):
    from .verify.constants import MEASURED, constants_ledger_build
    c = cfg.section("constants")
    prov = {k: MEASURED for k in measured}
    return constants_ledger_build(K=c["K"], q=c["q"], T=c["T"], D=c["D"], r0=c["r0"], provenance=prov)


def cmd_verify(cfg: ExperimentConfig, out: str) -> int:
    from .verify.sphere import SphereSampler, green_estimate_scan, green_identity_terms

    v = cfg.section("verify")
    s = cfg.section("sampler")
    sampler = SphereSampler(s["scheme"], s["count"], cfg.seed)
    checks = []  # (suite, case, value, threshold, margin, passed)
    report = [("sampler", sampler.describe()), ("radial_nodes", v["radial_nodes"])]

    if "chain" in v["suites"]:
        ckpt = os.path.join(out, v["checkpoint"])
        if not os.path.exists(ckpt):
            raise UsageError(f"checkpoint {ckpt} not found; run the 'flow' command first to create it")
        ledger = _ledger_from(cfg)

    if "green" in v["suites"]:
        preset = _preset(v["green_preset"])
        report.append(("green_preset", v["green_preset"]))
        for name, F in _calibration_family():
            for r in v["radii"]:
                terms = green_identity_terms(F, r, preset, sampler, v["radial_nodes"])
                res = terms.residual
                ratio = terms.integral_ratio if abs(terms.integral) > 1e-12 else float("nan")
                checks.append(("green", f"{name}@{r!r}", res, v["green_tol"], v["green_tol"] - res,
                               res < v["green_tol"]))
                report.append((f"green.{name}.r={r!r}.residual", res))
                report.append((f"green.{name}.r={r!r}.integral_ratio", ratio))

    if "green_estimate" in v["suites"]:
        lo, hi = green_estimate_scan()
        ok_lo = lo >= 1.0 / 12.0 - 1e-9 and abs(lo - 1.0 / 12.0) <= 1e-9
        ok_hi = hi <= 1.0 / 3.0 + 1e-9 and abs(hi - 1.0 / 3.0) <= 1e-9
        checks.append(("green_estimate", "min", lo, 1.0 / 12.0, 1e-9 - abs(lo - 1.0 / 12.0), ok_lo))
        checks.append(("green_estimate", "max", hi, 1.0 / 3.0, 1e-9 - abs(hi - 1.0 / 3.0), ok_hi))
        report += [("green_estimate.min", lo), ("green_estimate.max", hi)]

    if "linear" in v["suites"]:
        from .boundary import Linear
        from .extension import GoodExtensionMap, LinearHarmonicMap
        from .geometry import HALFSPACE, chart_distance
        from .verify.constants import halfspace_lattice
        f = _boundary(cfg)
        if not isinstance(f, Linear):
            raise UsageError("the 'linear' suite needs a linear boundary map")
        lat = halfspace_lattice()
        d = chart_distance(GoodExtensionMap(f, _quad(cfg))(lat), LinearHarmonicMap(f)(lat), HALFSPACE)
        checks.append(("linear", "extension_vs_harmonic", float(d.max()), 1e-6, 1e-6 - float(d.max()),
                       float(d.max()) < 1e-6))
        report.append(("linear.sup_distance", float(d.max())))

    if "chain" in v["suites"]:
        from .flow import load_checkpoint
        from .verify.chain import main_chain_report
        field = load_checkpoint(ckpt)
        r = v["chain_radius"]
        if r is None:
            r = field.grid.radius - (1.0 + np.sqrt(3.0)) * field.grid.h_min - 1e-12
        try:
            rep = main_chain_report(_boundary(cfg), field, r, ledger, sampler, _quad(cfg), v["radial_nodes"],
                                    v["chain_green_tol"],
                                    estimate_sampler=SphereSampler(s["scheme"], v["estimate_count"], cfg.seed))
        except ValueError as exc:
            raise UsageError(f"main chain report: {exc}") from None
        for ln in rep.lines:
            checks.append(("chain", ln.name, ln.lhs, ln.rhs, ln.margin, ln.passed))
        _write(os.path.join(out, "chain_report.txt"),
               "\n".join(cfg.header_lines("main chain report")) + "\n" + rep.to_text())
        report.append(("chain.all_pass", rep.all_pass))

    all_pass = all(c[-1] for c in checks)
    report.append(("all_pass", all_pass))
    write_report(os.path.join(out, "verify_report.txt"), cfg, "verify report", report)
    write_table(os.path.join(out, "verify.csv"), cfg, "verify checks",
                ["suite", "case", "value", "threshold", "margin", "result"],
                [(*c[:5], "pass" if c[5] else "fail") for c in checks])
    return EXIT_OK if all_pass else EXIT_FAIL


def cmd_constants(cfg: ExperimentConfig, out: str) -> int:
    from .verify.constants import (
        c_oracle,
        halfspace_lattice,
        increasing_on,
        k2_oracle,
        q_from,
        tension_sup_estimate,
    )

    c = cfg.section("constants")
    raw = dict(dict(cfg.raw)["constants"])
    measured = []
    items = []
    if c["oracle_K1"] is not None:
        K2 = k2_oracle(c["oracle_K1"])
        C = c_oracle(c["oracle_K1"], samples=c["c_samples"], seed=cfg.seed)
        items += [("oracle.K1", c["oracle_K1"]), ("oracle.K2", K2), ("oracle.C", C.value),
                  ("oracle.C.sample_max", C.sample_max), ("oracle.C.samples", C.samples), ("oracle.seed", C.seed)]
        if c["q"] is None:
            raw["q"] = repr(q_from(C.value, K2))
            measured.append("q")
    if c["measure_T"]:
        est = tension_sup_estimate(_boundary(cfg), halfspace_lattice(), _quad(cfg))
        raw["T"] = repr(est.value)
        measured.append("T")
        items += [("measure.T", est.value), ("measure.T.argmax", " ".join(repr(float(x)) for x in est.argmax))]
    sub = ExperimentConfig(cfg.command, tuple(
        (sec, tuple((k, raw[k]) for k, _ in its)) if sec == "constants" else (sec, its) for sec, its in cfg.raw
    ))
    ledger = _ledger_from(sub, measured)
    grid = [ledger.r0 * (k + 1) / 9.0 for k in range(9)]
    inc_phi = increasing_on(ledger.phi_K, grid)
    inc_psi = increasing_on(ledger.psi_K, grid)
    items = [(k, v) for k, v in ledger.as_dict().items()] + items
    items += [("phi_K_increasing", inc_phi), ("psi_K_increasing", inc_psi)]
    write_report(os.path.join(out, "constants.txt"), cfg, "constants ledger", items)
    write_table(os.path.join(out, "constants.csv"), cfg, "constants profile", ["r", "phi_K", "psi_K"],
                [(r, ledger.phi_K(r), ledger.psi_K(r)) for r in grid])
    return EXIT_OK if inc_phi and inc_psi else EXIT_FAIL


def cmd_hopf(cfg: ExperimentConfig, out: str) -> int:
    from .hopf import (
        DiscGrid,
        circle_map_from,
        disc_affine,
        disc_flow,
        disc_identity,
        disc_mobius,
        hopf_differential,
        hopf_holomorphy_residual,
        rotation_identity_residual,
    )

    hp = cfg.section("hopf")
    if hp["n_max"] < hp["n_min"]:
        raise UsageError("n_max must not be smaller than n_min")
    rng = np.random.default_rng(cfg.seed)
    rad = np.sqrt(rng.random(hp["points"]))
    z = rad * np.exp(2j * np.pi * rng.random(hp["points"]))
    ok = True

    rows = []
    for n in range(hp["n_min"], hp["n_max"] + 1):
        res = float(np.max(rotation_identity_residual(n, z)))
        rows.append((n, res, 1e-12, "pass" if res <= 1e-12 else "fail"))
        ok &= res <= 1e-12
    write_table(os.path.join(out, "hopf_rotation.csv"), cfg, "rotation identity residuals",
                ["n", "max_residual", "threshold", "result"], rows)

    inner = z * 0.99
    variants = [disc_identity(), disc_mobius(0.3), disc_mobius(0.2 + 0.1j, 0.5), disc_affine(np.exp(1j), 0.0)]
    rows = []
    for F in variants:
        val = float(np.max(np.abs(hopf_differential(F, inner))))
        rows.append((F.name, val, 1e-12, "pass" if val <= 1e-12 else "fail"))
        ok &= val <= 1e-12
    write_table(os.path.join(out, "hopf_holomorphic.csv"), cfg, "Hopf differential of holomorphic maps",
                ["map", "max_abs_hopf", "threshold", "result"], rows)

    grid = DiscGrid(hp["grid"])
    warp = hp["warp"]
    control, crep = disc_flow(circle_map_from(disc_mobius(hp["control_a"])), grid, tol=hp["tol"])
    target, trep = disc_flow(lambda th: np.exp(1j * (th + warp * np.sin(th))), grid, tol=hp["tol"])
    nodes = grid.nodes[np.abs(grid.nodes) <= hp["eval_radius"]]
    floor = float(np.max(hopf_holomorphy_residual(control, nodes)))
    res = float(np.max(hopf_holomorphy_residual(target, nodes)))
    positive = float(np.max(hopf_holomorphy_residual(disc_affine(1.0, 0.3), nodes[np.abs(nodes) <= 0.5], 1e-4)))
    bound = hp["floor_factor"] * floor
    flow_ok = crep.converged and trep.converged and res <= bound
    ok &= flow_ok
    rows = [
        ("mobius_control", crep.iterations, crep.final_sup_tension, floor, "", "floor"),
        ("warped_circle", trep.iterations, trep.final_sup_tension, res, bound, "pass" if flow_ok else "fail"),
        ("affine_positive_control", 0, "", positive, "", "recorded"),
    ]
    write_table(os.path.join(out, "hopf_flow.csv"), cfg, "Hopf holomorphy residuals of disc flow outputs",
                ["case", "iterations", "sup_tension", "max_residual", "threshold", "result"], rows,
                notes=[f"evaluation nodes: |z| <= {hp['eval_radius']!r}, step = grid spacing"])
    text = target.hopf_table()
    _write(os.path.join(out, "hopf_grid.csv"), "\n".join(cfg.header_lines("Hopf grid")) + "\n" + text)
    return EXIT_OK if ok else EXIT_FAIL


COMMAND_FUNCS = {
    "extend": cmd_extend,
    "flow": cmd_flow,
    "verify": cmd_verify,
    "constants": cmd_constants,
    "hopf": cmd_hopf,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hyperharmonic", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMAND_FUNCS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", required=True, help="configuration file (or an output file embedding one)")
        p.add_argument("--out", default=".", help="output directory (default: current directory)")
        p.add_argument("--seed", type=int, default=None, help="override the configured seed")
    return parser


def run(cfg: ExperimentConfig, out: str) -> int:
    os.makedirs(out, exist_ok=True)
    return COMMAND_FUNCS[cfg.command](cfg, out)


def main(argv=None) -> int:
    from .flow import FlowError
    from .hopf import DiscFlowError
    from .verify.constants import MissingConstantsError

    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        cfg = load_config(args.config, args.command)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        return run(cfg, args.out)
    except (ConfigError, UsageError, MissingConstantsError) as exc:
        print(f"hyperharmonic: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FlowError, DiscFlowError) as exc:
        print(f"hyperharmonic: {args.command} failed: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
