"""Experiment configuration: ``key = value`` sections with a fixed schema.

A configuration fully determines a run.  :meth:`ExperimentConfig.to_text`
writes the canonical form (every key of the sections the command uses, with
defaults filled in); parsing it back gives an equal configuration and the
same text, and its SHA-256 is the configuration hash stamped on outputs.
Output files embed the canonical form on ``# config:`` lines, so
:func:`load_config` accepts either a configuration file or an output file.
"""
from __future__ import annotations

import configparser
import hashlib
import re
from dataclasses import dataclass

COMMANDS = ("extend", "flow", "verify", "constants", "hopf")
CONFIG_PREFIX = "# config: "


class ConfigError(ValueError):
    """Invalid configuration; ``line`` is the 1-based line number when known."""

    def __init__(self, message: str, line: int | None = None, source: str = "config"):
        self.line = line
        self.source = source
        where = f"{source}:{line}: " if line else f"{source}: "
        super().__init__(where + message)


def _floats(text):
    return tuple(float(v) for v in text.replace(",", " ").split())


def _words(text):
    return tuple(v for v in text.replace(",", " ").split())


def _bool(text):
    v = text.strip().lower()
    if v in ("true", "yes", "1", "on"):
        return True
    if v in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _optional(conv):
    def parse(text):
        return None if text.strip().lower() in ("", "none") else conv(text)
    parse.optional = True
    return parse


def _choice(*options):
    def parse(text):
        v = text.strip().lower()
        if v not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {text!r}")
        return v
    return parse


def _str(text):
    v = text.strip()
    if not v:
        raise ValueError("empty value")
    return v


def _lattice_axis(text):
    vals = _floats(text)
    if len(vals) != 3 or int(vals[2]) != vals[2] or vals[2] < 1 or vals[1] < vals[0]:
        raise ValueError("axis needs 'lo hi count' with lo <= hi and a positive integer count")
    return vals[0], vals[1], int(vals[2])


# section -> key -> (parser, default text)
SCHEMA = {
    "run": {
        "command": (_choice(*COMMANDS), None),
        "seed": (int, "0"),
        "preset": (_choice("standard", "paper_ball"), "standard"),
    },
    "map": {
        "boundary": (_str, "identity"),
    },
    "quadrature": {
        "nodes_per_axis": (int, "32"),
        "jitter": (float, "1e-09"),
    },
    "lattice": {
        "x": (_lattice_axis, "-1.0 1.0 5"),
        "y": (_lattice_axis, "-1.0 1.0 5"),
        "t": (_lattice_axis, "0.5 2.0 4"),
        "fd_step": (float, "0.001"),
    },
    "grid": {
        "radius": (float, "0.9"),
        "n": (int, "33"),
        "tol": (float, "0.001"),
        "max_iter": (int, "20000"),
        "c": (float, "0.2"),
        "record_energy": (_bool, "false"),
        "checkpoint": (_str, "field.ckpt"),
    },
    "sampler": {
        "scheme": (_choice("fibonacci", "random"), "fibonacci"),
        "count": (int, "2048"),
    },
    "verify": {
        "suites": (_words, "green green_estimate"),
        "green_preset": (_choice("standard", "paper_ball"), "paper_ball"),
        "radii": (_floats, "0.3 0.5 0.8"),
        "radial_nodes": (int, "64"),
        "green_tol": (float, "0.0001"),
        "chain_radius": (_optional(float), "none"),
        "chain_green_tol": (float, "0.001"),
        "estimate_count": (int, "256"),
        "checkpoint": (_str, "field.ckpt"),
    },
    "constants": {
        "K": (_optional(float), "none"),
        "q": (_optional(float), "none"),
        "T": (_optional(float), "none"),
        "D": (_optional(float), "none"),
        "r0": (_optional(float), "none"),
        "oracle_K1": (_optional(float), "none"),
        "c_samples": (int, "100000"),
        "measure_T": (_bool, "false"),
    },
    "hopf": {
        "n_min": (int, "2"),
        "n_max": (int, "12"),
        "points": (int, "100"),
        "grid": (int, "65"),
        "warp": (float, "0.2"),
        "control_a": (float, "0.3"),
        "tol": (float, "1e-09"),
        "eval_radius": (float, "0.5"),
        "floor_factor": (float, "10.0"),
    },
}

SECTIONS_FOR = {
    "extend": ("run", "map", "quadrature", "lattice"),
    "flow": ("run", "map", "quadrature", "grid"),
    "verify": ("run", "map", "quadrature", "sampler", "verify", "constants"),
    "constants": ("run", "map", "quadrature", "constants"),
    "hopf": ("run", "hopf"),
}

_VALID_SUITES = ("green", "green_estimate", "linear", "chain")


@dataclass(frozen=True)
class ExperimentConfig:
    """Parsed configuration: ``values[section][key]`` plus the raw canonical strings."""

    command: str
    raw: tuple  # ((section, ((key, text), ...)), ...)

    def section(self, name: str) -> dict:
        for sec, items in self.raw:
            if sec == name:
                return {k: SCHEMA[sec][k][0](v) for k, v in items}
        raise KeyError(name)

    def get(self, section: str, key: str):
        return self.section(section)[key]

    @property
    def seed(self) -> int:
        return self.get("run", "seed")

    def with_seed(self, seed: int) -> "ExperimentConfig":
        raw = []
        for sec, items in self.raw:
            if sec == "run":
                items = tuple((k, str(int(seed)) if k == "seed" else v) for k, v in items)
            raw.append((sec, items))
        return ExperimentConfig(self.command, tuple(raw))

    def to_text(self) -> str:
        out = []
        for sec, items in self.raw:
            if out:
                out.append("")
            out.append(f"[{sec}]")
            out += [f"{k} = {v}" for k, v in items]
        return "\n".join(out) + "\n"

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()

    def header_lines(self, title: str) -> list:
        lines = [f"# hyperharmonic {title}", f"# config-sha256: {self.sha256}", f"# seed: {self.seed}"]
        lines += [CONFIG_PREFIX + ln if ln else CONFIG_PREFIX.rstrip() for ln in self.to_text().splitlines()]
        return lines


_KEY_LINE = re.compile(r"^\s*([^=:\s][^=:]*?)\s*[=:]")
_SECTION_LINE = re.compile(r"^\s*\[([^\]]+)\]")


def _line_numbers(text: str) -> dict:
    """``(section, key) -> line`` and ``(section, None) -> line`` from a pre-scan."""
    where, section = {}, None
    for no, line in enumerate(text.splitlines(), start=1):
        if line.strip().startswith(("#", ";")):
            continue
        m = _SECTION_LINE.match(line)
        if m:
            section = m.group(1).strip()
            where.setdefault((section, None), no)
            continue
        m = _KEY_LINE.match(line)
        if m and section is not None and not line[0].isspace():
            where.setdefault((section, m.group(1).strip().lower()), no)
    return where


def parse_config(text: str, source: str = "config", command: str | None = None) -> ExperimentConfig:
    """Parse and validate configuration text; errors carry line numbers.

    ``command`` supplies ``[run] command`` when the text omits it; a text
    naming a different command is an error.
    """
    if not text.strip():
        raise ConfigError("empty configuration", None, source)
    lines = _line_numbers(text)
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=", ":"), comment_prefixes=("#", ";"),
                                   inline_comment_prefixes=None, strict=True, empty_lines_in_values=False)
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("key outside any section", exc.lineno, source) from None
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"duplicate key {exc.option!r} in [{exc.section}]", exc.lineno, source) from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section [{exc.section}]", exc.lineno, source) from None
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0], getattr(exc, "lineno", None), source) from None

    lower_schema = {s: {k.lower(): k for k in keys} for s, keys in SCHEMA.items()}
    given = {}
    for sec in cp.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section [{sec}]", lines.get((sec, None)), source)
        given[sec] = {}
        for key, val in cp.items(sec):
            canon = lower_schema[sec].get(key.lower())
            if canon is None:
                raise ConfigError(f"unknown key {key!r} in [{sec}]", lines.get((sec, key.lower())), source)
            given[sec][canon] = (val, lines.get((sec, key.lower())))

    run = given.setdefault("run", {})
    if "command" in run:
        named = run["command"][0].strip().lower()
        if named not in COMMANDS:
            raise ConfigError(f"unknown command {named!r}; expected one of {', '.join(COMMANDS)}",
                              run["command"][1], source)
        if command is not None and named != command:
            raise ConfigError(f"configuration is for {named!r}, not {command!r}", run["command"][1], source)
        command = named
    elif command is None:
        raise ConfigError("missing [run] command", lines.get(("run", None)), source)
    run["command"] = (command, run.get("command", (None, None))[1])

    raw = []
    for sec in SECTIONS_FOR[command]:
        items = []
        for key, (conv, default) in SCHEMA[sec].items():
            val, line = given.get(sec, {}).get(key, (default, None))
            if val is None:
                raise ConfigError(f"missing key {key!r} in [{sec}]", lines.get((sec, None)), source)
            try:
                parsed = conv(val)
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"bad value for {sec}.{key}: {exc}", line, source) from None
            items.append((key, _canonical(parsed, val, conv)))
            _validate(sec, key, parsed, line, source)
        raw.append((sec, tuple(items)))
    return ExperimentConfig(command, tuple(raw))


def _canonical(parsed, text, conv) -> str:
    if parsed is None:
        return "none"
    if isinstance(parsed, bool):
        return str(parsed).lower()
    if isinstance(parsed, float):
        return repr(parsed)
    if isinstance(parsed, int):
        return str(parsed)
    if isinstance(parsed, tuple):
        return " ".join(repr(v) if isinstance(v, float) else str(v) for v in parsed)
    return " ".join(str(parsed).split())


def _validate(sec, key, value, line, source):
    def fail(msg):
        raise ConfigError(f"bad value for {sec}.{key}: {msg}", line, source)

    if sec == "map" and key == "boundary":
        from .boundary import parse_map
        try:
            parse_map(value)
        except ValueError as exc:
            fail(str(exc))
    positive_ints = {("quadrature", "nodes_per_axis"), ("grid", "n"), ("sampler", "count"), ("verify", "radial_nodes"),
                     ("verify", "estimate_count"), ("constants", "c_samples"), ("hopf", "points"), ("hopf", "grid")}
    if (sec, key) in positive_ints and value < 1:
        fail("must be positive")
    if (sec, key) in {("grid", "max_iter")} and value < 0:
        fail("must be non-negative")
    if (sec, key) in {("grid", "radius"), ("hopf", "eval_radius")} and not 0.0 < value < 1.0:
        fail("must lie in (0, 1)")
    if (sec, key) in {("grid", "tol"), ("verify", "green_tol"), ("hopf", "tol")} and not value > 0:
        fail("must be positive")
    if sec == "verify" and key == "suites":
        bad = [s for s in value if s not in _VALID_SUITES]
        if bad or not value:
            fail(f"unknown suite(s) {', '.join(bad) or '(none)'}; expected {', '.join(_VALID_SUITES)}")
    if sec == "verify" and key == "radii" and (not value or any(not 0.0 < r < 1.0 for r in value)):
        fail("radii must lie in (0, 1)")
    if sec == "hopf" and key == "n_min" and value < 2:
        fail("n must be at least 2")
    if sec == "hopf" and key == "n_max" and value < 2:
        fail("n must be at least 2")


def extract_embedded(text: str) -> str | None:
    """Configuration text embedded in an output file, or ``None``."""
    lines = [ln for ln in text.splitlines() if ln.startswith(CONFIG_PREFIX.rstrip())]
    if not lines:
        return None
    return "\n".join(ln[len(CONFIG_PREFIX):] if ln.startswith(CONFIG_PREFIX) else "" for ln in lines) + "\n"


def load_config(path, command: str | None = None) -> ExperimentConfig:
    """Read a configuration file, or the configuration embedded in an output file."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration: {exc.strerror}", None, str(path)) from None
    if text.startswith("# hyperharmonic"):
        embedded = extract_embedded(text)
        if embedded is None:
            raise ConfigError("output file carries no embedded configuration", None, str(path))
        text = embedded
    return parse_config(text, str(path), command)


__all__ = ["COMMANDS", "ConfigError", "ExperimentConfig", "SCHEMA", "SECTIONS_FOR", "parse_config",
           "load_config", "extract_embedded"]
