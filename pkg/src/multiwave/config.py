"""Scenario configuration files.

Line-oriented ``key = value`` pairs grouped under ``[section]`` headers.
``#`` starts a comment.  Lists are comma separated, matrix rows are
separated by ``;`` and complex numbers are written ``a+bi``.  Exponents
accept integers, fractions such as ``5/2`` and ``inf``.

Every error is a :class:`ConfigError` carrying the offending line number and
a distinct reason code.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from math import pi

import numpy as np

from .errors import ConfigError, MultipointConditionError, MultiwaveError
from .multipoint import MultipointSpec
from .operators import OperatorSpec, build_operator, build_sturm_liouville, diagonal_operator
from .spectral import GridSpec
from .strichartz import as_exponent, fmt

SCENARIO_KINDS = (
    "solve-linear",
    "solve-nlw",
    "check-admissible",
    "verify-dispersive",
    "verify-strichartz",
    "oracle-compare",
)

_NUM = r"(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?"
_COMPLEX_RE = re.compile(rf"^(?:([+-]?{_NUM})(?:([+-])({_NUM})?i)?|([+-]?)({_NUM})?i)$")


def parse_complex(text: str, line: int | None = None) -> complex:
    """``"a+bi"``, ``"a-bi"``, ``"a"``, ``"bi"`` or ``"i"``."""
    s = text.replace(" ", "")
    m = _COMPLEX_RE.match(s)
    if not m or s == "":
        raise ConfigError(f"malformed complex literal {text!r}", line, "malformed-complex")
    if m.group(1) is not None:
        re_part = float(m.group(1))
        if m.group(2) is None:
            return complex(re_part, 0.0)
        im = float(m.group(3)) if m.group(3) else 1.0
        return complex(re_part, im if m.group(2) == "+" else -im)
    im = float(m.group(5)) if m.group(5) else 1.0
    return complex(0.0, -im if m.group(4) == "-" else im)


def format_complex(z: complex) -> str:
    z = complex(z)
    if z.imag == 0:
        return repr(z.real)
    sign = "+" if z.imag >= 0 else "-"
    return f"{z.real!r}{sign}{abs(z.imag)!r}i"


def _split(text: str) -> list[str]:
    items = [t.strip() for t in text.split(",")]
    return [t for t in items if t]


def _float(text, line):
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"expected a real number, got {text!r}", line, "bad-value") from None


def _int(text, line):
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"expected an integer, got {text!r}", line, "bad-value") from None


def _exponent(text, line):
    try:
        return as_exponent(text.strip())
    except (ValueError, ZeroDivisionError, MultiwaveError):
        raise ConfigError(f"expected an exponent (integer, p/q or inf), got {text!r}", line, "bad-value") from None


def _bool(text, line):
    low = text.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}", line, "bad-value")


def _matrix(text, line):
    rows = [r for r in text.split(";") if r.strip()]
    mat = [[parse_complex(t, line) for t in _split(r)] for r in rows]
    if not mat or any(len(r) != len(mat) for r in mat):
        raise ConfigError("matrix must be square, rows separated by ';'", line, "bad-value")
    return mat


_PARSERS = {
    "str": lambda t, ln: t.strip(),
    "int": _int,
    "float": _float,
    "bool": _bool,
    "exponent": _exponent,
    "int_list": lambda t, ln: [_int(x, ln) for x in _split(t)],
    "float_list": lambda t, ln: [_float(x, ln) for x in _split(t)],
    "complex_list": lambda t, ln: [parse_complex(x, ln) for x in _split(t)],
    "exponent_list": lambda t, ln: [_exponent(x, ln) for x in _split(t)],
    "matrix": _matrix,
}


def _format(kind: str, value) -> str:
    if kind == "str":
        return value
    if kind in ("int", "bool"):
        return str(value).lower() if kind == "bool" else str(value)
    if kind == "float":
        return repr(float(value))
    if kind == "exponent":
        return fmt(value)
    if kind == "int_list":
        return ", ".join(str(v) for v in value)
    if kind == "float_list":
        return ", ".join(repr(float(v)) for v in value)
    if kind == "complex_list":
        return ", ".join(format_complex(v) for v in value)
    if kind == "exponent_list":
        return ", ".join(fmt(v) for v in value)
    if kind == "matrix":
        return "; ".join(", ".join(format_complex(v) for v in row) for row in value)
    raise AssertionError(kind)


SCHEMA: dict[str, dict[str, str]] = {
    "scenario": {"kind": "str", "name": "str"},
    "grid": {"n": "int", "points": "int_list", "length": "float_list"},
    "operator": {"kind": "str", "matrix": "matrix", "values": "float_list", "points": "int",
                 "a": "float", "c": "float"},
    "multipoint": {"alphas": "complex_list", "betas": "complex_list", "lambdas": "float_list"},
    "data": {"kind": "str", "seed": "int", "bumps": "int", "width": "float", "mode": "int_list",
             "amplitude": "complex_list", "psi_scale": "float", "phi_file": "str", "psi_file": "str",
             "zero_mean": "bool"},
    "source": {"kind": "str", "steps": "int", "amplitude": "float", "frequency": "float"},
    "solve": {"horizon": "float", "steps": "int", "cap": "float", "dt": "float",
              "g2_half_term": "bool", "g2_sine_kernel": "bool"},
    "nonlinearity": {"kind": "str", "lambda": "float", "k": "float"},
    "picard": {"max_iter": "int", "tol": "float", "p": "float", "M": "float", "window": "float",
               "t_star": "float", "dt": "float", "q": "exponent", "r": "exponent"},
    "exponents": {"n_values": "int_list", "q_values": "exponent_list", "r_values": "exponent_list",
                  "q": "exponent", "r": "exponent", "gamma": "exponent", "alpha": "float",
                  "q_tilde": "exponent", "r_tilde": "exponent",
                  "alphas": "float_list", "p": "exponent"},
    "dispersive": {"t_min": "float", "t_max": "float", "samples": "int", "alpha": "float",
                   "p": "exponent", "width": "float", "mass": "float"},
    "ensemble": {"instances": "int", "hdim": "int", "m": "int", "steps": "int"},
    "output": {"prefix": "str", "snapshots": "bool"},
}

_OPERATOR_KINDS = ("inline", "sturm-liouville", "diagonal")
_DATA_KINDS = ("gaussian", "single-mode", "file", "zero")
_SOURCE_KINDS = ("none", "gaussian")


@dataclass
class ScenarioConfig:
    """Parsed scenario: typed values per section plus the line each came from."""

    kind: str
    sections: dict = field(default_factory=dict)
    lines: dict = field(default_factory=dict)

    def get(self, section: str, key: str, default=None):
        return self.sections.get(section, {}).get(key, default)

    def line_of(self, section: str, key: str | None = None):
        return self.lines.get((section, key)) or self.lines.get((section, None))

    def has(self, section: str) -> bool:
        return section in self.sections

    # -- builders -----------------------------------------------------------

    def grid(self) -> GridSpec:
        n = self.get("grid", "n", 2)
        pts = self.get("grid", "points", [32])
        length = self.get("grid", "length", [2 * pi])
        pts = pts * n if len(pts) == 1 else pts
        length = length * n if len(length) == 1 else length
        if len(pts) != n or len(length) != n:
            raise ConfigError("grid points/length must have 1 or n entries", self.line_of("grid"), "bad-value")
        try:
            return GridSpec(tuple(pts), tuple(length))
        except MultiwaveError as err:
            raise ConfigError(str(err), self.line_of("grid"), err.reason) from None

    def operator(self) -> OperatorSpec:
        kind = self.get("operator", "kind", "inline")
        line = self.line_of("operator", "kind")
        try:
            if kind == "inline":
                mat = self.get("operator", "matrix")
                if mat is None:
                    raise ConfigError("inline operator needs 'matrix'", self.line_of("operator"), "missing-key")
                return build_operator(np.array(mat, dtype=complex))
            if kind == "diagonal":
                vals = self.get("operator", "values")
                if vals is None:
                    raise ConfigError("diagonal operator needs 'values'", self.line_of("operator"), "missing-key")
                return diagonal_operator(vals)
            if kind == "sturm-liouville":
                return build_sturm_liouville(self.get("operator", "a", 1.0), self.get("operator", "c", 0.0),
                                             self.get("operator", "points", 5))
        except ConfigError:
            raise
        except MultiwaveError as err:
            raise ConfigError(str(err), self.line_of("operator"), err.reason) from None
        raise ConfigError(f"unknown operator kind {kind!r}", line, "unknown-kind")

    def multipoint(self) -> MultipointSpec:
        if not self.has("multipoint"):
            return MultipointSpec.cauchy()
        a = self.get("multipoint", "alphas", [])
        b = self.get("multipoint", "betas", [])
        lam = self.get("multipoint", "lambdas", [])
        try:
            return MultipointSpec(a, b, lam)
        except MultipointConditionError as err:
            raise ConfigError(str(err), self.line_of("multipoint"), err.reason) from None

    @property
    def seed(self):
        return self.get("data", "seed")


def parse_config(text: str, *, seed: int | None = None) -> ScenarioConfig:
    """Parse and validate a scenario; ``seed`` overrides ``[data] seed``."""
    sections: dict = {}
    lines: dict = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        if body.startswith("["):
            if not body.endswith("]"):
                raise ConfigError(f"malformed section header {raw.strip()!r}", lineno, "syntax")
            current = body[1:-1].strip()
            if current not in SCHEMA:
                raise ConfigError(f"unknown section [{current}]", lineno, "unknown-section")
            if current in sections:
                raise ConfigError(f"duplicate section [{current}]", lineno, "duplicate")
            sections[current] = {}
            lines[(current, None)] = lineno
            continue
        if "=" not in body:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno, "syntax")
        if current is None:
            raise ConfigError("key outside of any [section]", lineno, "syntax")
        key, value = (s.strip() for s in body.split("=", 1))
        kinds = SCHEMA[current]
        if key not in kinds:
            raise ConfigError(f"unknown key {key!r} in [{current}]", lineno, "unknown-key")
        if key in sections[current]:
            raise ConfigError(f"duplicate key {key!r} in [{current}]", lineno, "duplicate")
        sections[current][key] = _PARSERS[kinds[key]](value, lineno)
        lines[(current, key)] = lineno

    if "scenario" not in sections or "kind" not in sections["scenario"]:
        raise ConfigError("missing [scenario] kind", lines.get(("scenario", None)), "missing-key")
    kind = sections["scenario"]["kind"]
    if kind not in SCENARIO_KINDS:
        raise ConfigError(f"unknown scenario kind {kind!r}", lines[("scenario", "kind")], "unknown-scenario")
    if seed is not None:
        sections.setdefault("data", {})["seed"] = int(seed)
    cfg = ScenarioConfig(kind, sections, lines)
    validate(cfg)
    return cfg


def _check_choice(cfg, section, key, choices, default):
    value = cfg.get(section, key, default)
    if value not in choices:
        raise ConfigError(f"unknown {section} {key} {value!r}; expected one of {', '.join(choices)}",
                          cfg.line_of(section, key), "unknown-kind")


def validate(cfg: ScenarioConfig) -> None:
    _check_choice(cfg, "operator", "kind", _OPERATOR_KINDS, "inline")
    _check_choice(cfg, "data", "kind", _DATA_KINDS, "gaussian")
    _check_choice(cfg, "source", "kind", _SOURCE_KINDS, "none")
    needs_problem = cfg.kind in ("solve-linear", "solve-nlw", "oracle-compare")
    if needs_problem or cfg.has("grid"):
        cfg.grid()
    if needs_problem or cfg.has("operator"):
        if needs_problem and not cfg.has("operator"):
            raise ConfigError(f"scenario {cfg.kind} needs an [operator] block", None, "missing-key")
        cfg.operator()
    cfg.multipoint()
    randomized = cfg.kind == "verify-strichartz" or (
        (needs_problem or cfg.kind == "verify-dispersive") and cfg.get("data", "kind", "gaussian") == "gaussian"
    ) or cfg.get("source", "kind", "none") == "gaussian"
    if randomized and cfg.seed is None:
        raise ConfigError("randomized data requested but no seed given", cfg.line_of("data"), "missing-seed")
    if cfg.get("data", "kind") == "file":
        for key in ("phi_file", "psi_file"):
            path = cfg.get("data", key)
            if path is None:
                raise ConfigError(f"file data needs {key!r}", cfg.line_of("data"), "missing-key")
            if not os.path.exists(path):
                raise ConfigError(f"referenced file {path!r} does not exist", cfg.line_of("data", key),
                                  "missing-file")
    if cfg.kind == "solve-nlw":
        kind = cfg.get("nonlinearity", "kind", "scalar_power")
        if kind not in ("scalar_power", "fiber_norm_power"):
            raise ConfigError(f"unknown nonlinearity kind {kind!r}", cfg.line_of("nonlinearity", "kind"),
                              "unknown-kind")
        if cfg.get("nonlinearity", "k", 3.0) <= 1:
            raise ConfigError("power exponent k must exceed 1", cfg.line_of("nonlinearity", "k"), "bad-value")
        tol = cfg.get("picard", "tol", 1e-10)
        if tol <= 0:
            raise ConfigError("picard tol must be positive", cfg.line_of("picard", "tol"), "bad-value")
    if cfg.get("solve", "horizon", 1.0) <= 0:
        raise ConfigError("horizon must be positive", cfg.line_of("solve", "horizon"), "bad-value")


def format_config(cfg: ScenarioConfig) -> str:
    """Canonical text: sections and keys in schema order, values in canonical form."""
    out = []
    for section, kinds in SCHEMA.items():
        if section not in cfg.sections:
            continue
        out.append(f"[{section}]")
        for key, kind in kinds.items():
            if key in cfg.sections[section]:
                out.append(f"{key} = {_format(kind, cfg.sections[section][key])}")
        out.append("")
    return "\n".join(out)


def load_config(path, *, seed: int | None = None) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), seed=seed)


TEMPLATE_LINEAR = """\
[scenario]
kind = solve-linear
name = template

[grid]
n = 2
points = 32
length = 16.0

[operator]
kind = inline
matrix = 2, 0.5; 0.5, 3

[multipoint]
alphas = 0.3, 0.1
betas = 0.2, 0.15
lambdas = 0.4, 0.9

[data]
kind = gaussian
seed = 7
width = 0.8

[source]
kind = gaussian
steps = 64

[solve]
horizon = 1.0
steps = 32

[output]
prefix = linear
"""
