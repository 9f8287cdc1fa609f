"""Strict TOML run configuration.

Every section is checked against a schema: unknown keys and missing
required keys raise :class:`ConfigError` naming the dotted key.
"""
from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ConfigError, InputError
from .geometry import CurvatureProfile, ModelGeometry, RadialFunction, euclidean_model, hyperbolic_model

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

REQUIRED = object()
NUMBER = (int, float)

FUNC = "function"      # radial function spec or a number
TABLE = "table"        # nested section with its own schema

SCHEMA: dict[str, dict[str, Any]] = {
    "geometry": {
        "model": (str, "hyperbolic"),
        "n": (int, 2),
        "r_max": (NUMBER, 20.0),
        "xi": (FUNC, None),
        "rho": (FUNC, None),
        "rho_plus": (FUNC, None),
        "profile": (TABLE, None),
    },
    "geometry.profile": {
        "a": (FUNC, REQUIRED),
        "b": (FUNC, REQUIRED),
        "T0": (NUMBER, REQUIRED),
        "C1": (NUMBER, REQUIRED),
        "C2": (NUMBER, REQUIRED),
        "C3": (NUMBER, REQUIRED),
        "C4": (NUMBER, REQUIRED),
        "Q": (NUMBER, REQUIRED),
        "T1": (NUMBER, REQUIRED),
    },
    "problem": {
        "H": (FUNC, 0.0),
        "boundary": (TABLE, None),
    },
    "problem.boundary": {
        "constant": (NUMBER, None),
        "samples": (list, None),
        "fourier": (list, None),
    },
    "jacobi": {
        "r_max": (NUMBER, 20.0),
        "step": (NUMBER, 1e-3),
        "kappa": (FUNC, None),
    },
    "radial": {
        "r_max": (NUMBER, 5.0),
        "step": (NUMBER, 1e-3),
        "anchor_r": (NUMBER, 0.0),
        "anchor_u": (NUMBER, 0.0),
    },
    "solver": {
        "R": (NUMBER, 3.0),
        "Nr": (int, 64),
        "Ntheta": (int, 64),
        "newton_tol": (NUMBER, 1e-10),
        "max_newton_iters": (int, 50),
        "continuation_steps": (int, 4),
        "radii": (list, None),
        "nodes_per_unit": (int, 16),
        "core_radius": (NUMBER, 2.0),
        "flux_r0": (NUMBER, None),
    },
    "barriers": {
        "eps": (NUMBER, 1.0 - math.sqrt(2.0) / 2.0),
        "phi_sup": (NUMBER, 1.0),
        "a0": (FUNC, None),
        "R_trunc": (NUMBER, 15.0),
        "tol": (NUMBER, 1e-6),
        "H_V": (FUNC, None),
        "grid_R": (NUMBER, 3.0),
        "Nr": (int, 48),
        "Ntheta": (int, 64),
        "L": (NUMBER, 3.0),
        "R3": (NUMBER, 3.0),
        "v0": (NUMBER, 0.0),
        "A": (NUMBER, 2.0),
        "delta": (NUMBER, None),
        "C0": (NUMBER, 2.0),
        "psi_R": (NUMBER, 8.0),
        "psi_Nr": (int, 64),
        "psi_Ntheta": (int, 256),
        "H_psi": (FUNC, None),
        "height_k": (NUMBER, 3.0),
        "rho0": (FUNC, None),
    },
    "probes": {
        "condition1": (TABLE, None),
        "condition2": (TABLE, None),
        "liminf": (TABLE, None),
    },
    "probes.condition1": {
        "p": (FUNC, REQUIRED),
        "rho0": (FUNC, REQUIRED),
        "area": (FUNC, REQUIRED),
        "D": (NUMBER, 1.0),
        "s0": (NUMBER, 0.0),
        "R_lo": (NUMBER, 10.0),
        "R_hi": (NUMBER, 1000.0),
        "divergence_factor": (NUMBER, 1e3),
        "cauchy_ratio": (NUMBER, 0.95),
    },
    "probes.condition2": {
        "p": (FUNC, REQUIRED),
        "rho0": (FUNC, REQUIRED),
        "area": (FUNC, REQUIRED),
        "h": (FUNC, None),
        "R_lo": (NUMBER, 10.0),
        "R_hi": (NUMBER, 1000.0),
        "divergence_factor": (NUMBER, 1e3),
        "cauchy_ratio": (NUMBER, 0.95),
    },
    "probes.liminf": {
        "H": (FUNC, REQUIRED),
        "rho0": (FUNC, REQUIRED),
        "case": (str, REQUIRED),
        "R_probe": (NUMBER, 100.0),
    },
    "output": {
        "directory": (str, "out"),
    },
}

TOP_LEVEL = ("geometry", "problem", "jacobi", "radial", "solver", "barriers", "probes", "output")


@dataclass(frozen=True)
class RunConfig:
    path: str
    data: dict

    def section(self, name, required=True):
        node = self.data
        for part in name.split("."):
            if not isinstance(node, dict) or part not in node or node[part] is None:
                if required:
                    raise ConfigError(f"missing section [{name}]")
                return None
            node = node[part]
        return node

    def has(self, name):
        return self.section(name, required=False) is not None


def _check(section_name, raw):
    schema = SCHEMA[section_name]
    if not isinstance(raw, dict):
        raise ConfigError(f"[{section_name}] must be a table")
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigError(f"unknown key {section_name}.{unknown[0]}")
    out = {}
    for key, (kind, default) in schema.items():
        where = f"{section_name}.{key}"
        if key not in raw:
            if default is REQUIRED:
                raise ConfigError(f"missing key {where}")
            out[key] = None if kind == TABLE else default
            continue
        val = raw[key]
        if kind == TABLE:
            out[key] = _check(where, val)
        elif kind == FUNC:
            out[key] = radial_function(val, where)
        elif kind is int:
            if isinstance(val, bool) or not isinstance(val, int):
                raise ConfigError(f"{where} must be an integer")
            out[key] = val
        elif kind == NUMBER:
            if isinstance(val, bool) or not isinstance(val, NUMBER):
                raise ConfigError(f"{where} must be a number")
            out[key] = float(val)
        elif not isinstance(val, kind):
            raise ConfigError(f"{where} must be of type {kind.__name__}")
        else:
            out[key] = val
    return out


_FUNC_KEYS = {"family", "params", "inner", "outer", "t0", "t1", "r", "values"}


def radial_function(spec, where="function") -> RadialFunction:
    """Build a profile from a number, ``{family, params}``, a blend or a table."""
    if isinstance(spec, bool):
        raise ConfigError(f"{where} must be a number or a function table")
    if isinstance(spec, NUMBER):
        return RadialFunction.constant(float(spec))
    if not isinstance(spec, dict):
        raise ConfigError(f"{where} must be a number or a function table")
    unknown = sorted(set(spec) - _FUNC_KEYS)
    if unknown:
        raise ConfigError(f"unknown key {where}.{unknown[0]}")
    fam = spec.get("family")
    if fam is None:
        raise ConfigError(f"missing key {where}.family")
    try:
        if fam == "blend":
            for k in ("inner", "outer", "t0", "t1"):
                if k not in spec:
                    raise ConfigError(f"missing key {where}.{k}")
            return RadialFunction.blend(radial_function(spec["inner"], where + ".inner"),
                                        radial_function(spec["outer"], where + ".outer"),
                                        spec["t0"], spec["t1"])
        if fam == "tabulated":
            for k in ("r", "values"):
                if k not in spec:
                    raise ConfigError(f"missing key {where}.{k}")
            return RadialFunction.tabulated(spec["r"], spec["values"])
        if "params" not in spec:
            raise ConfigError(f"missing key {where}.params")
        return RadialFunction(fam, tuple(spec["params"]))
    except ConfigError:
        raise
    except InputError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(raw, str(path))


def parse_config(raw: dict, path="<memory>") -> RunConfig:
    unknown = sorted(set(raw) - set(TOP_LEVEL))
    if unknown:
        raise ConfigError(f"unknown section [{unknown[0]}]")
    data = {}
    for name in TOP_LEVEL:
        data[name] = _check(name, raw[name]) if name in raw else None
    return RunConfig(path, data)


# ---------------------------------------------------------------------------
# builders


def build_geometry(cfg: RunConfig) -> ModelGeometry:
    g = cfg.section("geometry")
    profile = None
    if g["profile"] is not None:
        p = g["profile"]
        profile = CurvatureProfile(p["a"], p["b"], p["T0"], p["C1"], p["C2"], p["C3"],
                                   p["C4"], p["Q"], p["T1"])
    model = g["model"]
    if model == "hyperbolic":
        return hyperbolic_model(g["n"], g["r_max"], profile)
    if model == "euclidean":
        geom = euclidean_model(g["n"], g["r_max"])
        return ModelGeometry(geom.n, geom.xi, geom.rho, geom.rho_plus, profile, geom.r_max)
    if model == "custom":
        for k in ("xi", "rho", "rho_plus"):
            if g[k] is None:
                raise ConfigError(f"missing key geometry.{k}")
        return ModelGeometry(g["n"], g["xi"], g["rho"], g["rho_plus"], profile, g["r_max"])
    raise ConfigError(f"geometry.model must be hyperbolic, euclidean or custom, not {model!r}")


def boundary_data(cfg: RunConfig):
    """Boundary values as a callable of theta."""
    prob = cfg.section("problem")
    b = prob["boundary"]
    if b is None:
        raise ConfigError("missing section [problem.boundary]")
    given = [k for k in ("constant", "samples", "fourier") if b[k] is not None]
    if len(given) != 1:
        raise ConfigError("problem.boundary needs exactly one of constant, samples, fourier")
    kind = given[0]
    if kind == "constant":
        c = b["constant"]
        return lambda th: np.full(np.shape(th), c)
    if kind == "samples":
        vals = np.asarray(b["samples"], dtype=float)
        if vals.ndim != 1 or vals.size < 2:
            raise ConfigError("problem.boundary.samples must be a list of numbers")
        m = vals.size
        nodes = np.arange(m + 1) * (2 * math.pi / m)
        ext = np.concatenate([vals, vals[:1]])
        return lambda th: np.interp(np.mod(th, 2 * math.pi), nodes, ext)
    terms = []
    for row in b["fourier"]:
        if not (isinstance(row, list) and len(row) == 3):
            raise ConfigError("problem.boundary.fourier rows are [k, a_k, b_k]")
        terms.append(tuple(float(x) for x in row))
    return lambda th: sum(a * np.cos(k * th) + c * np.sin(k * th) for k, a, c in terms)


def boundary_sup(cfg: RunConfig) -> float:
    th = np.linspace(0.0, 2 * math.pi, 4097)
    return float(np.max(np.abs(boundary_data(cfg)(th))))
