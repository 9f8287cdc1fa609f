import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import BUNDLED
from killing_graphs import tables
from killing_graphs.config import (
    boundary_data,
    boundary_sup,
    build_geometry,
    load_config,
    parse_config,
    radial_function,
)
from killing_graphs.errors import ConfigError, InputError


def test_bundled_config_loads():
    cfg = load_config(BUNDLED)
    geom = build_geometry(cfg)
    assert geom.n == 2 and geom.profile is not None
    assert geom.rho(1.0) == pytest.approx(math.cosh(1.0))
    assert cfg.section("solver")["Nr"] == 128
    assert cfg.section("probes.liminf")["case"] == "ii"
    assert boundary_sup(cfg) == pytest.approx(1.0)


@pytest.mark.parametrize("raw, key", [
    ({"geometry": {"modle": "hyperbolic"}}, "geometry.modle"),
    ({"solver": {"Nr": 64, "tol": 1}}, "solver.tol"),
    ({"geometry": {"profile": {"a": 1}}}, "geometry.profile.b"),
    ({"problem": {"H": {"family": "power", "parms": [1, 2]}}}, "problem.H.parms"),
    ({"problem": {"H": {"params": [1]}}}, "problem.H.family"),
    ({"extras": {}}, "extras"),
])
def test_strict_schema_names_the_key(raw, key):
    with pytest.raises(ConfigError, match=key.replace(".", r"\.")):
        parse_config(raw)


@pytest.mark.parametrize("raw", [
    {"solver": {"Nr": 64.0}},
    {"solver": {"Nr": True}},
    {"solver": {"R": "3"}},
    {"probes": {"liminf": {"H": 0, "rho0": 1, "case": 2}}},
    {"problem": {"H": [1, 2]}},
    {"problem": {"H": {"family": "nope", "params": []}}},
])
def test_type_errors(raw):
    with pytest.raises(ConfigError):
        parse_config(raw)


def test_defaults_fill_in():
    cfg = parse_config({"solver": {}})
    assert cfg.section("solver")["newton_tol"] == 1e-10
    assert cfg.section("barriers", required=False) is None
    with pytest.raises(ConfigError, match=r"\[barriers\]"):
        cfg.section("barriers")


def test_function_specs():
    assert radial_function(2)(3.0) == 2.0
    f = radial_function({"family": "cosh", "params": [2, 1]})
    assert f(0.5) == pytest.approx(2 * math.cosh(0.5))
    b = radial_function({"family": "blend", "inner": 1, "outer": 3, "t0": 1, "t1": 2})
    assert b(0.5) == 1.0 and b(2.5) == 3.0
    t = radial_function({"family": "tabulated", "r": [0, 1, 2], "values": [0, 1, 4]})
    assert t(1.0) == pytest.approx(1.0)
    with pytest.raises(ConfigError, match="t1"):
        radial_function({"family": "blend", "inner": 1, "outer": 3, "t0": 1})
    with pytest.raises(ConfigError):
        radial_function(True)


def test_boundary_kinds():
    th = np.linspace(0, 2 * math.pi, 9)[:-1]
    c = parse_config({"problem": {"boundary": {"constant": 0.5}}})
    assert np.all(boundary_data(c)(th) == 0.5)
    s = parse_config({"problem": {"boundary": {"samples": [0.0, 1.0, 0.0, -1.0]}}})
    assert boundary_data(s)(math.pi / 2) == pytest.approx(1.0)
    assert boundary_data(s)(math.pi / 4) == pytest.approx(0.5)
    f = parse_config({"problem": {"boundary": {"fourier": [[2, 0.0, 1.0]]}}})
    assert np.allclose(boundary_data(f)(th), np.sin(2 * th))
    two = parse_config({"problem": {"boundary": {"constant": 1.0, "samples": [1.0, 2.0]}}})
    with pytest.raises(ConfigError, match="exactly one"):
        boundary_data(two)
    with pytest.raises(ConfigError, match=r"\[problem\.boundary\]"):
        boundary_data(parse_config({"problem": {"H": 0.0}}))


def test_geometry_models():
    e = build_geometry(parse_config({"geometry": {"model": "euclidean"}}))
    assert e.xi(2.0) == 2.0 and e.rho(2.0) == 1.0
    custom = {"model": "custom", "xi": {"family": "sinh", "params": [1, 1]},
              "rho": 1, "rho_plus": 1}
    g = build_geometry(parse_config({"geometry": custom}))
    assert g.xi(1.0) == pytest.approx(math.sinh(1.0))
    del custom["rho"]
    with pytest.raises(ConfigError, match="geometry.rho"):
        build_geometry(parse_config({"geometry": custom}))
    with pytest.raises(ConfigError, match="model"):
        build_geometry(parse_config({"geometry": {"model": "spherical"}}))


def test_unreadable_config(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.toml")
    bad = tmp_path / "bad.toml"
    bad.write_text("[solver\nNr = 1", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(bad)


# -- tables -------------------------------------------------------------------------


finite = st.floats(allow_nan=False, allow_infinity=False)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(finite, finite), min_size=1, max_size=20))
def test_table_round_trip(tmp_path_factory, rows):
    path = tmp_path_factory.mktemp("t") / "t.csv"
    a = np.array([r[0] for r in rows])
    b = np.array([r[1] for r in rows])
    tables.write_table(path, ("a", "b"), (a, b))
    header, data = tables.read_table(path)
    assert header == ["a", "b"]
    assert np.array_equal(data["a"], a) and np.array_equal(data["b"], b)


def test_float_format():
    assert tables.format_value(0.1) == "0.10000000000000001"
    assert tables.format_value(1.0) == "1"
    assert tables.format_value(np.float64(-1 / 3)) == "-0.33333333333333331"
    assert tables.format_value(-2.5e-300) == "-2.5e-300"
    assert tables.format_value(3) == "3"
    assert tables.format_value(np.True_) == "1"


def test_table_text_and_errors(tmp_path):
    assert tables.table_text(["x", "y"], [[1, 2], [0.5, 1.5]]) == "x,y\n1,0.5\n2,1.5\n"
    with pytest.raises(InputError):
        tables.table_text(["x", "y"], [[1, 2], [0.5]])
    with pytest.raises(InputError):
        tables.table_text(["x"], [[1], [2]])
    empty = tmp_path / "e.csv"
    empty.write_text("", encoding="utf-8")
    with pytest.raises(InputError):
        tables.read_table(empty)
    header, data = tables.read_table(tables.write_table(tmp_path / "h.csv", ["x"], [[]]))
    assert header == ["x"] and data["x"].size == 0
