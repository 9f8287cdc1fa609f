import math
import sys
from pathlib import Path

import numpy as np
import pytest

import killing_graphs
from killing_graphs.geometry import (
    CurvatureProfile,
    RadialFunction,
    euclidean_model,
    hyperbolic_model,
)


def hyperbolic_profile():
    """Curvature -1 with constants that make every barrier hypothesis hold."""
    one = RadialFunction.constant(1.0)
    return CurvatureProfile(one, one, 0.0, 10.0, math.e, 1.0, 2.0, 0.5, 10.0)


@pytest.fixture(scope="session")
def hyp():
    return hyperbolic_model(2, 20.0)


@pytest.fixture(scope="session")
def hyp_profile():
    return hyperbolic_model(2, 20.0, hyperbolic_profile())


@pytest.fixture(scope="session")
def flat():
    return euclidean_model(2, 20.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


def u_star(r, t):
    return r * np.exp(-r * r) * np.sin(t)


def manufactured_H(geom, delta=1e-4):
    """H* = Q[u*]/2 for u* = r exp(-r^2) sin(theta).

    The gradient of u* is exact; the divergence of the fluxes is taken by
    central differences of width ``delta``, far below any grid spacing used.
    """

    def fluxes(r, t):
        e = np.exp(-r * r)
        ur = (1 - 2 * r * r) * e * np.sin(t)
        ut = r * e * np.cos(t)
        xi = geom.xi(r)
        W = np.sqrt(geom.rho(r) ** -2 + ur**2 + (ut / xi) ** 2)
        return xi * ur / W, ut / (xi * W), ur / W

    def H(r, t):
        r = np.asarray(r, float)
        t = np.asarray(t, float)
        dF = (fluxes(r + delta, t)[0] - fluxes(r - delta, t)[0]) / (2 * delta)
        dG = (fluxes(r, t + delta)[1] - fluxes(r, t - delta)[1]) / (2 * delta)
        q = (dF + dG) / geom.xi(r) + geom.dlog_rho(r) * fluxes(r, t)[2]
        return 0.5 * q

    return H


BUNDLED = Path(killing_graphs.__file__).parent / "data" / "hyperbolic.toml"


@pytest.fixture
def config_text():
    return BUNDLED.read_text(encoding="utf-8")


@pytest.fixture
def write_config(tmp_path):
    """Write a variant of the bundled config and return its path."""

    def make(text, name="run.toml"):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    return make


def gradient_cap(geom, problem, sol, sup_H):
    """max(1, e^B) at the pole for a solution shifted to be positive."""
    return gradient_bound_at_pole(geom, problem, sol, sup_H).gradient_cap


def gradient_bound_at_pole(geom, problem, sol, sup_H):
    from killing_graphs import analysis

    R = problem.grid.R
    K0, L = analysis.model_curvature_constants(geom, 0.0, R)
    shift = 1.0 - min(sol.values.min(), sol.boundary.min())
    kw = dict(K0=K0, L_ric=L, M_sup=max(sol.values.max(), sol.boundary.max()) + shift,
              u_at_p=float(sol.values[0].mean()) + shift, sup_H=sup_H, sup_grad_H=0.0)
    beta = analysis.choose_beta(geom, 0.0, R, **kw)
    return analysis.gradient_bound_details(
        analysis.GradientBoundInput(geom, 0.0, R, beta=beta, **kw))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULT_LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for k in sorted(lines):
            terminalreporter.write_line(lines[k])
