import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import gradient_cap
from killing_graphs import analysis, solver
from killing_graphs.analysis import NonexistenceInput, Verdict
from killing_graphs.errors import InputError
from killing_graphs.geometry import RadialFunction, hyperbolic_model
from killing_graphs.grid import PolarGrid


def F(family, *params):
    return RadialFunction(family, params)


def bound_input(geom, R=1.0, beta=0.99, **kw):
    base = dict(K0=0.0, L_ric=0.0, M_sup=2.0, u_at_p=1.5, sup_H=0.0, sup_grad_H=0.0)
    base.update(kw)
    return analysis.GradientBoundInput(geom, 0.0, R, beta=beta, **base)


# -- curvature constants and the gradient bound -------------------------------------


def test_curvature_constants(flat, hyp):
    assert analysis.model_curvature_constants(flat, 0.0, 2.0) == (0.0, 0.0)
    K0, L = analysis.model_curvature_constants(hyp, 0.0, 2.0)
    # K = -1; Hess log cosh has eigenvalues sech^2 r and 1, so L = tanh^2 R
    assert K0 == pytest.approx(1.0, rel=1e-9)
    assert L == pytest.approx(math.tanh(2.0) ** 2, rel=1e-9)
    with pytest.raises(InputError):
        analysis.model_curvature_constants(hyperbolic_model(3), 0.0, 1.0)


def test_flat_disk_constants(flat):
    for R in (0.5, 1.0, 3.0):
        d = analysis.gradient_bound_details(bound_input(flat, R))
        assert d.C_R == R * R / 2
        assert math.isfinite(d.B) and d.B > 0
        assert d.rho_min == d.rho_max == 1.0
        assert d.mu > 0
        assert d.delta_prime == pytest.approx(math.log(99.0))


def test_constant_solution_passes(flat):
    d = analysis.gradient_bound_details(bound_input(flat, M_sup=1.0, u_at_p=1.0))
    assert d.B >= 0 and 0.0 <= d.gradient_cap


def test_hyperbolic_constants(hyp):
    K0, L = analysis.model_curvature_constants(hyp, 0.0, 2.0)
    d = analysis.gradient_bound_details(
        bound_input(hyp, 2.0, beta=1 - 1e-6, K0=K0, L_ric=L, sup_H=0.3))
    assert d.C_R == pytest.approx(math.cosh(2.0) - 1)
    assert d.rho_max == pytest.approx(math.cosh(2.0), rel=1e-6)
    assert d.B == pytest.approx(d.branches[0] if d.branches[0] > d.branches[1] else d.branches[1])


@settings(max_examples=40, deadline=None)
@given(h=st.floats(0, 2), dh=st.floats(0, 2), more=st.floats(0, 3))
def test_bound_is_monotone_in_H(h, dh, more):
    geom = hyperbolic_model(2)
    B = analysis.eval_interior_gradient_bound
    kw = dict(K0=1.0, L_ric=0.9, beta=1 - 1e-4)
    base = B(bound_input(geom, 1.0, sup_H=h, sup_grad_H=dh, **kw))
    assert B(bound_input(geom, 1.0, sup_H=h + more, sup_grad_H=dh, **kw)) >= base
    assert B(bound_input(geom, 1.0, sup_H=h, sup_grad_H=dh + more, **kw)) >= base


@pytest.mark.parametrize("beta", [0.5, 2 / 3, 1.0, 1.5])
def test_beta_outside_interval(flat, beta):
    with pytest.raises(InputError):
        bound_input(flat, beta=beta)


def test_beta_floor_follows_rho(hyp):
    lo = analysis.beta_lower_bound(hyp, 0.0, 2.0)
    c2 = math.cosh(2.0) ** 2
    assert lo == pytest.approx(c2 / (1 + c2), rel=1e-9)
    with pytest.raises(InputError):
        bound_input(hyp, 2.0, beta=0.9)


def test_input_validation(flat):
    for kw in (dict(K0=-1.0), dict(u_at_p=3.0), dict(u_at_p=0.0), dict(sup_H=-1.0)):
        with pytest.raises(InputError):
            bound_input(flat, **kw)


def test_choose_beta_minimises(hyp):
    kw = dict(K0=1.0, L_ric=0.5, M_sup=2.0, u_at_p=1.5, sup_H=0.3, sup_grad_H=0.0)
    beta = analysis.choose_beta(hyp, 0.0, 1.0, **kw)
    B = analysis.eval_interior_gradient_bound(
        analysis.GradientBoundInput(hyp, 0.0, 1.0, beta=beta, **kw))
    for k in range(1, 13):
        b = 1 - 10.0**-k
        if b > analysis.beta_lower_bound(hyp, 0.0, 1.0):
            other = analysis.GradientBoundInput(hyp, 0.0, 1.0, beta=b, **kw)
            assert B <= analysis.eval_interior_gradient_bound(other)


def test_flat_solutions_respect_bound(flat):
    g = PolarGrid(1.0, 32, 32)
    for phi in (np.cos(g.theta), 0.3 * np.sin(2 * g.theta), np.cos(g.theta) ** 3):
        p = solver.DirichletProblem(flat, 0.0, phi, g)
        sol = solver.solve_dirichlet(p)
        assert solver.gradient_at_pole(p, sol) <= gradient_cap(flat, p, sol, 0.0)


def test_hyperbolic_solutions_respect_bound(hyp):
    g = PolarGrid(2.0, 32, 32)
    for phi in (0.0, np.cos(g.theta), 2 * np.sin(g.theta)):
        p = solver.DirichletProblem(hyp, 0.3, phi, g)
        sol = solver.solve_dirichlet(p)
        assert solver.gradient_at_pole(p, sol) <= gradient_cap(hyp, p, sol, 0.3)


# -- non-existence probes -----------------------------------------------------------


def case_i(R=(10.0, 1000.0)):
    # 1/(s^2 log s), rho0 = A = s, 4D = 4 > 3
    return NonexistenceInput(F("power-log", 1, -2, -1), F("power", 1, 1), F("power", 1, 1),
                             D=1.0, s0=1.0, R_probe=R)


def exp_zero(R=(10.0, 1000.0)):
    e = F("exponential", 1, 1)
    return NonexistenceInput(RadialFunction.constant(0.0), e, e, R_probe=R)


def test_condition_1_case_i():
    rep = analysis.probe_condition_1(case_i())
    assert rep.verdict is Verdict.CONSISTENT
    assert rep.details["increments_nondecreasing"]
    assert rep.details["log_growth"] >= math.log(1e3)


def test_condition_1_integrable():
    rep = analysis.probe_condition_1(exp_zero())
    assert rep.verdict is Verdict.VIOLATED
    # e^{-3s}: doubling blocks shrink by far more than the threshold
    assert max(rep.details["outer_block_ratios"]) < 1e-10


def test_condition_1_borderline():
    inp = NonexistenceInput(RadialFunction.constant(0.0), RadialFunction.constant(1.0),
                            F("power", 1, 1))
    rep = analysis.probe_condition_1(inp)
    assert rep.verdict is Verdict.INCONCLUSIVE
    # 1/s integrates to log 2 on every doubling block
    assert np.allclose(rep.details["outer_block_ratios"], 1.0, atol=1e-6)


@pytest.mark.parametrize("make", [case_i, exp_zero])
def test_condition_1_stable_under_doubling(make):
    a = analysis.check_nonexistence_condition_1(make((10.0, 1000.0)))
    b = analysis.check_nonexistence_condition_1(make((10.0, 2000.0)))
    c = analysis.check_nonexistence_condition_1(make((20.0, 2000.0)))
    assert a == b == c


def test_condition_2_hyperbolic_growth():
    inp = NonexistenceInput(F("power-log", 1, -1, -1), F("cosh", 1, 1),
                            F("sinh", 2 * math.pi, 1))
    rep = analysis.probe_condition_2(inp)
    assert rep.verdict is Verdict.CONSISTENT
    assert rep.details["ratio_holds"]


def test_condition_2_power_growth():
    inp = NonexistenceInput(F("power-log", 1, 0, -1), F("power", 1, 1),
                            F("power", 2 * math.pi, 1))
    assert analysis.check_nonexistence_condition_2(inp) is Verdict.CONSISTENT


def test_condition_2_input_errors():
    zero = NonexistenceInput(RadialFunction.constant(0.0), F("cosh", 1, 1),
                             F("sinh", 2 * math.pi, 1))
    with pytest.raises(InputError, match="positive"):
        analysis.probe_condition_2(zero)
    rising = NonexistenceInput(F("power-log", 1, -1, -1), F("cosh", 1, 1),
                               F("sinh", 2 * math.pi, 1), h_nonexist=F("power", 1e-9, 1))
    with pytest.raises(InputError, match="non-increasing"):
        analysis.probe_condition_2(rising)


def test_condition_2_violated_by_large_h():
    inp = NonexistenceInput(F("power-log", 1, -1, -1), F("cosh", 1, 1),
                            F("sinh", 2 * math.pi, 1), h_nonexist=RadialFunction.constant(10.0))
    rep = analysis.probe_condition_2(inp)
    assert rep.verdict is Verdict.VIOLATED and rep.details["witness"] == 10.0


def test_probes_are_deterministic():
    a, b = analysis.probe_condition_1(case_i()), analysis.probe_condition_1(case_i())
    assert a.details == b.details
    assert str(a.verdict) == "CONSISTENT"


@pytest.mark.parametrize("kw", [dict(R_probe=(10.0, 500.0)), dict(R_probe=(0.0, 100.0)),
                                dict(D=0.0), dict(s0=10.0)])
def test_nonexistence_input_validation(kw):
    with pytest.raises(InputError):
        NonexistenceInput(RadialFunction.constant(1.0), RadialFunction.constant(1.0),
                          RadialFunction.constant(1.0), **kw)


# -- liminf proxy -------------------------------------------------------------------


@pytest.mark.parametrize("case", ["i", "ii", "iii"])
def test_liminf_zero_H(case):
    assert analysis.corollary_liminf_probe(0.0, F("cosh", 1, 1), case, 100.0) == 0.0


def test_liminf_case_i_cancels():
    # H = 0.2 rho0 / (r^2 log r) with rho0 = r
    v = analysis.corollary_liminf_probe(F("power-log", 0.2, -1, -1), F("power", 1, 1),
                                        "i", 100.0)
    assert v == pytest.approx(0.2, rel=1e-12)


def test_liminf_case_iii_decays():
    def H(r):
        return np.cosh(r) / (r * np.log(r))

    rho0 = F("cosh", 1, 1)
    near = analysis.corollary_liminf_probe(H, rho0, "iii", 50.0)
    far = analysis.corollary_liminf_probe(H, rho0, "iii", 100.0)
    assert near == pytest.approx(1 / 50, rel=1e-9)
    assert far == pytest.approx(1 / 100, rel=1e-9) and far < near


def test_liminf_errors():
    rho0 = F("cosh", 1, 1)
    for args in ((1.0, rho0, "iv", 100.0), (1.0, rho0, "i", 5.0), (-1.0, rho0, "i", 100.0)):
        with pytest.raises(InputError):
            analysis.corollary_liminf_probe(*args)
