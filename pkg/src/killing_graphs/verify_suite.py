"""Invariant checks run by ``killing-graphs verify``.

:func:`checks` returns independent zero-argument callables. Each yields a
list of ``(name, passed, detail)`` triples; ``passed is None`` marks a check
that does not apply to the configuration.
"""
from __future__ import annotations

import dataclasses
import math

import numpy as np

from . import analysis, barriers, radial, solver
from .config import RunConfig, boundary_data, boundary_sup, build_geometry
from .errors import AdmissibilityError
from .geometry import RadialFunction, integrate_jacobi
from .grid import DiscreteField, PolarGrid, evaluate_on_grid


def _setting(cfg: RunConfig):
    geom = build_geometry(cfg)
    s = cfg.section("solver")
    prob = cfg.section("problem")
    b = cfg.section("barriers", required=False)
    return geom, s, prob, b


def _config(s):
    return solver.SolverConfig(newton_tol=s["newton_tol"],
                               max_newton_iters=s["max_newton_iters"],
                               continuation_steps=s["continuation_steps"])


def _is_hyperbolic(geom):
    return (geom.xi.family == "sinh" and geom.rho.family == "cosh"
            and geom.xi.params == (1.0, 1.0) and geom.rho.params == (1.0, 1.0))


def check_jacobi(cfg):
    geom, *_ = _setting(cfg)
    if geom.profile is None:
        return [("jacobi_matches_model", None, {"reason": "no profile"})]
    r_end = min(10.0, geom.r_max)
    f = integrate_jacobi(geom.profile.a, r_end)
    r = np.linspace(0.1, r_end, 200)
    err = float(np.max(np.abs(f(r) - geom.xi(r)) / np.abs(geom.xi(r))))
    return [("jacobi_matches_model", err <= 1e-6, {"max_relative_error": err})]


def check_radial_closed_form(cfg):
    geom, _, prob, _ = _setting(cfg)
    H = prob["H"]
    if not (_is_hyperbolic(geom) and geom.n == 2 and H.family == "constant"):
        return [("radial_closed_form", None, {"reason": "needs hyperbolic n = 2, constant H"})]
    h = H.params[0]
    sol = radial.solve_radial(geom, h, 5.0)
    m = sol.r >= 0.1
    r = sol.r[m]
    s2, c2 = np.sinh(r) ** 2, np.cosh(r) ** 2
    exact = h * h * s2 / (c2 * (c2 - h * h * s2))
    err = float(np.max(np.abs(sol.du[m] ** 2 - exact) / exact))
    return [("radial_closed_form", err <= 1e-8, {"max_relative_error": err})]


def check_ball(cfg):
    """2-D versus radial, rotational reduction, flux, comparison and gradient bound."""
    geom, s, prob, _ = _setting(cfg)
    H = prob["H"]
    grid = PolarGrid(s["R"], s["Nr"], s["Ntheta"])
    conf = _config(s)
    p1 = solver.DirichletProblem(geom, H, 0.0, grid)
    u1 = solver.solve_dirichlet(p1, conf)
    out = []
    rad = radial.solve_radial(geom, H, grid.R, anchor=(grid.R, 0.0))
    err = float(np.max(np.abs(u1.values - rad(grid.r)[:, None])))
    out.append(("ball_matches_radial", err <= 5e-3, {"max_error": err, "Nr": grid.Nr}))
    spread = float(np.max(np.ptp(u1.values, axis=1)))
    out.append(("rotational_reduction", spread <= s["newton_tol"], {"theta_spread": spread}))
    flux = solver.flux_check(geom, u1, H, grid.face_r[grid.Nr // 2 - 1])
    out.append(("flux_conservation", flux.gap <= 1e-3, {"gap": flux.gap, "r0": flux.r0}))
    Hn = evaluate_on_grid(H, grid)
    if np.all(Hn >= 0):
        top = float(u1.values.max())
        out.append(("comparison_principle", top <= 1e-8, {"max_u": top}))
    out.append(_gradient_check("gradient_bound_radial", geom, H, p1, u1))
    return out


def _gradient_check(name, geom, H, problem, sol):
    grad = float(solver.gradient_at_pole(problem, sol))
    K0, L = analysis.model_curvature_constants(geom, 0.0, problem.grid.R)
    lo = float(min(sol.values.min(), sol.boundary.min()))
    shift = 1.0 - lo
    M = float(max(sol.values.max(), sol.boundary.max())) + shift
    u_p = float(np.mean(sol.values[0])) + shift
    r = np.linspace(0.0, problem.grid.R, 400)
    if isinstance(H, RadialFunction):
        sH, sdH = float(np.max(np.abs(H(r)))), float(np.max(np.abs(H.d1(r))))
    else:
        sH, sdH = float(np.max(np.abs(problem.H_nodes))), 0.0
    kw = dict(K0=K0, L_ric=L, M_sup=M, u_at_p=u_p, sup_H=sH, sup_grad_H=sdH)
    beta = analysis.choose_beta(geom, 0.0, problem.grid.R, **kw)
    B = analysis.eval_interior_gradient_bound(
        analysis.GradientBoundInput(geom, 0.0, problem.grid.R, beta=beta, **kw))
    cap = math.inf if B > 700 else max(1.0, math.exp(B))
    return (name, grad <= cap, {"grad_at_pole": grad, "B": B})


def check_boundary_data(cfg):
    """Maximum principle with H = 0 and the height estimate with the configured H."""
    geom, s, prob, b = _setting(cfg)
    phi = boundary_data(cfg)
    grid = PolarGrid(s["R"], s["Nr"], s["Ntheta"])
    conf = _config(s)
    out = []
    p0 = solver.DirichletProblem(geom, 0.0, phi, grid)
    u0 = solver.solve_dirichlet(p0, conf)
    lo, hi = float(p0.phi.min()), float(p0.phi.max())
    slack = 1e-8
    ok = bool(np.all(u0.values >= lo - slack) and np.all(u0.values <= hi + slack))
    out.append(("maximum_principle", ok, {"u_min": float(u0.values.min()),
                                          "u_max": float(u0.values.max()),
                                          "phi_min": lo, "phi_max": hi}))
    H = prob["H"]
    p1 = solver.DirichletProblem(geom, H, phi, grid)
    u1 = solver.solve_dirichlet(p1, conf)
    rho0 = b["rho0"] if b is not None and b["rho0"] is not None else geom.rho
    sup_phi = float(np.max(np.abs(p1.phi)))
    try:
        hb = barriers.build_height_barrier(geom, H, grid.R, rho0, sup_phi)
        bound = sup_phi + hb.height_bound
        top = float(np.max(np.abs(u1.values)))
        out.append(("height_estimate", top <= bound, {"sup_u": top, "bound": bound, "C": hb.C}))
    except AdmissibilityError as exc:
        out.append(("height_estimate", None, {"reason": str(exc)}))
    out.append(_gradient_check("gradient_bound_boundary_data", geom, H, p1, u1))
    return out


def check_sandwich(cfg):
    geom, s, prob, b = _setting(cfg)
    if b is None or b["a0"] is None:
        return [("barrier_sandwich", None, {"reason": "no a0 configured"})]
    HV = b["H_V"] if b["H_V"] is not None else prob["H"]
    grid = PolarGrid(b["grid_R"], b["Nr"], b["Ntheta"])
    V = barriers.build_V(geom, b["a0"], b["phi_sup"], b["R_trunc"], b["tol"])
    up = radial.build_u_plus(geom, b["eps"], b["phi_sup"], r_max=b["R_trunc"])
    out = []
    adm = barriers.check_HV_bound(geom, HV, V, grid.R)
    out.append(("HV_bound", adm.passed, {"margin": adm.margin}))
    every = lambda r, t: np.ones_like(r, dtype=bool)
    for name, prof in (("Q_V_negative", V), ("Q_u_plus_negative", up)):
        fld = DiscreteField.from_function(grid, lambda r, t, f=prof: f(r) + 0.0 * t)
        rep = barriers.verify_Q_negative(geom, HV, fld, every, name)
        out.append((name, rep.passed, {"max_value": rep.max_value, "witness": rep.witness}))
    phi = boundary_data(cfg)
    if boundary_sup(cfg) > b["phi_sup"]:
        out.append(("barrier_sandwich", None, {"reason": "boundary data exceed phi_sup"}))
        return out
    u = solver.solve_dirichlet(solver.DirichletProblem(geom, HV, phi, grid), _config(s))
    Vn = V(grid.r)[:, None]
    tol = 1e-8
    ok = bool(np.all(u.values <= Vn + tol) and np.all(u.values >= -Vn - tol))
    gap = float(np.min(Vn - np.abs(u.values)))
    out.append(("barrier_sandwich", ok, {"min_gap": gap}))
    return out


def check_psi(cfg):
    geom, _, prob, b = _setting(cfg)
    if b is None or geom.profile is None:
        return [("psi_negative", None, {"reason": "needs barriers and a profile"})]
    Hpsi = b["H_psi"] if b["H_psi"] is not None else prob["H"]
    grid = PolarGrid(b["psi_R"], b["psi_Nr"], b["psi_Ntheta"])
    psi = barriers.build_psi(geom, grid, b["A"], b["R3"], b["v0"], b["L"], b["delta"])
    rep = barriers.verify_Q_negative(geom, Hpsi, psi.field(), psi.region(), "psi_negative")
    out = [("psi_negative", rep.passed, {"max_value": rep.max_value, "nodes": rep.nodes})]
    smooth, _, _ = barriers.mollify(grid, np.ones(grid.shape), np.ones(grid.Ntheta),
                                    geom.profile.b, geom.xi)
    dev = float(np.max(np.abs(smooth - 1.0)))
    out.append(("mollifier_mass", dev <= 1e-15, {"max_deviation": dev}))
    h = psi.h.values
    out.append(("h_in_unit_interval", bool(h.min() >= 0 and h.max() <= 1),
                {"h_min": float(h.min()), "h_max": float(h.max())}))
    return out


def check_exhaustion(cfg):
    geom, s, _, _ = _setting(cfg)
    if s["radii"] is None:
        return [("exhaustion_cauchy", None, {"reason": "no radii configured"})]
    phi = boundary_data(cfg)
    rep = solver.solve_exhaustion(geom, 0.0, phi, s["radii"], _config(s),
                                  nodes_per_unit=s["nodes_per_unit"], Ntheta=s["Ntheta"],
                                  core_radius=s["core_radius"])
    return [("exhaustion_cauchy", rep.strictly_decreasing,
             {"sup_differences": rep.sup_differences})]


def check_jacobian(cfg):
    """Directional derivative of the residual against J v over three decades."""
    geom, s, prob, _ = _setting(cfg)
    grid = PolarGrid(s["R"], 16, 16)
    problem = solver.DirichletProblem(geom, prob["H"], boundary_data(cfg), grid)
    rr, tt = grid.mesh()
    u = DiscreteField(grid, 0.3 * np.sin(rr) * np.cos(tt), problem.phi)
    v = 0.1 * np.cos(2 * rr + tt)
    J = solver.assemble_jacobian(problem, u)
    base = solver.assemble_residual(problem, u).values.ravel()
    Jv = J.matvec(v.ravel())
    errs = []
    for t in (1e-3, 1e-4, 1e-5):
        w = DiscreteField(grid, u.values + t * v, problem.phi)
        fd = (solver.assemble_residual(problem, w).values.ravel() - base) / t
        errs.append(float(np.max(np.abs(fd - Jv))))
    ok = errs[1] < errs[0] and errs[2] < errs[1] and errs[2] / errs[0] < 0.05
    return [("jacobian_directional_derivative", ok, {"errors": errs})]


def check_probes(cfg):
    pr = cfg.section("probes", required=False)
    if pr is None:
        return [("probe_stability", None, {"reason": "no probes configured"})]
    out = []
    for which, key, fn in ((1, "condition1", analysis.probe_condition_1),
                           (2, "condition2", analysis.probe_condition_2)):
        sec = pr[key]
        if sec is None:
            continue
        from .cli import _nonexist_input

        base = _nonexist_input(sec, which)
        twice = dataclasses.replace(base, R_probe=(base.R_probe[0], 2 * base.R_probe[1]))
        v1, v2 = fn(base).verdict, fn(twice).verdict
        out.append((f"probe_stability_{key}", v1 == v2, {"verdict": str(v1),
                                                          "doubled": str(v2)}))
    return out


def checks(cfg: RunConfig):
    fns = (check_jacobi, check_radial_closed_form, check_ball, check_boundary_data,
           check_sandwich, check_psi, check_exhaustion, check_jacobian, check_probes)
    return [lambda f=f: f(cfg) for f in fns]
