"""Batch front-end: ``killing-graphs <subcommand> --config <path>``.

Exit codes: 0 success, 2 admissibility or verification failure, 3 numerical
failure, 4 configuration error.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import analysis, barriers, radial, solver
from .config import RunConfig, boundary_data, boundary_sup, build_geometry, load_config
from .errors import AdmissibilityError, ConfigError, InputError, KillingGraphError
from .geometry import RadialFunction, check_local_H_bound, integrate_jacobi
from .grid import DiscreteField, PolarGrid
from .tables import format_value, write_table

EXIT_OK, EXIT_FAIL, EXIT_NUMERICAL, EXIT_CONFIG = 0, 2, 3, 4
OUT_ENV = "KILLING_GRAPHS_OUT"
SUBCOMMANDS = ("jacobi", "radial", "ball", "exhaust", "barriers", "admissibility",
               "nonexist", "verify")


@dataclass
class Context:
    cfg: RunConfig
    out: Path
    threads: int = 1
    lines: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    failed: bool = False

    def check(self, name, passed, **detail):
        """Record one PASS/FAIL line."""
        self.failed |= not passed
        self.lines.append(_line("PASS" if passed else "FAIL", name, detail))
        self.summary.setdefault("checks", []).append(
            {"name": name, "passed": bool(passed), **_plain(detail)})

    def note(self, name, **detail):
        self.lines.append(_line("INFO", name, detail))
        self.summary.setdefault("info", []).append({"name": name, **_plain(detail)})

    def table(self, name, header, columns):
        write_table(self.out / name, header, columns)
        self.summary.setdefault("tables", []).append(name)


def _line(tag, name, detail):
    parts = [f"{k}={_fmt(v)}" for k, v in detail.items()]
    return " ".join([tag, name] + parts)


def _fmt(v):
    if isinstance(v, (float, np.floating, int, np.integer)) and not isinstance(v, bool):
        return format_value(v)
    if isinstance(v, (list, tuple)):
        return "[" + ",".join(_fmt(x) for x in v) + "]"
    return str(v)


def _plain(obj):
    """JSON-ready copy with non-finite floats as strings."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


# ---------------------------------------------------------------------------
# shared helpers


def _H(ctx, key=None):
    """Mean curvature for a subcommand; barrier-specific overrides win."""
    if key is not None and ctx.cfg.has("barriers"):
        val = ctx.cfg.section("barriers")[key]
        if val is not None:
            return val
    prob = ctx.cfg.section("problem", required=False)
    return RadialFunction.constant(0.0) if prob is None else prob["H"]


def _solver_config(s):
    return solver.SolverConfig(newton_tol=s["newton_tol"],
                               max_newton_iters=s["max_newton_iters"],
                               continuation_steps=s["continuation_steps"])


def _solve(geom, H, phi, grid, cfg):
    prob = solver.DirichletProblem(geom, H, phi, grid)
    return prob, solver.solve_dirichlet(prob, cfg)


def _solution_table(ctx, name, sol):
    g = sol.grid
    rr, tt = g.mesh()
    r = np.concatenate([rr.ravel(), np.full(g.Ntheta, g.R)])
    t = np.concatenate([tt.ravel(), g.theta])
    u = np.concatenate([sol.values.ravel(), sol.boundary])
    ctx.table(name, ("r", "theta", "u"), (r, t, u))


def _is_constant(H):
    return isinstance(H, RadialFunction) and H.family == "constant"


# ---------------------------------------------------------------------------
# subcommands


def cmd_jacobi(ctx):
    geom = build_geometry(ctx.cfg)
    j = ctx.cfg.section("jacobi", required=False) or {"r_max": 20.0, "step": 1e-3, "kappa": None}
    kappa = j["kappa"]
    if kappa is None:
        if geom.profile is None:
            raise ConfigError("missing key jacobi.kappa (and no geometry.profile)")
        kappa = geom.profile.a
    f = integrate_jacobi(kappa, j["r_max"], j["step"])
    r, vals = f.table
    ctx.table("jacobi.csv", ("r", "f", "df", "d2f"), (r, vals, f.d1(r), f.d2(r)))
    ctx.note("jacobi", r_max=float(r[-1]), f_end=float(vals[-1]), steps=int(r.size - 1))


def cmd_radial(ctx):
    geom = build_geometry(ctx.cfg)
    rc = ctx.cfg.section("radial")
    H = _H(ctx)
    sol = radial.solve_radial(geom, H, rc["r_max"], (rc["anchor_r"], rc["anchor_u"]), rc["step"])
    header, cols = sol.columns()
    ctx.table("radial.csv", header, cols)
    q = sol.quadrature_residual()
    ctx.note("radial", r_max=float(sol.r[-1]), u_end=float(sol.u[-1]),
             max_quadrature_residual=float(q.max()))


def cmd_ball(ctx):
    geom = build_geometry(ctx.cfg)
    s = ctx.cfg.section("solver")
    phi = boundary_data(ctx.cfg)
    grid = PolarGrid(s["R"], s["Nr"], s["Ntheta"])
    H = _H(ctx)
    prob, sol = _solve(geom, H, phi, grid, _solver_config(s))
    _solution_table(ctx, "solution.csv", sol)
    r0 = s["flux_r0"] if s["flux_r0"] is not None else grid.face_r[grid.Nr // 2 - 1]
    flux = solver.flux_check(geom, sol, H, r0)
    hist = [rec.residual_history for rec in sol.meta["records"]]
    ctx.summary["run"] = _plain({
        "iterations": sol.meta["iterations"],
        "residual": sol.meta["residual"],
        "residual_history": hist,
        "admissibility_margin": sol.meta["admissibility_margin"],
        "roundoff_limited": sol.meta["roundoff_limited"],
        "flux": {"r0": flux.r0, "lhs": flux.lhs, "rhs": flux.rhs, "gap": flux.gap},
    })
    ctx.note("ball", iterations=sol.meta["iterations"], residual=sol.meta["residual"],
             admissibility_margin=sol.meta["admissibility_margin"], flux_gap=flux.gap)


def _pinching(ctx, geom):
    if geom.profile is None or not ctx.cfg.has("barriers"):
        return None
    b = ctx.cfg.section("barriers")
    phi = boundary_data(ctx.cfg)
    L, v0 = b["L"], b["v0"]
    th = v0 + np.linspace(-1.0 / L, 1.0 / L, 257)
    eps = float(np.max(np.abs(phi(th) - phi(np.array([v0]))[0])))
    A = 2.0 * boundary_sup(ctx.cfg)
    return barriers.pinching_check(geom, v0, L, b["R3"], eps, float(phi(np.array([v0]))[0]),
                                   A, b["delta"])


def cmd_exhaust(ctx):
    geom = build_geometry(ctx.cfg)
    s = ctx.cfg.section("solver")
    if s["radii"] is None:
        raise ConfigError("missing key solver.radii")
    rep = solver.solve_exhaustion(geom, _H(ctx), boundary_data(ctx.cfg), s["radii"],
                                  _solver_config(s), nodes_per_unit=s["nodes_per_unit"],
                                  Ntheta=s["Ntheta"], core_radius=s["core_radius"],
                                  pinching=_pinching(ctx, geom), threads=ctx.threads)
    for R, sol in zip(rep.radii, rep.solutions):
        _solution_table(ctx, f"solution_R{R:g}.csv", sol)
    k = np.arange(1, len(rep.radii))
    ctx.table("exhaust.csv", ("k", "R_prev", "R", "sup_difference"),
              (k, rep.radii[:-1], rep.radii[1:], rep.sup_differences))
    ctx.check("exhaustion_cauchy", rep.strictly_decreasing, sup_differences=rep.sup_differences)
    for p in rep.pinching:
        ctx.check(p.name, p.passed, max_value=p.max_value, witness=p.witness,
                  violations=p.violations)


def _grid_field(grid, fn):
    return DiscreteField.from_function(grid, lambda r, t: fn(r) + 0.0 * t)


def _everywhere(r, t):
    return np.ones_like(r, dtype=bool)


def cmd_barriers(ctx):
    geom = build_geometry(ctx.cfg)
    b = ctx.cfg.section("barriers")
    grid = PolarGrid(b["grid_R"], b["Nr"], b["Ntheta"])
    HV = _H(ctx, "H_V")
    up = radial.build_u_plus(geom, b["eps"], b["phi_sup"], r_max=b["R_trunc"])
    ctx.table("u_plus.csv", ("r", "u", "du"), (up.r, up.u, up.du))
    rep = barriers.verify_Q_negative(geom, HV, _grid_field(grid, up), _everywhere, "Q_u_plus")
    ctx.check(rep.name, rep.passed, max_value=rep.max_value, witness=rep.witness)
    if b["a0"] is not None:
        V = barriers.build_V(geom, b["a0"], b["phi_sup"], b["R_trunc"], b["tol"])
        ctx.table("V.csv", ("r", "V", "dV"), (V.r, V.V, V.dV))
        rep = barriers.verify_Q_negative(geom, HV, _grid_field(grid, V), _everywhere, "Q_V")
        ctx.check(rep.name, rep.passed, max_value=rep.max_value, witness=rep.witness, D=V.D)
    if geom.profile is not None:
        pg = PolarGrid(b["psi_R"], b["psi_Nr"], b["psi_Ntheta"])
        psi = barriers.build_psi(geom, pg, b["A"], b["R3"], b["v0"], b["L"], b["delta"])
        f = psi.field()
        rr, tt = pg.mesh()
        ctx.table("psi.csv", ("r", "theta", "psi", "h"),
                  (rr.ravel(), tt.ravel(), f.values.ravel(), psi.h.values.ravel()))
        rep = barriers.verify_Q_negative(geom, _H(ctx, "H_psi"), f, psi.region(), "Q_psi")
        ctx.check(rep.name, rep.passed, max_value=rep.max_value, witness=rep.witness,
                  nodes=rep.nodes, delta=psi.delta)


def cmd_admissibility(ctx):
    geom = build_geometry(ctx.cfg)
    H = _H(ctx)
    R = ctx.cfg.section("solver")["R"] if ctx.cfg.has("solver") else geom.r_max
    rep = check_local_H_bound(geom, H, R)
    ctx.check("local_H_bound", rep.passed, margin=rep.margin, witness=rep.witness)
    if not ctx.cfg.has("barriers"):
        return
    b = ctx.cfg.section("barriers")
    rep = radial.check_H_bound_u_plus(geom, H, b["eps"], R)
    ctx.check("u_plus_H_bound", rep.passed, margin=rep.margin, witness=rep.witness)
    if b["a0"] is not None:
        V = barriers.build_V(geom, b["a0"], b["phi_sup"], b["R_trunc"], b["tol"])
        rep = barriers.check_HV_bound(geom, _H(ctx, "H_V"), V)
        ctx.check("HV_bound", rep.passed, margin=rep.margin, witness=rep.witness,
                  asymptotic_ratio_end=rep.extra["asymptotic_ratio"][-1])
    if geom.profile is not None:
        phi_exp, d1 = barriers.psi_exponents(geom.profile, geom.n)
        delta = b["delta"] if b["delta"] is not None else 0.5 * min(d1, phi_exp - 1)
        rep = barriers.check_psi_hypotheses(geom, _H(ctx, "H_psi"), delta, b["C0"])
        ctx.check("psi_hypotheses", rep.passed, margin=rep.margin, witness=rep.witness,
                  tail_margin=rep.extra["tail_margin"])
    rho0 = b["rho0"] if b["rho0"] is not None else geom.rho
    try:
        hb = barriers.build_height_barrier(geom, H, b["height_k"], rho0, boundary_sup_or(ctx))
        ctx.check("height_barrier", True, C=hb.C, height_bound=hb.height_bound)
    except AdmissibilityError as exc:
        ctx.check("height_barrier", False, reason=str(exc), witness=exc.witness)


def boundary_sup_or(ctx, default=0.0):
    prob = ctx.cfg.section("problem", required=False)
    if prob is None or prob["boundary"] is None:
        return default
    return boundary_sup(ctx.cfg)


def _nonexist_input(sec, which):
    if which == 1:
        return analysis.NonexistenceInput(sec["p"], sec["rho0"], sec["area"], D=sec["D"],
                                          R_probe=(sec["R_lo"], sec["R_hi"]), s0=sec["s0"],
                                          divergence_factor=sec["divergence_factor"],
                                          cauchy_ratio=sec["cauchy_ratio"])
    return analysis.NonexistenceInput(sec["p"], sec["rho0"], sec["area"], h_nonexist=sec["h"],
                                      R_probe=(sec["R_lo"], sec["R_hi"]),
                                      divergence_factor=sec["divergence_factor"],
                                      cauchy_ratio=sec["cauchy_ratio"])


def cmd_nonexist(ctx):
    pr = ctx.cfg.section("probes")
    for which, key, fn in ((1, "condition1", analysis.probe_condition_1),
                           (2, "condition2", analysis.probe_condition_2)):
        sec = pr[key]
        if sec is None:
            continue
        rep = fn(_nonexist_input(sec, which))
        ctx.note(key, verdict=str(rep.verdict))
        ctx.summary.setdefault("probes", {})[key] = _plain(
            {"verdict": str(rep.verdict), **rep.details})
    if pr["liminf"] is not None:
        sec = pr["liminf"]
        val = analysis.corollary_liminf_probe(sec["H"], sec["rho0"], sec["case"], sec["R_probe"])
        ctx.note("liminf", case=sec["case"], proxy=val)


# ---------------------------------------------------------------------------
# verify: the invariant suite


def _verify_checks(ctx):
    from . import verify_suite

    return verify_suite.checks(ctx.cfg)


def cmd_verify(ctx):
    checks = _verify_checks(ctx)
    if ctx.threads > 1:
        with ThreadPoolExecutor(max_workers=ctx.threads) as pool:
            results = list(pool.map(lambda c: c(), checks))
    else:
        results = [c() for c in checks]
    for res in results:
        for name, passed, detail in res:
            if passed is None:
                ctx.note(name, skipped=True, **detail)
            else:
                ctx.check(name, passed, **detail)


COMMANDS = {
    "jacobi": cmd_jacobi,
    "radial": cmd_radial,
    "ball": cmd_ball,
    "exhaust": cmd_exhaust,
    "barriers": cmd_barriers,
    "admissibility": cmd_admissibility,
    "nonexist": cmd_nonexist,
    "verify": cmd_verify,
}


# ---------------------------------------------------------------------------
# driver


def _write_outputs(ctx, subcommand, status, code):
    ctx.summary.update({"subcommand": subcommand, "status": status, "exit_code": code,
                        "config": os.path.basename(ctx.cfg.path) if ctx.cfg else None})
    ctx.out.mkdir(parents=True, exist_ok=True)
    (ctx.out / "summary.json").write_text(
        json.dumps(_plain(ctx.summary), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    (ctx.out / "report.txt").write_text("\n".join(ctx.lines) + "\n", encoding="utf-8")


def run(subcommand, config_path, out=None, threads=1, stream=None) -> int:
    """Run one subcommand and return its exit code."""
    stream = sys.stdout if stream is None else stream
    if subcommand not in COMMANDS:
        print(f"ConfigError: unknown subcommand {subcommand!r}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        print(f"ConfigError: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if out is None:
        out = os.environ.get(OUT_ENV)
    if out is None:
        sec = cfg.section("output", required=False)
        out = sec["directory"] if sec else "out"
    ctx = Context(cfg, Path(out), max(1, int(threads)))
    code, status = EXIT_OK, "ok"
    with threadpool_limits(limits=1), warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            COMMANDS[subcommand](ctx)
            if ctx.failed:
                code, status = EXIT_FAIL, "fail"
        except (ConfigError, InputError) as exc:
            code, status = EXIT_CONFIG, "config-error"
            ctx.summary["error"] = {"type": type(exc).__name__, "message": str(exc)}
        except AdmissibilityError as exc:
            code, status = EXIT_FAIL, "fail"
            ctx.summary["error"] = {"type": type(exc).__name__, "message": str(exc)}
        except KillingGraphError as exc:
            code, status = EXIT_NUMERICAL, "numerical-error"
            ctx.summary["error"] = {"type": type(exc).__name__, "message": str(exc)}
    if "error" in ctx.summary:
        err = ctx.summary["error"]
        ctx.lines.append(f"ERROR {err['type']}: {err['message']}")
        print(f"{err['type']}: {err['message']}", file=sys.stderr)
    _write_outputs(ctx, subcommand, status, code)
    for line in ctx.lines:
        print(line, file=stream)
    return code


def build_parser():
    p = argparse.ArgumentParser(prog="killing-graphs",
                                description="Killing graphs of prescribed mean curvature")
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", required=True, help="TOML run configuration")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--threads", type=int, default=1, help="worker threads")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return run(args.subcommand, args.config, args.out, args.threads)


if __name__ == "__main__":
    sys.exit(main())
