"""Barriers: the V barrier, the direction function h and psi, and the
finite-ball height barrier, plus discrete verification of Q[w] - nH < 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .errors import AdmissibilityError, InputError, IntegrabilityError
from .geometry import (
    BoundReport,
    CurvatureProfile,
    ModelGeometry,
    RadialFunction,
    cylinder_mean_curvature,
    cylinder_principal_curvature,
    decays_to_zero,
)
from .grid import DiscreteField, PolarGrid, sample_on_ball
from .quadrature import cumulative, doubling_block_ratios, laplace_tail, uniform_grid

HEIGHT_HEADROOM = 1.05
HEIGHT_FLOOR = 1e-6


# ---------------------------------------------------------------------------
# V barrier


@dataclass(frozen=True, eq=False)
class _VTables:
    r: np.ndarray
    A: np.ndarray        # int_0^r a0 f^(n-1)
    GA: np.ndarray       # A / (rho_plus^2 f^(n-1)) = -V'
    D_partial: np.ndarray
    zero: bool


def _v_tables(geom, a0, R_trunc, step):
    n = geom.n
    r = uniform_grid(R_trunc, step)
    f = geom.xi(r)
    a0v = a0(r)
    if np.any(a0v < 0):
        raise InputError("a0 must be non-negative")
    A = cumulative(a0v * f ** (n - 1), r)
    GA = np.zeros_like(r)
    GA[1:] = A[1:] / (geom.rho_plus(r[1:]) ** 2 * f[1:] ** (n - 1))
    zero = bool(np.all(a0v == 0))
    return _VTables(r, A, GA, -cumulative(GA, r), zero)


def _ga_tail(geom, a0, t, A_t):
    """Asymptotic tail of A/(rho_plus^2 f^(n-1)) beyond t."""
    n = geom.n
    f, df, d2f = geom.xi(t), geom.xi.d1(t), geom.xi.d2(t)
    rp, drp, d2rp = geom.rho_plus(t), geom.rho_plus.d1(t), geom.rho_plus.d2(t)
    a, da = a0(t), a0.d1(t)
    s = a * f ** (n - 1) / A_t
    ds = (da * f ** (n - 1) + (n - 1) * a * f ** (n - 2) * df) / A_t - s**2
    lr, lf = drp / rp, df / f
    dlr = d2rp / rp - lr**2
    dlf = d2f / f - lf**2
    dlog = s - 2 * lr - (n - 1) * lf
    d2log = ds - 2 * dlr - (n - 1) * dlf
    g = A_t / (rp**2 * f ** (n - 1))
    return laplace_tail(g, dlog, d2log)


def _d_estimates(geom, a0, tab, spacing):
    """D estimates (partial integral minus asymptotic tail) at checkpoints."""
    r = tab.r
    h = r[1] - r[0]
    stride = max(1, int(round(spacing / h)))
    idx = np.arange(stride, r.size, stride)
    idx = idx[r[idx] >= 1.0]
    out = []
    for i in idx:
        tail = _ga_tail(geom, a0, r[i], tab.A[i])
        out.append((float(r[i]), float(tab.D_partial[i] - tail)))
    return out


def compute_D(geom: ModelGeometry, a0: RadialFunction, tol: float = 1e-6,
              R_trunc: float = 15.0, step: float = 1e-3, spacing: float = 0.5,
              max_block_ratio: float = 0.95):
    """The limit constant D of the V barrier.

    The bracketed expression equals -int_0^r A/(rho_plus^2 f^(n-1)) after
    one integration by parts. It is evaluated at radii ``spacing`` apart,
    corrected by the asymptotic tail, until three successive values agree
    to ``tol`` and the contraction of their differences puts the remaining
    drift below ``tol`` as well.
    """
    tab = _v_tables(geom, a0, R_trunc, step)
    if tab.zero:
        return 0.0
    ga = CubicHermiteSpline(tab.r, tab.GA, np.gradient(tab.GA, tab.r))
    ratios, blocks = doubling_block_ratios(lambda x: ga(x), R_trunc)
    if not np.all(np.isfinite(ratios)) or np.any(ratios > max_block_ratio):
        raise IntegrabilityError(
            f"a0 double integral not Cauchy by r = {R_trunc!r}", blocks)
    est = _d_estimates(geom, a0, tab, spacing)
    vals = [v for _, v in est]
    for k in range(2, len(vals)):
        d1, d2 = vals[k - 1] - vals[k - 2], vals[k] - vals[k - 1]
        # remaining error from the contraction of successive differences:
        # small for geometric convergence, large for slow algebraic drift
        q = abs(d2 / d1) if d1 != 0 else (0.0 if d2 == 0 else math.inf)
        rest = abs(d2) * q / (1 - q) if q < 1 else math.inf
        if abs(d1) < tol and abs(d2) < tol and rest < tol:
            D = vals[k]
            if D > tol:
                raise IntegrabilityError("D came out positive", vals[: k + 1])
            return D
    raise IntegrabilityError(
        f"D estimates did not settle to {tol!r} by r = {R_trunc!r}", vals)


@dataclass(frozen=True, eq=False)
class VBarrier:
    geom: ModelGeometry
    a0: RadialFunction
    D: float
    phi_sup: float
    R_trunc: float
    r: np.ndarray
    V: np.ndarray
    dV: np.ndarray
    tail: float

    def _spline(self):
        return CubicHermiteSpline(self.r, self.V, self.dV)

    def __call__(self, r):
        return self._spline()(r)

    def d1(self, r):
        return CubicHermiteSpline(self.r, self.dV, self.d2(self.r))(r)

    def d2(self, r):
        g = self.geom
        n = g.n
        r = np.asarray(r, dtype=float)
        out = np.empty_like(r)
        pos = r > 0
        rr = r[pos]
        f = g.xi(rr)
        rp = g.rho_plus(rr)
        GA = -np.interp(rr, self.r, self.dV)
        out[pos] = GA * ((n - 1) * g.dlog_xi(rr) + 2 * g.dlog_rho_plus(rr)) \
            - self.a0(rr) / rp**2
        # at the pole V'' = -a0(0)/(n rho_plus(0)^2)
        out[~pos] = -self.a0(0.0) / (n * g.rho_plus(0.0) ** 2)
        return out

    def as_profile(self):
        return RadialFunction.tabulated(self.r, self.V, self.dV, self.d2(self.r))


def build_V(geom: ModelGeometry, a0: RadialFunction, phi_sup: float = 1.0,
            R_trunc: float = 15.0, tol: float = 1e-6, step: float = 1e-3):
    """V(r) = phi_sup + D(r) - D with D(r) = -int_0^r A/(rho_plus^2 f^(n-1)).

    D is certified by :func:`compute_D` and then taken from the most
    converged estimate, at ``R_trunc``.
    """
    compute_D(geom, a0, tol, R_trunc, step)
    tab = _v_tables(geom, a0, R_trunc, step)
    if tab.zero:
        return VBarrier(geom, a0, 0.0, float(phi_sup), float(R_trunc), tab.r,
                        np.full_like(tab.r, float(phi_sup)), np.zeros_like(tab.r), 0.0)
    tail = _ga_tail(geom, a0, R_trunc, tab.A[-1])
    D = float(tab.D_partial[-1] - tail)
    V = phi_sup + tab.D_partial - D
    return VBarrier(geom, a0, D, float(phi_sup), float(R_trunc), tab.r, V, -tab.GA,
                    float(tail))


def check_HV_bound(geom: ModelGeometry, H, V: VBarrier, R: Optional[float] = None,
                   samples: int = 2000):
    """Margin of the V-barrier admissibility bound.

    RHS = (rho^-2 rho_plus^-2 a0 + (-V')^3 ((n-1) f'/f + rho_plus'/rho_plus))
          / (rho^-2 + V'^2)^(3/2)

    ``extra`` holds RHS over its asymptotic form (n-1) f'/f + rho_plus'/rho_plus
    on the outer decade of the barrier table.
    """
    R = V.R_trunc if R is None else min(R, V.R_trunc)
    r, _, hv = sample_on_ball(H, R, samples)
    rhs = hv_rhs(geom, V, r)
    margin = rhs - geom.n * np.abs(hv)
    k = int(np.argmin(margin))
    dec = np.geomspace(V.R_trunc / 10, V.R_trunc, 10)
    asym = (geom.n - 1) * geom.dlog_xi(dec) + geom.dlog_rho_plus(dec)
    ratio = hv_rhs(geom, V, dec) / asym
    extra = {
        "asymptotic_ratio": ratio.tolist(),
        "asymptotic_attained": bool(abs(ratio[-1] - 1) < 1e-3),
        "asymptotic_H_limit": float(asym[-1] / geom.n),
    }
    return BoundReport("HV_bound", bool(margin[k] > 0), float(margin[k]),
                       (float(r[k]),), int(r.size), extra)


def hv_rhs(geom, V, r):
    r = np.asarray(r, dtype=float)
    n = geom.n
    dV = np.interp(r, V.r, V.dV)
    irho2 = geom.rho(r) ** -2.0
    rp = geom.rho_plus(r)
    top = irho2 * V.a0(r) / rp**2 + (-dV) ** 3 * (
        (n - 1) * geom.dlog_xi(r) + geom.dlog_rho_plus(r))
    return top / (irho2 + dV**2) ** 1.5


# ---------------------------------------------------------------------------
# direction function h and the psi barrier


def _bump(s):
    """1 on [0, 1], 0 beyond 2, C^3 in between."""
    x = np.clip(s - 1.0, 0.0, 1.0)
    return 1.0 - x**4 * (35 - 84 * x + 70 * x**2 - 20 * x**3)


def angle_to(theta, v0):
    return np.abs((np.asarray(theta) - v0 + math.pi) % (2 * math.pi) - math.pi)


def crude_h(r, theta, v0, L):
    return np.minimum(1.0, np.maximum(2.0 - 2.0 * r, L * angle_to(theta, v0)))


def mollify(grid: PolarGrid, values, boundary, b: RadialFunction, xi: RadialFunction):
    """Normalised local average of a node field plus its boundary ring.

    The weight of node y seen from node x is bump(b(r_x) d(x, y)) times the
    area element, with d measured in the local chart
    ``dr^2 + xi(rbar)^2 dtheta^2``; the support radius is 2/b(r_x). Rows whose
    kernel radius is below the grid spacing keep their input values.
    Returns (smoothed rows, unsmoothed row mask, kernel radii); the last row
    is the ring r = R.
    """
    M = grid.Ntheta
    dt, dr = grid.dtheta, grid.dr
    rows_r = np.concatenate([grid.r, [grid.R]])
    data = np.vstack([np.asarray(values, dtype=float).reshape(grid.shape),
                      np.asarray(boundary, dtype=float).reshape(1, M)])
    xir = xi(rows_r)
    weight_r = xir * dr
    weight_r[-1] *= 0.5
    radius = 2.0 / b(rows_r)
    unsmoothed = radius < np.maximum(dr, xir * dt)
    offs = np.arange(M)
    offs = np.where(offs > M // 2, offs - M, offs) * dt
    data_hat = np.fft.rfft(data, axis=1)
    ones_hat = np.fft.rfft(np.ones_like(data), axis=1)
    out = data.copy()
    for i in np.flatnonzero(~unsmoothed):
        src = np.flatnonzero(np.abs(rows_r - rows_r[i]) < radius[i])
        rbar = 0.5 * (rows_r[src] + rows_r[i])
        d = np.sqrt((rows_r[src] - rows_r[i])[:, None] ** 2
                    + (xi(rbar)[:, None] * offs[None, :]) ** 2)
        w = _bump(d / (0.5 * radius[i])) * weight_r[src, None]
        w_hat = np.fft.rfft(w, axis=1)
        num = np.fft.irfft((w_hat * data_hat[src]).sum(axis=0), n=M)
        den = np.fft.irfft((w_hat * ones_hat[src]).sum(axis=0), n=M)
        out[i] = num / den
    return out, unsmoothed, radius


def build_h(grid: PolarGrid, v0: float, L: float, profile: CurvatureProfile,
            geom: Optional[ModelGeometry] = None) -> DiscreteField:
    """Smoothed direction function on ``grid`` with its boundary ring.

    The crude extension min(1, max(2 - 2r, L angle(v0, theta))) is passed
    through :func:`mollify` and clamped to [0, 1]. Without ``geom`` the chart
    is Euclidean (xi = r). ``meta['unsmoothed']`` flags rows left crude.
    """
    if not L > 8 / math.pi:
        raise InputError("L must exceed 8/pi")
    xi = geom.xi if geom is not None else RadialFunction("power", (1.0, 1.0))
    rows_r = np.concatenate([grid.r, [grid.R]])
    crude = crude_h(rows_r[:, None], grid.theta[None, :], v0, L)
    out, unsmoothed, radius = mollify(grid, crude[:-1], crude[-1], profile.b, xi)
    out = np.clip(out, 0.0, 1.0)
    fld = DiscreteField(grid, out[:-1], out[-1])
    fld.meta["crude"] = crude
    fld.meta["unsmoothed"] = unsmoothed
    fld.meta["kernel_radius"] = radius
    return fld


def psi_exponents(profile: CurvatureProfile, n: int):
    """(phi_exp, delta1) for the psi barrier."""
    phi_exp = profile.phi_exp
    delta1 = min(profile.C4 / 2, (-1 + (n - 1) * phi_exp) / (1 + (n - 1) * phi_exp))
    return phi_exp, delta1


@dataclass(eq=False)
class PsiBarrier:
    A: float
    R3: float
    delta: float
    delta1: float
    phi_exp: float
    L: float
    v0: float
    h: DiscreteField

    def field(self) -> DiscreteField:
        g = self.h.grid
        rad = self.R3**self.delta * g.r ** (-self.delta)
        vals = self.A * (rad[:, None] + self.h.values)
        ring = self.A * (self.R3**self.delta * g.R ** (-self.delta) + self.h.boundary)
        return DiscreteField(g, vals, ring)

    def region(self, factor=3.0):
        """Nodes of the cone of aperture factor/L outside B(o, R3)."""
        rr, tt = self.h.grid.mesh()
        return (angle_to(tt, self.v0) < factor / self.L) & (rr > self.R3)


def build_psi(geom: ModelGeometry, grid: PolarGrid, A: float, R3: float, v0: float,
              L: float, delta: Optional[float] = None) -> PsiBarrier:
    if geom.profile is None:
        raise InputError("psi needs a curvature profile")
    phi_exp, delta1 = psi_exponents(geom.profile, geom.n)
    cap = min(delta1, phi_exp - 1)
    if delta is None:
        delta = 0.5 * cap
    if not 0 < delta < cap:
        raise InputError(f"delta must lie in (0, {cap!r})")
    h = build_h(grid, v0, L, geom.profile, geom)
    return PsiBarrier(float(A), float(R3), float(delta), float(delta1), float(phi_exp),
                      float(L), float(v0), h)


def check_psi_hypotheses(geom: ModelGeometry, H, delta: float, C0: float,
                         r_range=None, samples: int = 2000):
    """Margins of the psi mean curvature condition and the two decay ratios.

    H condition: sup n|H| < C0 t^(-delta1-1) / sqrt(rho^-2 + (C0 t^(-delta-1))^2)
                 * ((n-1) f'/f + rho'/rho - 1/t).
    Decay ratios over the outer decade: max(0, -r rho'/rho) / (r f'/f) and
    r^(delta+1) |grad rho| / (f |rho'|), each required to fall toward zero.
    """
    if geom.profile is None:
        raise InputError("psi hypotheses need a curvature profile")
    if not C0 > 1:
        raise InputError("C0 must exceed 1")
    n = geom.n
    phi_exp, delta1 = psi_exponents(geom.profile, n)
    if not 0 < delta < min(delta1, phi_exp - 1):
        raise InputError("delta must lie in (0, min(delta1, phi_exp - 1))")
    lo, hi = (1.0, geom.r_max) if r_range is None else r_range
    t = np.linspace(lo, hi, samples)
    sup_h = _sup_over_circles(H, t)
    rhs = (C0 * t ** (-delta1 - 1) / np.sqrt(geom.rho(t) ** -2.0 + (C0 * t ** (-delta - 1)) ** 2)
           * ((n - 1) * geom.dlog_xi(t) + geom.dlog_rho(t) - 1 / t))
    margin = rhs - n * sup_h
    k = int(np.argmin(margin))
    half = t >= 0.5 * (lo + hi)

    dec = np.geomspace(hi / 10, hi, 10)
    sign_ratio = np.maximum(0.0, -dec * geom.dlog_rho(dec)) / (dec * geom.dlog_xi(dec))
    drho = np.abs(geom.rho.d1(dec))
    rad_ratio = np.where(drho > 0, dec ** (delta + 1) / geom.xi(dec), 0.0)
    sign_ok = bool(np.all(sign_ratio == 0) or decays_to_zero(sign_ratio))
    rad_ok = bool(np.all(rad_ratio == 0) or decays_to_zero(rad_ratio))
    extra = {
        "delta1": delta1,
        "phi_exp": phi_exp,
        "tail_margin": float(np.min(margin[half])),
        "rho_sign_ratio": sign_ratio.tolist(),
        "rho_sign_ok": sign_ok,
        "rho_rad_ratio": rad_ratio.tolist(),
        "rho_rad_ok": rad_ok,
    }
    return BoundReport("psi_hypotheses", bool(margin[k] > 0 and sign_ok and rad_ok),
                       float(margin[k]), (float(t[k]),), int(t.size), extra)


def _sup_over_circles(H, t, n_theta=64):
    if isinstance(H, RadialFunction):
        return np.abs(H(t))
    if isinstance(H, DiscreteField):
        raise InputError("psi hypotheses need H as a function of (r, theta)")
    if callable(H):
        th = np.arange(n_theta) * (2 * math.pi / n_theta)
        vals = np.abs(np.asarray(H(t[:, None], th[None, :]), dtype=float))
        return np.broadcast_to(vals, (t.size, n_theta)).max(axis=1)
    return np.full_like(t, abs(float(H)))


# ---------------------------------------------------------------------------
# verification


@dataclass(frozen=True)
class VerificationReport:
    name: str
    passed: bool
    max_value: float
    witness: tuple
    violations: int
    nodes: int


def verify_Q_negative(geom: ModelGeometry, H, field: DiscreteField, region,
                      name: str = "Q_negative") -> VerificationReport:
    """Discrete Q[w] - nH on the region nodes; PASS iff the maximum is < 0.

    ``region`` is a boolean node mask or a predicate ``(r, theta) -> mask``.
    """
    from .solver import DirichletProblem, assemble_residual

    grid = field.grid
    if field.boundary is None:
        raise InputError("field needs its boundary ring")
    rr, tt = grid.mesh()
    mask = region(rr, tt) if callable(region) else np.asarray(region, dtype=bool)
    mask = np.broadcast_to(mask, grid.shape)
    if not mask.any():
        raise InputError("verification region is empty")
    prob = DirichletProblem(geom, H, field.boundary, grid)
    q = assemble_residual(prob, field).values
    vals = np.where(mask, q, -np.inf)
    k = int(np.argmax(vals))
    i, j = grid.node(k)
    worst = float(vals.ravel()[k])
    return VerificationReport(
        name, worst < 0, worst, (i, j, float(grid.r[i]), float(grid.theta[j])),
        int(np.count_nonzero(q[mask] >= 0)), int(mask.sum()))


def pinching_check(geom: ModelGeometry, v0: float, L: float, R3: float, eps: float,
                   phi_at_v0: float, A: float, delta: Optional[float] = None):
    """Callback for :func:`solve_exhaustion` testing
    -psi + phi(x0) - eps <= u <= psi + phi(x0) + eps on the cone 3 Omega minus B(o, R3).
    """

    def check(k, problem, sol):
        grid = sol.grid
        psi = build_psi(geom, grid, A, R3, v0, L, delta)
        pv = psi.field().values
        mask = psi.region()
        if not mask.any():
            raise InputError("pinching cone is empty on this grid")
        slack = np.minimum(pv + phi_at_v0 + eps - sol.values,
                           sol.values + pv - phi_at_v0 + eps)
        worst = np.where(mask, -slack, -np.inf)
        idx = int(np.argmax(worst))
        i, j = grid.node(idx)
        top = float(worst.ravel()[idx])
        return VerificationReport(
            f"pinching_R{grid.R:g}", top <= 0, top,
            (i, j, float(grid.r[i]), float(grid.theta[j])),
            int(np.count_nonzero(slack[mask] < 0)), int(mask.sum()))

    return check


# ---------------------------------------------------------------------------
# height barrier on a finite ball


@dataclass(frozen=True, eq=False)
class HeightBarrier:
    rho0: RadialFunction
    C: float
    k: float
    phi_sup: float
    d: np.ndarray
    h: np.ndarray

    @property
    def height_bound(self):
        """sup h = h(k); solutions obey sup|u| <= sup|phi| + height_bound."""
        return float(self.h[-1])

    def h_of(self, d):
        return np.interp(d, self.d, self.h)

    def at_radius(self, r):
        """v = phi_sup + h(k - r)."""
        return self.phi_sup + self.h_of(self.k - np.asarray(r, dtype=float))


def build_height_barrier(geom: ModelGeometry, H, k: float, rho0: RadialFunction,
                         phi_sup: float = 0.0, samples: int = 2000, step: float = 1e-3,
                         headroom: float = HEIGHT_HEADROOM, floor: float = HEIGHT_FLOOR):
    """Upper barrier phi_sup + C int_0^d 1/rho0 with d = k - r.

    C^2 exceeds max (H/H_r)^2 / (1 - (H/H_r)^2) * sup rho0^2 / inf rho^2 by
    the factor ``headroom``^2, where H_r is the cylinder mean curvature.
    """
    d = uniform_grid(k, step)
    kap = cylinder_principal_curvature(geom, k - d)
    need = -rho0.d1(d) / rho0(d)
    bad = np.flatnonzero(kap < need - 1e-12 * (1 + np.abs(need)))
    if bad.size:
        raise AdmissibilityError("cylinder curvature below -rho0'/rho0",
                                 float(k - d[bad[0]]))
    r, _, hv = sample_on_ball(H, k, samples)
    keep = r > 0
    r, hv = r[keep], hv[keep]
    Hr = cylinder_mean_curvature(geom, r)
    q2 = (hv / Hr) ** 2
    j = int(np.argmax(q2))
    if q2[j] >= 1:
        raise AdmissibilityError(f"|H| >= H_r at r = {r[j]!r}", float(r[j]))
    ratio = float(np.max(q2 / (1 - q2)))
    rr = np.linspace(0.0, k, samples)
    bound = ratio * float(np.max(rho0(d) ** 2)) / float(np.min(geom.rho(rr) ** 2))
    C = max(headroom * math.sqrt(bound), floor)
    h = C * cumulative(1.0 / rho0(d), d)
    return HeightBarrier(rho0, float(C), float(k), float(phi_sup), d, h)
