"""Rotationally symmetric graphs: flux first integral, quadrature, u_plus."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .errors import FluxAdmissibilityViolated, InputError
from .geometry import BoundReport, ModelGeometry, RadialFunction
from .grid import sample_on_ball
from .quadrature import cumulative, definite, tail_test, uniform_grid

EPS_CLEAN = 1.0 - math.sqrt(2.0) / 2.0


def as_profile(H):
    if isinstance(H, RadialFunction):
        return H
    return RadialFunction.constant(float(H))


def _flux_density(geom, Htilde, r):
    n = geom.n
    return n * Htilde(r) * geom.rho(r) * geom.xi(r) ** (n - 1)


def flux_integral(geom: ModelGeometry, Htilde, r: float, step: float = 1e-3):
    """I(r) = int_0^r n Htilde rho xi^(n-1), composite Simpson."""
    if r < 0:
        raise InputError("radius must be non-negative")
    if r == 0:
        return 0.0
    Htilde = as_profile(Htilde)
    x = uniform_grid(r, step)
    return definite(_flux_density(geom, Htilde, x), x)


@dataclass(frozen=True, eq=False)
class RadialSolution:
    r: np.ndarray
    u: np.ndarray
    du: np.ndarray
    I: np.ndarray
    denominator: np.ndarray
    geom: ModelGeometry
    Htilde: RadialFunction

    def interpolant(self):
        return CubicHermiteSpline(self.r, self.u, self.du)

    def __call__(self, r):
        return self.interpolant()(r)

    def columns(self):
        return ("r", "u", "du", "I", "denominator"), (
            self.r, self.u, self.du, self.I, self.denominator)

    def quadrature_residual(self):
        """Relative residual of du^2 (rho^2 xi^(2n-2) - I^2) = I^2 / rho^2."""
        rho = self.geom.rho(self.r)
        lhs = self.du**2 * self.denominator
        rhs = self.I**2 / rho**2
        scale = np.maximum(np.abs(rhs), 1e-300)
        out = np.where(rhs == 0, np.abs(lhs), np.abs(lhs - rhs) / scale)
        return out

    def ode_residual(self):
        """Expanded radial equation at interior nodes, central differences."""
        g = self.geom
        r = self.r
        n = g.n
        q = self.du / np.sqrt(g.rho(r) ** -2 + self.du**2)
        h = r[1] - r[0]
        rr = r[1:-1]
        dq = (q[2:] - q[:-2]) / (2 * h)
        res = dq + q[1:-1] * ((n - 1) * g.dlog_xi(rr) + g.dlog_rho(rr)) - n * self.Htilde(rr)
        return rr, res


def solve_radial(geom: ModelGeometry, Htilde, r_max: float, anchor=(0.0, 0.0),
                 step: float = 1e-3):
    """Radial graph with mean curvature ``Htilde`` on [0, r_max].

    u' = I / (rho sqrt(rho^2 xi^(2n-2) - I^2)) from the flux first integral
    and u is pinned so that u(anchor[0]) = anchor[1].
    """
    Htilde = as_profile(Htilde)
    r0, u0 = float(anchor[0]), float(anchor[1])
    if not 0 <= r0 <= r_max:
        raise InputError("anchor radius must lie in [0, r_max]")
    n = geom.n
    r = uniform_grid(r_max, step)
    I = cumulative(_flux_density(geom, Htilde, r), r)
    rho = geom.rho(r)
    xi = geom.xi(r)
    denom = rho**2 * xi ** (2 * (n - 1)) - I**2
    bad = np.flatnonzero(denom[1:] <= 0)
    if bad.size:
        raise FluxAdmissibilityViolated(r[bad[0] + 1])
    du = np.zeros_like(r)
    # at the pole the quotient is 0/0; its limit is 0
    du[1:] = I[1:] / (rho[1:] * np.sqrt(denom[1:]))
    U = cumulative(du, r)
    spline = CubicHermiteSpline(r, U, du)
    u = U - float(spline(r0)) + u0
    return RadialSolution(r, u, du, I, denom, geom, Htilde)


@dataclass(frozen=True, eq=False)
class UPlusBarrier:
    geom: ModelGeometry
    eps: float
    phi_sup: float
    r: np.ndarray
    u: np.ndarray
    du: np.ndarray
    tail: float

    def __call__(self, r):
        return CubicHermiteSpline(self.r, self.u, self.du)(r)

    def d1(self, r):
        return CubicHermiteSpline(self.r, self.u, self.du).derivative()(r)

    def as_profile(self):
        return RadialFunction.tabulated(self.r, self.u, self.du)


def _slope_factor(eps):
    return (1.0 - eps) / math.sqrt(2 * eps - eps**2)


def build_u_plus(geom: ModelGeometry, eps: float = EPS_CLEAN, phi_sup: float = 0.0,
                 r_max: float = 30.0, step: float = 1e-3, max_block_ratio=0.95):
    """Radial upper barrier phi_sup + c * int_r^inf 1/rho_plus.

    c = (1 - eps)/sqrt(2 eps - eps^2). The integral beyond ``r_max`` is
    replaced by its asymptotic tail estimate after a doubling-block Cauchy
    test on 1/rho_plus.
    """
    if not 0 < eps < 1:
        raise InputError("eps must lie in (0, 1)")
    r = uniform_grid(r_max, step)
    rho = geom.rho(r)
    rp = geom.rho_plus(r)
    drho, drp = geom.rho.d1(r), geom.rho_plus.d1(r)
    tol = 1e-10
    if np.any(drho / rho < drp / rp - tol * (1 + np.abs(drp / rp))):
        raise InputError("rho'/rho >= rho_plus'/rho_plus fails on the grid")
    if np.any(drho / rho**3 < drp / rp**3 - tol * (1 + np.abs(drp / rp**3))):
        raise InputError("rho'/rho^3 >= rho_plus'/rho_plus^3 fails on the grid")

    rplus = geom.rho_plus
    dl = float(rplus.d1(r_max) / rplus(r_max))
    d2l = float(rplus.d2(r_max) / rplus(r_max)) - dl**2
    tail = tail_test(lambda x: 1.0 / rplus(x), -dl, -d2l, r_max, max_block_ratio)

    inv = 1.0 / rp
    cum = cumulative(inv, r)
    rest = cum[-1] - cum + tail
    c = _slope_factor(eps)
    u = phi_sup + c * rest
    du = -c * inv
    return UPlusBarrier(geom, float(eps), float(phi_sup), r, u, du, c * tail)


def check_H_bound_u_plus(geom: ModelGeometry, H, eps: float = EPS_CLEAN,
                         R: float | None = None, samples: int = 2000):
    """Margin of the u_plus admissibility bound over B(o, R).

    RHS = (1-eps) sqrt(rho_plus^-2 (1 + c2) / (rho^-2 + rho_plus^-2 c2))
          * (rho_plus'/rho_plus + (n-1) f_a'/f_a),  c2 = (1-eps)^2/(2eps-eps^2)
    """
    if not 0 < eps < 1:
        raise InputError("eps must lie in (0, 1)")
    R = geom.r_max if R is None else R
    r, _, hv = sample_on_ball(H, R, samples)
    keep = r > 0
    r, hv = r[keep], hv[keep]
    n = geom.n
    c2 = (1 - eps) ** 2 / (2 * eps - eps**2)
    rp2 = geom.rho_plus(r) ** -2.0
    ratio = rp2 * (1 + c2) / (geom.rho(r) ** -2.0 + rp2 * c2)
    rhs = (1 - eps) * np.sqrt(ratio) * (geom.dlog_rho_plus(r) + (n - 1) * geom.dlog_xi(r))
    margin = rhs - n * np.abs(hv)
    k = int(np.argmin(margin))
    return BoundReport("u_plus_H_bound", bool(margin[k] > 0), float(margin[k]),
                       (float(r[k]),), int(r.size))
