"""Rotationally symmetric model geometry.

Radial profiles with two derivative channels, the Jacobi field integrator,
Killing-cylinder curvatures and checks of the seven curvature-corridor
assumptions on the bounds a and b.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicHermiteSpline, PchipInterpolator

from .errors import (
    DomainError,
    InputError,
    JacobiRangeError,
    PoleSingularityError,
    ProfileEvaluationError,
)

FAMILIES = (
    "constant",
    "power",
    "exponential",
    "cosh",
    "sinh",
    "power-log",
    "sinh-power",
    "tabulated",
    "blend",
    "custom",
)

_ANALYTIC_ARITY = {
    "constant": (1, 1),
    "power": (2, 3),
    "exponential": (2, 3),
    "cosh": (2, 2),
    "sinh": (2, 2),
    "power-log": (3, 3),
    "sinh-power": (3, 3),
}

# Overflow guard for the Jacobi integrator.
_F_LIMIT = 1e300


def _smoothstep(x):
    """C^3 step on [0, 1] with its first two derivatives."""
    x = np.clip(x, 0.0, 1.0)
    s = x**4 * (35 - 84 * x + 70 * x**2 - 20 * x**3)
    ds = 140 * x**3 * (1 - x) ** 3
    d2s = 420 * x**2 * (1 - x) ** 2 * (1 - 2 * x)
    return s, ds, d2s


@dataclass(frozen=True, eq=False)
class RadialFunction:
    """A scalar function of the geodesic radius with value, d1 and d2.

    Analytic families take their coefficients from ``params``:

    ========== ================ ===============================
    family     params           value
    ========== ================ ===============================
    constant   (c,)             c
    power      (c, p[, s])      c (r + s)^p
    exponential (c, k[, p])     c r^p e^{k r}
    cosh       (c, k)           c cosh(k r)
    sinh       (c, k)           c sinh(k r)
    power-log  (c, p, q)        c r^p (log r)^q
    sinh-power (c, k, a)        c sinh(k r)^a
    ========== ================ ===============================

    ``tabulated`` profiles are built with :meth:`tabulated`, ``blend`` with
    :meth:`blend` and ``custom`` with :meth:`from_callables`.
    """

    family: str
    params: tuple = ()
    domain: tuple = (0.0, math.inf)
    _impl: Optional[tuple] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InputError(f"unknown radial family {self.family!r}")
        object.__setattr__(self, "params", tuple(self.params))
        lo, hi = (float(v) for v in self.domain)
        if not lo < hi:
            raise InputError(f"empty domain {self.domain!r}")
        object.__setattr__(self, "domain", (lo, hi))
        if self.family in _ANALYTIC_ARITY:
            lo_n, hi_n = _ANALYTIC_ARITY[self.family]
            if not lo_n <= len(self.params) <= hi_n:
                raise InputError(
                    f"family {self.family!r} takes {lo_n}..{hi_n} parameters, "
                    f"got {len(self.params)}"
                )
            object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        elif self._impl is None:
            raise InputError(f"family {self.family!r} needs a dedicated constructor")

    # constructors -------------------------------------------------------

    @classmethod
    def constant(cls, c):
        return cls("constant", (c,))

    @classmethod
    def tabulated(cls, r, values, d1=None, d2=None):
        """Interpolate tabulated samples.

        With derivative samples the value (and d1) channels use cubic Hermite
        interpolation on the supplied derivatives; without them a monotone
        piecewise cubic is fitted and differentiated.
        """
        r = np.asarray(r, dtype=float)
        values = np.asarray(values, dtype=float)
        if r.ndim != 1 or r.size < 2 or np.any(np.diff(r) <= 0):
            raise InputError("tabulated radii must be strictly increasing")
        if values.shape != r.shape:
            raise InputError("tabulated values must match the radii")
        if d1 is None:
            f0 = PchipInterpolator(r, values, extrapolate=False)
            f1, f2 = f0.derivative(1), f0.derivative(2)
        else:
            d1 = np.asarray(d1, dtype=float)
            f0 = CubicHermiteSpline(r, values, d1, extrapolate=False)
            if d2 is None:
                f1 = f0.derivative(1)
                f2 = f0.derivative(2)
            else:
                d2 = np.asarray(d2, dtype=float)
                f1 = CubicHermiteSpline(r, d1, d2, extrapolate=False)
                f2 = PchipInterpolator(r, d2, extrapolate=False)
        table = (r.copy(), values.copy())
        return cls(
            "tabulated",
            (),
            (r[0], r[-1]),
            _impl=("tabulated", f0, f1, f2, table),
        )

    @classmethod
    def from_callables(cls, value, d1, d2, domain=(0.0, math.inf), label="custom"):
        """Wrap three vectorised callables as a profile."""
        return cls("custom", (label,), domain, _impl=("custom", value, d1, d2))

    @classmethod
    def blend(cls, inner, outer, t0, t1):
        """Equal to ``inner`` below ``t0``, ``outer`` above ``t1``.

        The transition uses a C^3 polynomial step, so d1 and d2 stay
        continuous. ``outer`` is never evaluated below ``t0``.
        """
        t0, t1 = float(t0), float(t1)
        if not 0 <= t0 < t1:
            raise InputError("blend needs 0 <= t0 < t1")
        domain = (max(inner.domain[0], 0.0), min(inner.domain[1], outer.domain[1]))
        return cls("blend", (t0, t1), domain, _impl=("blend", inner, outer, t0, t1))

    # evaluation ---------------------------------------------------------

    def __call__(self, r):
        return self.value(r)

    def value(self, r):
        return self._eval(r, 0)

    def d1(self, r):
        return self._eval(r, 1)

    def d2(self, r):
        return self._eval(r, 2)

    def _eval(self, r, order):
        arr = np.asarray(r, dtype=float)
        lo, hi = self.domain
        slack = 1e-12 * max(1.0, abs(hi)) if math.isfinite(hi) else 0.0
        if arr.size and (np.min(arr) < lo - 1e-12 or np.max(arr) > hi + slack):
            raise DomainError(
                f"{self.family} profile evaluated outside its domain [{lo}, {hi}]"
            )
        with np.errstate(all="ignore"):
            out = self._raw(np.clip(arr, lo, hi) if self.family == "tabulated" else arr, order)
        out = np.asarray(out, dtype=float)
        if out.shape != arr.shape:
            if out.size == arr.size:
                out = out.reshape(arr.shape)
            else:
                out = np.broadcast_to(out, arr.shape).copy()
        return float(out) if out.ndim == 0 else out

    def _raw(self, r, order):
        fam = self.family
        p = self.params
        if fam == "constant":
            return np.full_like(r, p[0]) if order == 0 else np.zeros_like(r)
        if fam == "power":
            c, e = p[0], p[1]
            s = p[2] if len(p) > 2 else 0.0
            x = r + s
            if order == 0:
                return c * x**e
            if order == 1:
                return np.zeros_like(r) if e == 0 else c * e * x ** (e - 1)
            return np.zeros_like(r) if e * (e - 1) == 0 else c * e * (e - 1) * x ** (e - 2)
        if fam == "exponential":
            c, k = p[0], p[1]
            e = p[2] if len(p) > 2 else 0.0
            base = c * np.exp(k * r) * (r**e if e != 0 else 1.0)
            if order == 0:
                return base
            if e == 0:
                return k**order * base
            g = e / r + k
            if order == 1:
                return g * base
            return (g * g - e / r**2) * base
        if fam in ("cosh", "sinh"):
            c, k = p
            even = np.cosh(k * r)
            odd = np.sinh(k * r)
            if fam == "cosh":
                seq = (even, odd, even)
            else:
                seq = (odd, even, odd)
            return c * k**order * seq[order]
        if fam == "power-log":
            c, e, q = p
            lg = np.log(r)
            if order == 0:
                return c * r**e * lg**q
            if order == 1:
                return c * r ** (e - 1) * lg ** (q - 1) * (e * lg + q)
            return c * r ** (e - 2) * lg ** (q - 2) * (
                (e - 1) * lg * (e * lg + q) + (q - 1) * (e * lg + q) + e * lg
            )
        if fam == "sinh-power":
            c, k, a = p
            sh, ch = np.sinh(k * r), np.cosh(k * r)
            with np.errstate(divide="ignore", invalid="ignore"):
                if order == 0:
                    return c * sh**a
                if order == 1:
                    return c * a * k * sh ** (a - 1) * ch
                return c * a * k * k * ((a - 1) * sh ** (a - 2) * ch * ch + sh**a)
        kind = self._impl[0]
        if kind == "tabulated":
            return self._impl[1 + order](r)
        if kind == "custom":
            return self._impl[1 + order](r)
        if kind == "blend":
            _, inner, outer, t0, t1 = self._impl
            return _blend_eval(inner, outer, t0, t1, r, order)
        raise AssertionError(fam)

    @property
    def table(self):
        """(radii, values) of a tabulated profile."""
        if self.family != "tabulated":
            raise InputError("only tabulated profiles carry a table")
        return self._impl[4]


def _blend_eval(inner, outer, t0, t1, r, order):
    r = np.atleast_1d(np.asarray(r, dtype=float))
    out = np.empty_like(r)
    lo = r <= t0
    hi = r >= t1
    mid = ~(lo | hi)
    if lo.any():
        out[lo] = inner._eval(r[lo], order)
    if hi.any():
        out[hi] = outer._eval(r[hi], order)
    if mid.any():
        x = r[mid]
        width = t1 - t0
        s, ds, d2s = _smoothstep((x - t0) / width)
        ds = ds / width
        d2s = d2s / width**2
        gi = [inner._eval(x, k) for k in range(order + 1)]
        go = [outer._eval(x, k) for k in range(order + 1)]
        diff = [b - a for a, b in zip(gi, go)]
        if order == 0:
            val = gi[0] + s * diff[0]
        elif order == 1:
            val = gi[1] + s * diff[1] + ds * diff[0]
        else:
            val = gi[2] + s * diff[2] + 2 * ds * diff[1] + d2s * diff[0]
        out[mid] = val
    return out


def euclidean_xi():
    return RadialFunction("power", (1.0, 1.0))


# ---------------------------------------------------------------------------
# Jacobi fields


def integrate_jacobi(kappa: RadialFunction, r_max: float, step: float = 1e-3):
    """Solve f'' = kappa^2 f with f(0) = 0, f'(0) = 1 by classical RK4.

    The step is shrunk so that it divides ``r_max``. The result is a tabulated
    profile whose d1 channel is the integrated f' and whose d2 channel is
    kappa^2 f.
    """
    if step <= 0 or r_max <= 0:
        raise InputError("step and r_max must be positive")
    nsteps = max(1, int(math.ceil(r_max / step - 1e-9)))
    h = r_max / nsteps
    grid = np.linspace(0.0, r_max, nsteps + 1)
    mid = grid[:-1] + 0.5 * h
    k_full = np.asarray(kappa.value(grid), dtype=float)
    k_mid = np.asarray(kappa.value(mid), dtype=float)
    for name, arr, rr in (("grid", k_full, grid), ("midpoint", k_mid, mid)):
        bad = ~np.isfinite(arr)
        if bad.any():
            raise ProfileEvaluationError(
                f"curvature profile is not finite at r = {rr[np.argmax(bad)]!r}"
            )
        if np.any(arr < 0):
            raise InputError("curvature profile must be non-negative")
    q_full = (k_full**2).tolist()
    q_mid = (k_mid**2).tolist()

    f = np.empty(nsteps + 1)
    df = np.empty(nsteps + 1)
    y, z = 0.0, 1.0
    f[0], df[0] = y, z
    half = 0.5 * h
    for i in range(nsteps):
        qa, qm, qb = q_full[i], q_mid[i], q_full[i + 1]
        k1y, k1z = z, qa * y
        y2, z2 = y + half * k1y, z + half * k1z
        k2y, k2z = z2, qm * y2
        y3, z3 = y + half * k2y, z + half * k2z
        k3y, k3z = z3, qm * y3
        y4, z4 = y + h * k3y, z + h * k3z
        k4y, k4z = z4, qb * y4
        y += h / 6.0 * (k1y + 2 * k2y + 2 * k3y + k4y)
        z += h / 6.0 * (k1z + 2 * k2z + 2 * k3z + k4z)
        if not (abs(y) < _F_LIMIT and abs(z) < _F_LIMIT):
            raise JacobiRangeError(grid[i + 1])
        f[i + 1], df[i + 1] = y, z
    return RadialFunction.tabulated(grid, f, df, np.asarray(q_full) * f)


# ---------------------------------------------------------------------------
# curvature corridor and model geometry


@dataclass(frozen=True, eq=False)
class CurvatureProfile:
    """Curvature corridor -b^2 <= K <= -a^2 with its constants.

    ``T0 = 0`` makes the flat-core requirement vacuous, which is how
    profiles with a constant nonzero ``a`` are expressed.
    """

    a: RadialFunction
    b: RadialFunction
    T0: float
    C1: float
    C2: float
    C3: float
    C4: float
    Q: float
    T1: float
    check_radius: Optional[float] = None

    def __post_init__(self):
        for name in ("C1", "C2", "C3", "C4"):
            if not getattr(self, name) > 0:
                raise InputError(f"{name} must be positive")
        if not 0 < self.Q < 1:
            raise InputError("Q must lie in (0, 1)")
        if not 0 <= self.T0 <= self.T1:
            raise InputError("need 0 <= T0 <= T1")
        hi = self.check_radius
        if hi is None:
            hi = 4.0 * max(self.T1, 1.0)
        hi = min(hi, self.a.domain[1], self.b.domain[1])
        t = np.linspace(0.0, hi, 801)
        a, b = self.a(t), self.b(t)
        bad = np.flatnonzero(a > b * (1 + 1e-12) + 1e-300)
        if bad.size:
            raise InputError(f"a exceeds b at t = {t[bad[0]]!r}")
        if self.T0 > 0:
            core = np.linspace(0.0, self.T0, 201)
            ac, bc = self.a(core), self.b(core)
            if np.max(np.abs(ac)) > 1e-12:
                raise InputError("a must vanish on [0, T0]")
            if np.ptp(bc) > 1e-12 * max(1.0, abs(bc[0])):
                raise InputError("b must be constant on [0, T0]")

    @property
    def phi_exp(self):
        return 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * self.C1**2))


@dataclass(frozen=True, eq=False)
class ModelGeometry:
    """Model base ``dr^2 + xi^2 dtheta^2`` of dimension ``n`` warped by ``rho``.

    ``xi`` plays the role of f_a throughout.
    """

    n: int
    xi: RadialFunction
    rho: RadialFunction
    rho_plus: RadialFunction
    profile: Optional[CurvatureProfile] = None
    r_max: float = 20.0
    n_check: int = 2001

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise InputError("base dimension must be an integer >= 2")
        hi = min(self.r_max, self.xi.domain[1], self.rho.domain[1], self.rho_plus.domain[1])
        if hi <= 0:
            raise InputError("r_max must be positive")
        object.__setattr__(self, "r_max", float(hi))
        r = np.linspace(0.0, hi, self.n_check)
        xi0, dxi0 = self.xi(0.0), self.xi.d1(0.0)
        if abs(xi0) > 1e-12 or abs(dxi0 - 1.0) > 1e-8:
            raise InputError("xi must satisfy xi(0) = 0 and xi'(0) = 1")
        if np.any(self.xi(r[1:]) <= 0):
            raise InputError("xi must be positive away from the pole")
        rho, rhop = self.rho(r), self.rho_plus(r)
        if np.any(~np.isfinite(rho)) or np.any(rho <= 0):
            raise InputError("rho must be positive and finite")
        if np.any(~np.isfinite(rhop)) or np.any(rhop <= 0):
            raise InputError("rho_plus must be positive and finite")
        drp = self.rho_plus.d1(r)
        if np.any(drp < -1e-12 * rhop):
            raise InputError("rho_plus must be non-decreasing")
        if abs(rhop[0] - rho[0]) > 1e-12 * rho[0]:
            raise InputError("rho_plus(0) must equal rho(0)")
        lhs = self.rho.d1(r) / rho
        rhs = drp / rhop
        bad = np.flatnonzero(lhs < rhs - 1e-10 * (1.0 + np.abs(rhs)))
        if bad.size:
            raise InputError(
                f"comparison condition rho'/rho >= rho_plus'/rho_plus fails at r = {r[bad[0]]!r}"
            )

    @property
    def f_a(self):
        return self.xi

    def dlog_rho(self, r):
        return self.rho.d1(r) / self.rho(r)

    def dlog_rho_plus(self, r):
        return self.rho_plus.d1(r) / self.rho_plus(r)

    def dlog_xi(self, r):
        return self.xi.d1(r) / self.xi(r)


def hyperbolic_model(n=2, r_max=20.0, profile=None):
    """Hyperbolic space as a model, warped by rho = rho_plus = cosh."""
    return ModelGeometry(
        n,
        RadialFunction("sinh", (1.0, 1.0)),
        RadialFunction("cosh", (1.0, 1.0)),
        RadialFunction("cosh", (1.0, 1.0)),
        profile,
        r_max,
    )


def euclidean_model(n=2, r_max=20.0):
    one = RadialFunction.constant(1.0)
    return ModelGeometry(n, euclidean_xi(), one, one, None, r_max)


def cylinder_mean_curvature(geom: ModelGeometry, r):
    """Mean curvature ((n-1) xi'/xi + rho'/rho)/n of the Killing cylinder."""
    arr = np.asarray(r, dtype=float)
    if np.any(arr <= 0):
        raise PoleSingularityError("the Killing cylinder degenerates at r = 0")
    n = geom.n
    out = ((n - 1) * geom.dlog_xi(arr) + geom.dlog_rho(arr)) / n
    return float(out) if np.ndim(out) == 0 else out


def cylinder_principal_curvature(geom: ModelGeometry, r):
    """Principal curvature kappa of the Killing cylinder at radius r.

    Defined by <grad log rho, grad d> = -kappa with d the distance to the
    sphere measured inward, so kappa = rho'(r)/rho(r).
    """
    return geom.dlog_rho(r)


# ---------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    witness: Optional[float] = None
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    results: tuple

    @property
    def passed(self):
        return all(r.passed for r in self.results)

    def __getitem__(self, name):
        for r in self.results:
            if r.name == name:
                return r
        raise KeyError(name)

    def failures(self):
        return [r for r in self.results if not r.passed]


@dataclass(frozen=True)
class BoundReport:
    """Margin report for an inequality of the form RHS - n|H| > 0."""

    name: str
    passed: bool
    margin: float
    witness: Optional[tuple] = None
    samples: int = 0
    extra: dict = field(default_factory=dict)


def decays_to_zero(values, threshold=1e-3):
    """Heuristic limit test: non-increasing samples ending below ``threshold``."""
    v = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(v)):
        return False
    steps = np.diff(v)
    monotone = np.all(steps <= 1e-12 * np.maximum(1.0, np.abs(v[:-1])))
    return bool(monotone and v[-1] < threshold)


def _last_decade(t_end, count=10):
    return np.geomspace(t_end / 10.0, t_end, count)


def _monotone_kind(values):
    d = np.diff(values)
    scale = 1e-13 * np.maximum(1.0, np.abs(values[:-1]))
    if np.all(d <= scale):
        return "decreasing" if np.any(d < -scale) else "constant"
    if np.all(d >= -scale):
        return "increasing"
    return None


def validate_assumptions(profile: CurvatureProfile, sample_grid: Sequence[float],
                         jacobi_step: float = 1e-3):
    """Check the curvature-corridor assumptions for ``profile`` on ``sample_grid``.

    ===================== =====================================================
    a_tracks_b            beyond T1: a = C1/t if b decreases, a >= C1/t if not
    a_bounded             a <= C2
    b_unit_step           b(t+1) <= C2 b(t)
    b_halving             b(t/2) <= C2 b(t)
    b_polynomial_floor    b >= C3 (1+t)^-Q
    b_slope_decay         |b'|/b^2 -> 0
    b_beats_jacobi_growth t^(1+C4) b / f_a' -> 0
    ===================== =====================================================

    The two limit conditions use :func:`decays_to_zero` on ten log-spaced
    radii covering the last decade of the grid.
    """
    t = np.asarray(sample_grid, dtype=float)
    if t.ndim != 1 or t.size < 2 or np.any(np.diff(t) <= 0):
        raise InputError("sample grid must be strictly increasing")
    a, b = profile.a, profile.b
    C1, C2, C3, C4, Q, T1 = (profile.C1, profile.C2, profile.C3, profile.C4,
                             profile.Q, profile.T1)
    t_end = t[-1]
    results = []

    def first(mask, where):
        idx = np.flatnonzero(mask)
        return None if idx.size == 0 else float(where[idx[0]])

    tail = t[t >= T1]
    tail = tail[tail > 0]
    if tail.size < 2:
        results.append(CheckResult("a_tracks_b", False, None, "no samples beyond T1"))
    else:
        bt = b(tail)
        at = a(tail)
        kind = _monotone_kind(bt)
        ref = C1 / tail
        if kind is None:
            d = np.diff(bt)
            flips = np.flatnonzero(np.sign(d[1:]) * np.sign(d[:-1]) < 0)
            w = float(tail[flips[0] + 1]) if flips.size else float(tail[0])
            results.append(CheckResult("a_tracks_b", False, w, "b is not monotone beyond T1"))
        elif kind == "decreasing":
            w = first(np.abs(at - ref) > 1e-8 * ref, tail)
            results.append(CheckResult("a_tracks_b", w is None, w, "b decreasing: a = C1/t"))
        else:
            w = first(at < ref * (1 - 1e-12), tail)
            results.append(CheckResult("a_tracks_b", w is None, w, "b non-decreasing: a >= C1/t"))

    w = first(a(t) > C2 * (1 + 1e-12), t)
    results.append(CheckResult("a_bounded", w is None, w, "a <= C2"))

    ts = t[t + 1 <= t_end + 1e-12]
    w = first(b(ts + 1) > C2 * b(ts) * (1 + 1e-12), ts) if ts.size else None
    results.append(CheckResult("b_unit_step", w is None, w, "b(t+1) <= C2 b(t)"))

    w = first(b(t / 2) > C2 * b(t) * (1 + 1e-12), t)
    results.append(CheckResult("b_halving", w is None, w, "b(t/2) <= C2 b(t)"))

    w = first(b(t) < C3 * (1 + t) ** (-Q) * (1 - 1e-12), t)
    results.append(CheckResult("b_polynomial_floor", w is None, w, "b >= C3 (1+t)^-Q"))

    dec = _last_decade(t_end)
    ratio6 = np.abs(b.d1(dec)) / b(dec) ** 2
    ok6 = decays_to_zero(ratio6)
    results.append(CheckResult("b_slope_decay", ok6, None if ok6 else float(dec[-1]),
                               f"|b'|/b^2 at t_end = {ratio6[-1]!r}"))

    try:
        fa = integrate_jacobi(a, t_end, jacobi_step)
        ratio7 = dec ** (1 + C4) * b(dec) / fa.d1(dec)
        ok7 = decays_to_zero(ratio7)
        msg = f"t^(1+C4) b/f_a' at t_end = {ratio7[-1]!r}"
    except JacobiRangeError as exc:
        ok7, msg = False, str(exc)
    results.append(CheckResult("b_beats_jacobi_growth", ok7, None if ok7 else float(dec[-1]), msg))
    return ValidationReport(tuple(results))


def check_local_H_bound(geom: ModelGeometry, H, R: float, samples: int = 2000):
    """Margin of (n-1) f_a'/f_a + rho_plus'/rho_plus - n|H| on B(o, R).

    The pole is excluded: the left side tends to +infinity there.
    """
    from .grid import sample_on_ball

    r, _, hv = sample_on_ball(H, R, samples)
    keep = r > 0
    r, hv = r[keep], hv[keep]
    n = geom.n
    rhs = (n - 1) * geom.dlog_xi(r) + geom.dlog_rho_plus(r)
    margin = rhs - n * np.abs(hv)
    k = int(np.argmin(margin))
    return BoundReport(
        "local_H_bound",
        bool(margin[k] > 0),
        float(margin[k]),
        (float(r[k]),),
        int(r.size),
    )
