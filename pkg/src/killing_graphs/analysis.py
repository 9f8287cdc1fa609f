"""Interior gradient bound and non-existence probes."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import quad

from .errors import InputError
from .geometry import ModelGeometry, RadialFunction

# ---------------------------------------------------------------------------
# interior gradient bound


@dataclass(frozen=True)
class GradientBoundInput:
    """Data of the interior gradient bound on B(p, R).

    ``p`` is the distance of the centre from the pole. ``M_sup`` is the
    maximum of a positive representative of u over the closed ball (solutions
    may be shifted by constants). ``sup_H``/``sup_grad_H`` bound |H| and
    |grad H| on the ball.
    """

    geom: ModelGeometry
    p: float
    R: float
    K0: float
    L_ric: float
    M_sup: float
    u_at_p: float
    sup_H: float
    sup_grad_H: float
    beta: float
    samples: int = 400

    def __post_init__(self):
        if self.K0 < 0 or self.L_ric < 0:
            raise InputError("K0 and L_ric must be non-negative")
        if not self.R > 0 or self.p < 0:
            raise InputError("need R > 0 and p >= 0")
        if not 0 < self.u_at_p <= self.M_sup:
            raise InputError("u must be positive with u(p) <= M_sup")
        if self.sup_H < 0 or self.sup_grad_H < 0:
            raise InputError("H bounds must be non-negative")
        lo = beta_lower_bound(self.geom, self.p, self.R)
        if not lo < self.beta < 1:
            raise InputError(f"beta must lie in ({lo!r}, 1)")


@dataclass(frozen=True)
class GradientBound:
    B: float
    mu: float
    delta: float
    delta_prime: float
    M_tilde: float
    C_R: float
    rho_min: float
    rho_max: float
    xi_ratio: float
    branches: tuple
    note: str = ("nested absolute values evaluated as printed: "
                 "|(n-1) xi'/xi + kappa + n|H| + (1-beta) |xi'/xi - kappa||")

    @property
    def gradient_cap(self):
        """max(1, e^B): the usable bound on |grad u(p)|."""
        return math.inf if self.B > 700 else max(1.0, math.exp(self.B))


def _ball_radii(p, R, samples):
    lo, hi = max(0.0, p - R), p + R
    return np.linspace(lo, hi, samples)


def _rho_extrema(geom, p, R, samples=400):
    rho = geom.rho(_ball_radii(p, R, samples))
    return float(rho.min()), float(rho.max())


def beta_lower_bound(geom, p, R):
    _, rmax = _rho_extrema(geom, p, R)
    return max(2.0 / 3.0, rmax**2 / (1.0 + rmax**2))


def model_curvature_constants(geom: ModelGeometry, p: float, R: float, samples: int = 400):
    """(K0, L_ric) on B(p, R) for a two-dimensional model.

    K = -xi''/xi; Ric = K g; Hess log rho has eigenvalues (log rho)'' and
    (xi'/xi)(log rho)'.
    """
    if geom.n != 2:
        raise InputError("closed-form constants are for n = 2")
    r = _ball_radii(p, R, samples)
    r = np.where(r <= 0, 1e-6, r)
    K = -geom.xi.d2(r) / geom.xi(r)
    lr = geom.dlog_rho(r)
    lrr = geom.rho.d2(r) / geom.rho(r) - lr**2
    e1 = K + lrr
    e2 = K + geom.dlog_xi(r) * lr
    K0 = math.sqrt(max(0.0, float(-K.min())))
    L = max(0.0, float(-min(e1.min(), e2.min())))
    return K0, L


def _comparison_xi(K0):
    if K0 < 1e-12:
        return (lambda t: t), (lambda t: np.ones_like(t)), (lambda R: 0.5 * R * R)
    return ((lambda t: np.sinh(K0 * t) / K0), (lambda t: np.cosh(K0 * t)),
            (lambda R: (math.cosh(K0 * R) - 1) / K0**2))


def gradient_bound_details(inp: GradientBoundInput) -> GradientBound:
    g = inp.geom
    n = g.n
    beta = inp.beta
    rho_min, rho_max = _rho_extrema(g, inp.p, inp.R, inp.samples)
    # worst case over the ball: delta' at the largest rho is the smallest
    delta_p = math.log(beta / (1 - beta)) - 2 * math.log(rho_max)
    delta = 1.5 * beta - 1
    mu = 2 * beta * (delta * delta_p - 2) / delta_p

    xi, dxi, C_R = _comparison_xi(inp.K0)
    C_R = C_R(inp.R)
    t = np.linspace(0.0, inp.R, inp.samples)       # distance from p
    radii = _ball_radii(inp.p, inp.R, inp.samples)  # distance from the pole
    lr = np.abs(g.dlog_rho(radii))
    lrr = g.rho.d2(radii) / g.rho(radii) - g.dlog_rho(radii) ** 2
    r_safe = np.where(radii <= 0, 1e-6, radii)
    hess = np.maximum(np.abs(lrr), np.abs(g.dlog_xi(r_safe) * g.dlog_rho(radii)))
    grad_max, hess_max = float(lr.max()), float(hess.max())
    nH, nDH = n * inp.sup_H, n * inp.sup_grad_H
    M = inp.M_sup
    sb = math.sqrt(1 - beta)

    xt, dxt = xi(t), dxi(t)
    # xi * | (n-1) xi'/xi + kappa + n|H| + (1-beta) |xi'/xi - kappa| |,
    # with kappa anywhere in [-|grad log rho|, |grad log rho|] (convex in kappa)
    if inp.p == 0:
        kap = [g.dlog_rho(t)]
    else:
        kap = [np.full_like(t, -grad_max), np.full_like(t, grad_max)]
    lap = np.max([np.abs((n - 1) * dxt + xt * k + xt * nH + (1 - beta) * np.abs(dxt - xt * k))
                  for k in kap], axis=0)
    lap_term = float(np.max(2 * lap / C_R + 2 * xt**2 / C_R**2))
    xi_ratio = float(xt.max() / C_R)

    M_tilde = (
        2 / (math.sqrt(beta) * delta_p)
        * (nDH + (1 - beta) * nH * grad_max + 2 * (1 - beta) * grad_max**2
           + (1 - beta) * hess_max) * M
        + sb * (nH + 4 * grad_max)
        + 4 * sb * xi_ratio
        + 2 * xi_ratio * (nH + (6 - 5 * beta) * grad_max) * M
        + M * lap_term
    )
    lead = 4 * M * (1 + rho_min) ** 2 / rho_min
    b1 = xi_ratio
    if mu <= 0:
        b2 = math.inf
    else:
        b2 = (1 + rho_min) * rho_max**2 / (mu * rho_min) * (M_tilde + 2 * inp.L_ric * M / delta_p)
    B = lead * max(b1, b2)
    return GradientBound(B, mu, delta, delta_p, M_tilde, C_R, rho_min, rho_max, xi_ratio,
                         (lead * b1, lead * b2))


def eval_interior_gradient_bound(inp: GradientBoundInput) -> float:
    """B such that |grad u(p)| <= max(1, e^B); inf when mu <= 0."""
    return gradient_bound_details(inp).B


def choose_beta(geom: ModelGeometry, p: float, R: float, **kwargs):
    """The beta from 1 - 10^-k, k = 1..12, giving the smallest B."""
    lo = beta_lower_bound(geom, p, R)
    best = None
    for k in range(1, 13):
        beta = 1 - 10.0**-k
        if not lo < beta < 1:
            continue
        B = eval_interior_gradient_bound(GradientBoundInput(geom, p, R, beta=beta, **kwargs))
        if best is None or B < best[1]:
            best = (beta, B)
    if best is None:
        raise InputError("no admissible beta in the search ladder")
    return best[0]


# ---------------------------------------------------------------------------
# non-existence probes


class Verdict(enum.Enum):
    CONSISTENT = "CONSISTENT"
    VIOLATED = "VIOLATED"
    INCONCLUSIVE = "INCONCLUSIVE"

    def __str__(self):
        return self.value


@dataclass(frozen=True, eq=False)
class NonexistenceInput:
    """Profiles for the two volume conditions.

    ``area`` is the area of the geodesic sphere of radius r. The integral of
    sqrt(p) starts at ``s0`` (profiles such as 1/(s^2 log s) are only defined
    for s > 1). ``h_nonexist`` may be None, in which case the running minimum
    of the ratio is used.
    """

    p: object
    rho0: object
    area: object
    D: float = 1.0
    h_nonexist: Optional[object] = None
    R_probe: tuple = (10.0, 1000.0)
    s0: float = 0.0
    divergence_factor: float = 1e3
    cauchy_ratio: float = 0.95
    samples_per_decade: int = 400

    def __post_init__(self):
        lo, hi = self.R_probe
        if not (0 < lo < hi):
            raise InputError("probe range must be increasing and positive")
        if hi / lo < 100 * (1 - 1e-12):
            raise InputError("probe range must cover two decades")
        if not self.D > 0:
            raise InputError("D must be positive")
        if self.s0 < 0 or self.s0 >= lo:
            raise InputError("s0 must lie in [0, R_probe[0])")


@dataclass(frozen=True)
class ProbeReport:
    verdict: Verdict
    details: dict = field(default_factory=dict)


def log_profile(fn, r):
    """log fn(r), in closed form for the exponential-type families."""
    r = np.asarray(r, dtype=float)
    if isinstance(fn, RadialFunction):
        p = fn.params
        if fn.family == "constant":
            return np.full_like(r, math.log(p[0]))
        if fn.family == "exponential":
            e = p[2] if len(p) > 2 else 0.0
            return math.log(p[0]) + p[1] * r + (e * np.log(r) if e else 0.0)
        if fn.family == "power":
            s = p[2] if len(p) > 2 else 0.0
            return math.log(p[0]) + p[1] * np.log(r + s)
        if fn.family in ("cosh", "sinh"):
            x = np.abs(p[1] * r)
            sign = 1.0 if fn.family == "cosh" else -1.0
            return math.log(p[0]) + x - math.log(2.0) + np.log1p(sign * np.exp(-2 * x))
        if fn.family == "sinh-power":
            x = np.abs(p[1] * r)
            with np.errstate(divide="ignore"):
                return math.log(p[0]) + p[2] * (x - math.log(2.0) + np.log1p(-np.exp(-2 * x)))
    with np.errstate(divide="ignore"):
        return np.log(np.asarray(fn(r), dtype=float))


def _log_grid(lo, hi, per_decade):
    k = max(16, int(math.ceil(per_decade * math.log10(hi / lo))))
    k += k % 2
    return np.geomspace(lo, hi, k + 1)


def _cum_sqrt_p(p, s):
    """int_{s[0]}^s sqrt(p) on an increasing geometric grid, in log s."""
    from .quadrature import cumulative

    vals = np.sqrt(np.maximum(_eval(p, s), 0.0))
    return cumulative(vals * s, np.log(s))


def _sqrt_p_cumulative(inp, s):
    """int_s0^s sqrt(p) at the increasing points ``s`` (s[0] > s0).

    The head [s0, s[0]] goes through adaptive quadrature, which tolerates
    integrable endpoint singularities such as 1/(s^2 log s) at s = 1.
    """
    head, _ = quad(lambda x: math.sqrt(max(float(_eval(inp.p, np.array([x]))[0]), 0.0)),
                   inp.s0, float(s[0]), limit=200)
    return head + _cum_sqrt_p(inp.p, s)


def _eval(fn, r, skip_zero=False):
    r = np.asarray(r, dtype=float)
    if skip_zero:
        out = np.zeros_like(r)
        pos = r > 0
        out[pos] = np.asarray(fn(r[pos]), dtype=float)
        return out
    return np.asarray(fn(r), dtype=float)


def _log_blocks(logf, s, edges):
    """log of the integral of exp(logf) over consecutive [edges[k], edges[k+1]]."""
    out = []
    for a, b in zip(edges[:-1], edges[1:]):
        m = (s >= a * (1 - 1e-12)) & (s <= b * (1 + 1e-12))
        x, y = s[m], logf[m]
        if not np.all(np.isfinite(y)):
            y = np.where(np.isfinite(y), y, -np.inf)
        w = np.diff(x)
        pair = np.logaddexp(y[:-1], y[1:]) + np.log(w / 2)
        out.append(float(np.logaddexp.reduce(pair)) if pair.size else -np.inf)
    return np.array(out)


def _divergence_verdict(log_blocks, factor, cauchy_ratio, outer):
    """Verdict for partial sums given as log block integrals."""
    with np.errstate(invalid="ignore"):
        log_ratios = np.diff(log_blocks)
    log_S = np.logaddexp.accumulate(log_blocks)
    growth = float(log_S[-1] - log_S[0])
    nondecreasing = bool(np.all(log_ratios >= -1e-9))
    tail = log_ratios[-outer:]
    details = {
        "block_log_integrals": log_blocks.tolist(),
        "log_growth": growth,
        "increments_nondecreasing": nondecreasing,
        "outer_block_ratios": np.exp(tail).tolist(),
    }
    if nondecreasing and growth >= math.log(factor):
        return Verdict.CONSISTENT, details
    if tail.size and np.all(np.exp(tail) <= cauchy_ratio):
        return Verdict.VIOLATED, details
    return Verdict.INCONCLUSIVE, details


def _doubling_edges(lo, hi):
    k = int(math.floor(math.log2(hi / lo) + 1e-12))
    edges = lo * 2.0 ** np.arange(k + 1)
    return edges


def _block_grid(lo, hi, per_decade):
    """Geometric grid on [lo, hi] containing every doubling edge as a node."""
    edges = list(_doubling_edges(lo, hi))
    if edges[-1] < hi * (1 - 1e-12):
        edges.append(hi)
    per_block = max(8, int(math.ceil(per_decade * math.log10(2.0))))
    parts = [np.geomspace(a, b, per_block + 1)[:-1] for a, b in zip(edges[:-1], edges[1:])]
    return np.concatenate(parts + [[edges[-1]]])


def probe_condition_1(inp: NonexistenceInput) -> ProbeReport:
    """Partial integrals of exp(D (int sqrt p)^2) / (rho0^2 A) on doubling blocks.

    CONSISTENT when they grow by ``divergence_factor`` with non-decreasing
    increments; VIOLATED when every block ratio over the outer decade is at
    most ``cauchy_ratio``.
    """
    lo, hi = inp.R_probe
    s = _block_grid(lo, hi, inp.samples_per_decade)
    P = _sqrt_p_cumulative(inp, s)
    logf = inp.D * P**2 - 2 * log_profile(inp.rho0, s) - log_profile(inp.area, s)
    edges = _doubling_edges(lo, hi)
    blocks = _log_blocks(logf, s, edges)
    outer = max(1, int(round(math.log2(10))))
    verdict, details = _divergence_verdict(blocks, inp.divergence_factor,
                                           inp.cauchy_ratio, outer)
    return ProbeReport(verdict, details)


def check_nonexistence_condition_1(inp: NonexistenceInput) -> Verdict:
    return probe_condition_1(inp).verdict


def condition_2_ratio(inp: NonexistenceInput, r):
    """(int_r^{3r/2} sqrt p)^2 / (r log(rho0(2r)^2 vol B(o, 2r)))."""
    r = np.asarray(r, dtype=float)
    lo = float(r.min())
    s = _log_grid(lo, 2 * float(r.max()), inp.samples_per_decade * 4)
    P = _cum_sqrt_p(inp.p, s)
    num = (np.interp(1.5 * r, s, P) - np.interp(r, s, P)) ** 2
    # log vol B(o, 2r) with the area integrated in log space
    vs = _log_grid(min(1e-3, lo * 1e-3), 2 * float(r.max()), inp.samples_per_decade)
    la = log_profile(inp.area, vs)
    inc = np.logaddexp(la[:-1], la[1:]) + np.log(np.diff(vs) / 2)
    head = la[0] + math.log(vs[0] / 2)
    log_vol = np.concatenate([[head], np.logaddexp(head, np.logaddexp.accumulate(inc))])
    lv = np.interp(np.log(2 * r), np.log(vs), log_vol)
    den = r * (2 * log_profile(inp.rho0, 2 * r) + lv)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(den > 0, num / den, np.inf)


def probe_condition_2(inp: NonexistenceInput) -> ProbeReport:
    """Samplewise ratio >= h(r) and divergence of int h.

    Divergence is recognised when h decays no faster than 1/(r log r), i.e.
    r log r h(r) over the outer decade stays above half its value at the
    start, or when the partial integrals pass ``divergence_factor``.
    """
    lo, hi = inp.R_probe
    r = _block_grid(lo, hi, inp.samples_per_decade)
    q = condition_2_ratio(inp, r)
    if inp.h_nonexist is None:
        h = np.minimum.accumulate(q)
    else:
        h = _eval(inp.h_nonexist, r)
        if np.any(np.diff(h) > 1e-12 * np.maximum(1.0, np.abs(h[:-1]))):
            raise InputError("h must be non-increasing")
    if not np.all(h > 0):
        raise InputError("h must be positive")
    holds = q >= h * (1 - 1e-12)
    details = {"ratio_min": float(q.min()), "ratio_holds": bool(holds.all())}
    if not holds.all():
        k = int(np.argmin(holds))
        details["witness"] = float(r[k])
        return ProbeReport(Verdict.VIOLATED, details)
    # comparison with the divergent reference 1/(r log r) comes first: the
    # doubling-block test would read its logarithmic decay as convergence
    ref = r * np.log(r) * h
    outer = r >= hi / 10
    details["rlogr_h_start"] = float(ref[0])
    details["rlogr_h_outer_min"] = float(ref[outer].min())
    edges = _doubling_edges(lo, hi)
    blocks = _log_blocks(np.log(h), r, edges)
    verdict, more = _divergence_verdict(blocks, inp.divergence_factor, inp.cauchy_ratio,
                                        max(1, int(round(math.log2(10)))))
    details.update(more)
    if ref[outer].min() >= 0.5 * ref[0]:
        verdict = Verdict.CONSISTENT
    return ProbeReport(verdict, details)


def check_nonexistence_condition_2(inp: NonexistenceInput) -> Verdict:
    return probe_condition_2(inp).verdict


_CASE_FACTORS = {
    "i": lambda r: r**2 * np.log(r),
    "ii": lambda r: r * np.log(r),
    "iii": lambda r: np.log(r),
}


def corollary_liminf_probe(H, rho0, case: str, R_probe: float, samples: int = 200) -> float:
    """Minimum over [R_probe/10, R_probe] of H * w(r) / rho0(r).

    w is r^2 log r, r log r or log r for the polynomial, exponential and
    Gaussian growth classes. Boundedness of solutions forces the liminf of
    this quantity to vanish, so a clearly positive proxy flags the regime in
    which bounded solutions cannot exist.
    """
    if case not in _CASE_FACTORS:
        raise InputError("case must be one of 'i', 'ii', 'iii'")
    if not R_probe > 10:
        raise InputError("the outer decade must lie beyond r = 1")
    r = np.geomspace(R_probe / 10, R_probe, samples)
    Hv = _eval(H, r) if callable(H) else np.full_like(r, float(H))
    if np.any(Hv < 0):
        raise InputError("H must be non-negative")
    logq = np.full_like(r, -np.inf)
    pos = Hv > 0
    logq[pos] = (np.log(Hv[pos]) + np.log(_CASE_FACTORS[case](r[pos]))
                 - log_profile(rho0, r[pos]))
    return float(np.exp(logq).min())
