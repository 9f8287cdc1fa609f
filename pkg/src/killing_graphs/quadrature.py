"""Quadrature helpers shared by the radial and barrier modules."""
from __future__ import annotations

import math

import numpy as np
from scipy.integrate import cumulative_simpson, simpson

from .errors import IntegrabilityError


def uniform_grid(r_max, step):
    """Uniform grid on [0, r_max] with spacing at most ``step``."""
    n = max(2, int(math.ceil(r_max / step - 1e-9)))
    if n % 2:
        n += 1
    return np.linspace(0.0, r_max, n + 1)


def cumulative(y, x):
    """Cumulative Simpson integral from x[0], starting at 0."""
    return cumulative_simpson(y, x=x, initial=0.0)


def definite(y, x):
    return float(simpson(y, x=x))


def laplace_tail(g, dlog, d2log):
    """Asymptotic estimate of the integral of g over [R, inf).

    With g = exp(-P) the tail is g / (P' + P''/P') up to third-order terms;
    the estimate is exact for pure exponentials and pure powers.
    ``dlog`` and ``d2log`` are the first two derivatives of log g at R.
    """
    lam = -dlog
    if not lam > 0:
        return math.inf
    denom = lam - d2log / lam
    if not denom > 0:
        return math.inf
    return g / denom


def doubling_block_ratios(fn, R, blocks=3, samples=401):
    """Ratios of the integrals of ``fn`` over [R/2^(k+1), R/2^k].

    Integrable monotone tails have ratios bounded away from 1.
    """
    vals = []
    hi = R
    for _ in range(blocks):
        lo = hi / 2
        x = np.linspace(lo, hi, samples)
        vals.append(definite(fn(x), x))
        hi = lo
    vals = np.array(vals)
    with np.errstate(divide="ignore", invalid="ignore"):
        return vals[:-1] / vals[1:], vals


def tail_test(fn, dlog, d2log, R, max_ratio=0.95):
    """Tail integral of ``fn`` beyond R, or IntegrabilityError.

    The tail must look Cauchy on doubling blocks and the asymptotic
    estimate must be finite.
    """
    ratios, blocks = doubling_block_ratios(fn, R)
    if not np.all(np.isfinite(ratios)) or np.any(ratios > max_ratio):
        raise IntegrabilityError(
            f"partial integrals do not settle before r = {R!r} "
            f"(doubling-block ratios {ratios.tolist()!r})",
            blocks,
        )
    tail = laplace_tail(float(fn(np.array([R]))[0]), dlog, d2log)
    if not math.isfinite(tail):
        raise IntegrabilityError(f"tail estimate diverges at r = {R!r}", blocks)
    return tail
