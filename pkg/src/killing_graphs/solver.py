"""Newton solver for the Dirichlet problem Q[u] = 2H on polar grids.

The base is two-dimensional, ``dr^2 + xi(r)^2 dtheta^2``, warped by rho.
The operator is discretised in flux form

    (1/xi) [d_r(xi u_r / W) + d_theta(u_theta / (xi W))] + (rho'/rho) u_r / W - 2H

with W = sqrt(rho^-2 + u_r^2 + u_theta^2 / xi^2) evaluated on cell faces.
Radial derivatives across the pole use the diametrically opposite node.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import CubicSpline
from scipy.linalg import lapack

from .errors import (
    AdmissibilityWarning,
    InputError,
    NonConvergence,
    NumericalError,
    SingularLinearSystem,
)
from .geometry import ModelGeometry, check_local_H_bound
from .grid import DiscreteField, PolarGrid, evaluate_on_grid

__all__ = [
    "PolarGrid",
    "DiscreteField",
    "DirichletProblem",
    "SolverConfig",
    "BandedMatrix",
    "assemble_residual",
    "assemble_jacobian",
    "solve_dirichlet",
    "solve_exhaustion",
    "flux_check",
    "nondiv_residual",
    "node_gradient",
]

# round-off acceptance: Newton step below ROUNDOFF_STEP * |U| and residual
# below ROUNDOFF_FACTOR * eps * |J|_inf * |U|
ROUNDOFF_STEP = 1e-13
ROUNDOFF_FACTOR = 100.0


@dataclass(frozen=True)
class SolverConfig:
    newton_tol: float = 1e-10
    max_newton_iters: int = 50
    backtrack: float = 0.5
    armijo: float = 1e-4
    continuation_steps: int = 4
    min_step: float = 1e-10

    def __post_init__(self):
        if not (self.newton_tol > 0 and self.armijo > 0 and self.min_step > 0):
            raise InputError("solver tolerances must be positive")
        if not 0 < self.backtrack < 1:
            raise InputError("backtracking factor must lie in (0, 1)")
        if self.max_newton_iters < 1 or self.continuation_steps < 0:
            raise InputError("iteration counts must be positive")


def _ring(phi, grid):
    if callable(phi):
        vals = np.asarray(phi(grid.theta), dtype=float)
    else:
        vals = np.asarray(phi, dtype=float)
    vals = np.broadcast_to(vals, (grid.Ntheta,)).astype(float)
    if not np.all(np.isfinite(vals)):
        raise InputError("boundary data must be finite")
    return vals


@dataclass(eq=False)
class DirichletProblem:
    """Q[u] = nH in B(o, R) with u = phi on the boundary circle."""

    geom: ModelGeometry
    H: object
    phi: object
    grid: PolarGrid
    admissibility: object = field(init=False, default=None)

    def __post_init__(self):
        if self.geom.n != 2:
            raise InputError("the grid solver needs a two-dimensional base")
        self.phi = _ring(self.phi, self.grid)
        self.H_nodes = evaluate_on_grid(self.H, self.grid)
        field_H = DiscreteField(self.grid, self.H_nodes)
        self.admissibility = check_local_H_bound(self.geom, field_H, self.grid.R)
        self._ops = None

    def with_H_scale(self, s):
        p = DirichletProblem.__new__(DirichletProblem)
        p.__dict__.update(self.__dict__)
        p.H_nodes = self.H_nodes * s
        return p

    @property
    def ops(self):
        if self._ops is None:
            self._ops = _Stencils(self.geom, self.grid)
        return self._ops


class _Stencils:
    """Affine maps U -> derivative samples, stored as sparse matrices.

    Every derivative quantity q is written q = A @ U + B @ phi, where phi is
    the boundary ring.
    """

    def __init__(self, geom, grid):
        N, M = grid.Nr, grid.Ntheta
        dr, dt = grid.dr, grid.dtheta
        self.N, self.M = N, M
        size = N * M
        idx = np.arange(size).reshape(N, M)
        jp = np.roll(np.arange(M), -1)
        jm = np.roll(np.arange(M), 1)
        mirror = (np.arange(M) + M // 2) % M

        r = grid.r
        rf = grid.face_r
        self.r, self.rf = r, rf
        self.xi_c = geom.xi(r)
        self.xi_f = geom.xi(rf)
        self.a_c = geom.rho(r) ** -2.0
        self.a_f = geom.rho(rf) ** -2.0
        self.k_c = geom.dlog_rho(r)
        self.rho_c = geom.rho(r)
        self.rho_f = geom.rho(rf)

        def build(entries_u, entries_b, nrows):
            rows, cols, vals = entries_u
            A = sp.csr_matrix(
                (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                shape=(nrows, size),
            )
            rows, cols, vals = entries_b
            if rows:
                B = sp.csr_matrix(
                    (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                    shape=(nrows, M),
                )
            else:
                B = sp.csr_matrix((nrows, M))
            return A, B

        def acc():
            return ([], [], [])

        def put(store, rows, cols, vals):
            R_, C_, V_ = np.broadcast_arrays(
                np.asarray(rows), np.asarray(cols), np.asarray(vals, dtype=float))
            store[0].append(R_.ravel())
            store[1].append(C_.ravel())
            store[2].append(V_.ravel())

        # neighbours of row i in the extended sense: below (mirror at i=0), above (boundary at i=N-1)
        # weights of the three-point first derivative at cell centres
        a = np.full(N, dr)
        b = np.full(N, dr)
        b[-1] = 0.5 * dr
        w_m = -b / (a * (a + b))
        w_0 = (b - a) / (a * b)
        w_p = a / (b * (a + b))
        self.w_c = (w_m, w_0, w_p)
        # second derivative weights (for the non-divergence residual)
        self.w2_c = (2 / (a * (a + b)), -2 / (a * b), 2 / (b * (a + b)))

        def centre_dr(weights):
            wm, w0, wp = weights
            U, Bd = acc(), acc()
            rows = idx
            put(U, rows, idx, w0[:, None])
            # lower neighbour
            low = np.vstack([idx[0, mirror][None, :], idx[:-1]])
            put(U, rows, low, wm[:, None])
            # upper neighbour
            put(U, rows[:-1], idx[1:], wp[:-1, None])
            put(Bd, rows[-1], np.arange(M), wp[-1])
            return build(U, Bd, size)

        self.Dr_c = centre_dr(self.w_c)
        self.Drr_c = centre_dr(self.w2_c)

        # centred theta derivative at nodes
        U, Bd = acc(), acc()
        put(U, idx, idx[:, jp], 1 / (2 * dt))
        put(U, idx, idx[:, jm], -1 / (2 * dt))
        self.Dt_c = build(U, Bd, size)
        # second theta derivative at nodes
        U, Bd = acc(), acc()
        put(U, idx, idx[:, jp], 1 / dt**2)
        put(U, idx, idx[:, jm], 1 / dt**2)
        put(U, idx, idx, -2 / dt**2)
        self.Dtt_c = build(U, Bd, size)

        # radial faces: face i is the outer face of cell i
        U, Bd = acc(), acc()
        put(U, idx[:-1], idx[1:], 1 / dr)
        put(U, idx[:-1], idx[:-1], -1 / dr)
        put(U, idx[-1], idx[-2], 1 / (3 * dr))
        put(U, idx[-1], idx[-1], -3 / dr)
        put(Bd, idx[-1], np.arange(M), 8 / (3 * dr))
        self.Fr_ur = build(U, Bd, size)
        U, Bd = acc(), acc()
        for src in (idx[:-1], idx[1:]):
            put(U, idx[:-1], src[:, jp], 0.5 / (2 * dt))
            put(U, idx[:-1], src[:, jm], -0.5 / (2 * dt))
        put(Bd, idx[-1], jp, 1 / (2 * dt))
        put(Bd, idx[-1], jm, -1 / (2 * dt))
        self.Fr_ut = build(U, Bd, size)

        # angular faces: face (i, j) sits between theta_j and theta_{j+1}
        U, Bd = acc(), acc()
        put(U, idx, idx[:, jp], 1 / dt)
        put(U, idx, idx, -1 / dt)
        self.Ft_ut = build(U, Bd, size)
        shift = sp.csr_matrix(
            (np.ones(size), (idx.ravel(), idx[:, jp].ravel())), shape=(size, size)
        )
        Ac, Bc = self.Dr_c
        self.Ft_ur = (0.5 * (Ac + shift @ Ac), 0.5 * (Bc + shift @ Bc))

        # divergence of face fluxes
        inv = 1.0 / (np.repeat(self.xi_c, M))
        rows, cols, vals = [], [], []
        rows.append(idx.ravel())
        cols.append(idx.ravel())
        vals.append(inv / dr)
        rows.append(idx[1:].ravel())
        cols.append(idx[:-1].ravel())
        vals.append(-inv[M:] / dr)
        self.div_r = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(size, size),
        )
        rows = np.concatenate([idx.ravel(), idx.ravel()])
        cols = np.concatenate([idx.ravel(), idx[:, jm].ravel()])
        vals = np.concatenate([inv / dt, -inv / dt])
        self.div_t = sp.csr_matrix((vals, (rows, cols)), shape=(size, size))

        self.xi_fr = np.repeat(self.xi_f, M)
        self.xi_cr = np.repeat(self.xi_c, M)
        self.a_fr = np.repeat(self.a_f, M)
        self.a_cr = np.repeat(self.a_c, M)
        self.k_cr = np.repeat(self.k_c, M)

    @staticmethod
    def apply(op, U, phi):
        A, B = op
        return A @ U + B @ phi


def _check_finite(arr, grid, what):
    bad = ~np.isfinite(arr)
    if bad.any():
        k = int(np.argmax(bad))
        i, j = grid.node(k)
        raise NumericalError(f"non-finite {what} at node (i={i}, j={j})", (i, j))


def _flat(problem, u):
    if isinstance(u, DiscreteField):
        if u.grid != problem.grid:
            raise InputError("field lives on a different grid")
        return u.values.ravel()
    return np.asarray(u, dtype=float).ravel()


def _pieces(problem, U, want_jac):
    ops = problem.ops
    phi = problem.phi
    ap = _Stencils.apply
    p_f = ap(ops.Fr_ur, U, phi)
    t_f = ap(ops.Fr_ut, U, phi)
    xf, af = ops.xi_fr, ops.a_fr
    W_f = np.sqrt(af + p_f**2 + (t_f / xf) ** 2)
    F = xf * p_f / W_f
    # the innermost radial face sits on the pole where xi = 0: no flux

    p_g = ap(ops.Ft_ur, U, phi)
    t_g = ap(ops.Ft_ut, U, phi)
    xc, ac = ops.xi_cr, ops.a_cr
    W_g = np.sqrt(ac + p_g**2 + (t_g / xc) ** 2)
    G = t_g / (xc * W_g)

    p_c = ap(ops.Dr_c, U, phi)
    t_c = ap(ops.Dt_c, U, phi)
    W_c = np.sqrt(ac + p_c**2 + (t_c / xc) ** 2)
    C = ops.k_cr * p_c / W_c

    res = ops.div_r @ F + ops.div_t @ G + C
    out = {"res": res, "W_c": W_c, "F": F}
    if want_jac:
        W3 = W_f**3
        dF_dp = xf * (af + (t_f / xf) ** 2) / W3
        dF_dt = -p_f * t_f / (xf * W3)
        W3 = W_g**3
        dG_dt = (ac + p_g**2) / (xc * W3)
        dG_dp = -t_g * p_g / (xc * W3)
        W3 = W_c**3
        dC_dp = ops.k_cr * (ac + (t_c / xc) ** 2) / W3
        dC_dt = -ops.k_cr * p_c * t_c / (xc**2 * W3)
        D = sp.diags
        J = (
            ops.div_r @ (D(dF_dp) @ ops.Fr_ur[0] + D(dF_dt) @ ops.Fr_ut[0])
            + ops.div_t @ (D(dG_dt) @ ops.Ft_ut[0] + D(dG_dp) @ ops.Ft_ur[0])
            + D(dC_dp) @ ops.Dr_c[0]
            + D(dC_dt) @ ops.Dt_c[0]
        )
        out["J"] = J.tocsr()
    return out


def _residual_flat(problem, U, H_nodes=None):
    H = problem.H_nodes if H_nodes is None else H_nodes
    pc = _pieces(problem, U, False)
    res = pc["res"] - 2.0 * H.ravel()
    _check_finite(res, problem.grid, "residual")
    return res


def assemble_residual(problem: DirichletProblem, u) -> DiscreteField:
    """Discrete Q[u] - 2H at every node; ``u`` takes its ring from ``problem.phi``."""
    U = _flat(problem, u)
    res = _residual_flat(problem, U)
    return DiscreteField(problem.grid, res.reshape(problem.grid.shape))


@dataclass(eq=False)
class BandedMatrix:
    """Square matrix in LAPACK general band storage (kl sub-, ku superdiagonals)."""

    ab: np.ndarray
    kl: int
    ku: int
    n: int
    sparse: object = None
    diagnostics: dict = field(default_factory=dict)

    @classmethod
    def from_sparse(cls, A, kl, ku):
        A = A.tocoo()
        n = A.shape[0]
        off = A.col - A.row
        if off.size and (off.max() > ku or -off.min() > kl):
            raise InputError("matrix exceeds the declared bandwidth")
        # dgbsv wants kl extra rows on top for the fill-in
        ab = np.zeros((2 * kl + ku + 1, n))
        np.add.at(ab, (kl + ku + A.row - A.col, A.col), A.data)
        return cls(ab, kl, ku, n, A.tocsr())

    def to_dense(self):
        return self.sparse.toarray()

    def matvec(self, v):
        return self.sparse @ v

    def solve(self, rhs, grid=None):
        _, _, x, info = lapack.dgbsv(self.kl, self.ku, self.ab, rhs)
        if info > 0:
            node = grid.node(info - 1) if grid is not None else info - 1
            raise SingularLinearSystem(node)
        if info < 0:
            raise InputError(f"illegal argument {-info} to the band solver")
        return x


def assemble_jacobian(problem: DirichletProblem, u) -> BandedMatrix:
    """Analytic Jacobian of :func:`assemble_residual` in band storage.

    The diagnostics record the range of the two eigenvalues 1/(rho^2 W^3)
    and 1/W of the coefficient matrix of the non-divergence form.
    """
    U = _flat(problem, u)
    pc = _pieces(problem, U, True)
    J = pc["J"]
    _check_finite(J.data, problem.grid, "Jacobian entry")
    M = problem.grid.Ntheta
    band = BandedMatrix.from_sparse(J, 2 * M, 2 * M)
    W = pc["W_c"]
    lam_small = problem.ops.a_cr / W**3
    lam_large = 1.0 / W
    band.diagnostics = {
        "eig_min": float(min(lam_small.min(), lam_large.min())),
        "eig_max": float(max(lam_small.max(), lam_large.max())),
        "spread": float(max(lam_large.max(), lam_small.max())
                        / min(lam_small.min(), lam_large.min())),
    }
    return band


@dataclass
class SolveRecord:
    scale: float
    iterations: int
    residual_history: list
    roundoff_limited: bool = False
    l2_history: list = field(default_factory=list)


def _initial_guess(problem):
    """Flat-disk harmonic extension of phi: mode k decays like (r/R)^k.

    The linear ramp mean + (r/R)(phi - mean) puts a cone on every mode at the
    pole, and for higher modes Newton can stall on the merit plateau it creates.
    """
    g = problem.grid
    c = np.fft.rfft(problem.phi)
    k = np.arange(c.size)
    modes = c[None, :] * (g.r[:, None] / g.R) ** k[None, :]
    return np.fft.irfft(modes, n=g.Ntheta, axis=1).ravel()


def _newton(problem, U, H_nodes, config):
    grid = problem.grid
    res = _residual_flat(problem, U, H_nodes)
    history = [float(np.max(np.abs(res)))]
    l2 = [float(np.linalg.norm(res))]
    it = 0
    floor_hit = False
    while history[-1] > config.newton_tol:
        if it >= config.max_newton_iters:
            raise NonConvergence(it, history[-1])
        J = assemble_jacobian(problem, U)
        dU = J.solve(-res, grid)
        # Where 1/(W h^2) is huge the residual cannot be driven below
        # eps * |J| * |U|; a Newton step at round-off level means we are there.
        u_scale = max(1.0, float(np.max(np.abs(U))))
        if float(np.max(np.abs(dU))) <= ROUNDOFF_STEP * u_scale:
            j_norm = float(abs(J.sparse).sum(axis=1).max())
            if history[-1] <= ROUNDOFF_FACTOR * np.finfo(float).eps * j_norm * u_scale:
                floor_hit = True
                break
        merit = 0.5 * float(res @ res)
        lam = 1.0
        while True:
            trial = U + lam * dU
            try:
                r_try = _residual_flat(problem, trial, H_nodes)
                m_try = 0.5 * float(r_try @ r_try)
            except NumericalError:
                m_try = math.inf
            if m_try <= (1 - 2 * config.armijo * lam) * merit:
                break
            lam *= config.backtrack
            if lam < config.min_step:
                raise NonConvergence(it + 1, history[-1])
        U, res = trial, r_try
        it += 1
        history.append(float(np.max(np.abs(res))))
        l2.append(float(np.linalg.norm(res)))
    return U, it, history, l2, floor_hit


def solve_dirichlet(problem: DirichletProblem, config: SolverConfig = SolverConfig(),
                    initial=None) -> DiscreteField:
    """Damped Newton with continuation in H.

    Stage 0 solves with H = 0, then H is ramped linearly to its target over
    ``config.continuation_steps`` stages. The returned field carries the
    boundary ring and a ``meta`` record of every stage.
    """
    adm = problem.admissibility
    if adm is not None and not adm.passed:
        warnings.warn(
            f"local admissibility margin {adm.margin!r} <= 0 at r = {adm.witness[0]!r}",
            AdmissibilityWarning,
            stacklevel=2,
        )
    U = _initial_guess(problem) if initial is None else _flat(problem, initial).copy()
    Hn = problem.H_nodes.ravel()
    if np.all(Hn == 0) or config.continuation_steps == 0:
        scales = [1.0]
    else:
        K = config.continuation_steps
        scales = [k / K for k in range(K + 1)]
    records = []
    for s in scales:
        U, its, hist, l2, floor_hit = _newton(problem, U, Hn * s, config)
        records.append(SolveRecord(s, its, hist, floor_hit, l2))
    out = DiscreteField(problem.grid, U.reshape(problem.grid.shape), problem.phi.copy())
    out.meta["records"] = records
    out.meta["admissibility_margin"] = None if adm is None else adm.margin
    out.meta["iterations"] = sum(r.iterations for r in records)
    out.meta["residual"] = records[-1].residual_history[-1]
    out.meta["roundoff_limited"] = any(r.roundoff_limited for r in records)
    return out


# ---------------------------------------------------------------------------
# diagnostics


def node_gradient(problem: DirichletProblem, u):
    """(u_r, u_theta) at the nodes from the centred stencils."""
    U = _flat(problem, u)
    ops = problem.ops
    p = _Stencils.apply(ops.Dr_c, U, problem.phi)
    t = _Stencils.apply(ops.Dt_c, U, problem.phi)
    shape = problem.grid.shape
    return p.reshape(shape), t.reshape(shape)


def gradient_norm(problem, u):
    p, t = node_gradient(problem, u)
    xi = problem.ops.xi_c[:, None]
    return np.sqrt(p**2 + (t / xi) ** 2)


def gradient_at_pole(problem, u):
    """|grad u| at the pole from the first Fourier mode of the inner ring."""
    vals = _flat(problem, u).reshape(problem.grid.shape)[0]
    th = problem.grid.theta
    M = problem.grid.Ntheta
    c = 2.0 / M * np.sum(vals * np.cos(th))
    s = 2.0 / M * np.sum(vals * np.sin(th))
    r0 = problem.grid.r[0]
    return math.hypot(c, s) / r0


@dataclass(frozen=True)
class FluxCheck:
    lhs: float
    rhs: float
    gap: float
    r0: float
    snapped: bool


def flux_check(geom: ModelGeometry, u: DiscreteField, H, r0: float) -> FluxCheck:
    """Compare the weighted flux through r = r0 with the enclosed integral of 2H rho.

    ``r0`` is moved to the nearest face ring if it is not on one.
    """
    grid = u.grid
    if u.boundary is None:
        raise InputError("field needs its boundary ring")
    if not 0 < r0 <= grid.R:
        raise InputError("r0 must lie in (0, R]")
    problem = DirichletProblem(geom, H, u.boundary, grid)
    faces = grid.face_r
    i = int(np.argmin(np.abs(faces - r0)))
    snapped = not math.isclose(faces[i], r0, rel_tol=1e-12, abs_tol=1e-14)
    if snapped:
        warnings.warn(f"r0 = {r0!r} snapped to face ring {faces[i]!r}", stacklevel=2)
    pc = _pieces(problem, u.values.ravel(), False)
    F = pc["F"].reshape(grid.shape)
    dt, dr = grid.dtheta, grid.dr
    lhs = float(geom.rho(faces[i]) * np.sum(F[i]) * dt)
    r = grid.r[: i + 1]
    w = 2.0 * geom.rho(r) * geom.xi(r) * dr * dt
    rhs = float(np.sum(problem.H_nodes[: i + 1] * w[:, None]))
    scale = max(abs(lhs), abs(rhs))
    gap = 0.0 if scale == 0 else abs(lhs - rhs) / scale
    return FluxCheck(lhs, rhs, gap, float(faces[i]), snapped)


def nondiv_residual(geom: ModelGeometry, u: DiscreteField, H) -> DiscreteField:
    """sigma^ij u_ij + (log rho)^i u_i (1 + 1/(rho W)^2) - 2 H W at the nodes."""
    grid = u.grid
    if u.boundary is None:
        raise InputError("field needs its boundary ring")
    problem = DirichletProblem(geom, H, u.boundary, grid)
    ops = problem.ops
    U = u.values.ravel()
    phi = problem.phi
    ap = _Stencils.apply
    ur = ap(ops.Dr_c, U, phi)
    ut = ap(ops.Dt_c, U, phi)
    urr = ap(ops.Drr_c, U, phi)
    utt = ap(ops.Dtt_c, U, phi)
    # mixed derivative: radial derivative of the centred theta derivative,
    # using the theta derivative of the ring for the outermost neighbour
    ut_ring = (np.roll(phi, -1) - np.roll(phi, 1)) / (2 * grid.dtheta)
    A, B = ops.Dr_c
    urt = A @ ut + B @ ut_ring
    xi = ops.xi_cr
    rr = np.repeat(grid.r, grid.Ntheta)
    dxi = geom.xi.d1(rr)
    h_rr = urr
    h_rt = urt - dxi / xi * ut
    h_tt = utt + xi * dxi * ur
    W2 = ops.a_cr + ur**2 + (ut / xi) ** 2
    W = np.sqrt(W2)
    lap = h_rr + h_tt / xi**2
    u_up_t = ut / xi**2
    hess_uu = ur**2 * h_rr + 2 * ur * u_up_t * h_rt + u_up_t**2 * h_tt
    val = lap - hess_uu / W2 + ops.k_cr * ur * (1 + ops.a_cr / W2) \
        - 2.0 * problem.H_nodes.ravel() * W
    _check_finite(val, grid, "non-divergence residual")
    return DiscreteField(grid, val.reshape(grid.shape))


# ---------------------------------------------------------------------------
# exhaustion


@dataclass
class ExhaustionReport:
    radii: list
    solutions: list
    sup_differences: list
    core_radius: float
    pinching: list = field(default_factory=list)

    @property
    def strictly_decreasing(self):
        d = self.sup_differences
        return all(b < a for a, b in zip(d, d[1:]))


def _core_values(sol, core_r, core_radius):
    g = sol.grid
    r = g.r
    keep = r < core_radius
    if keep.sum() == core_r.size and np.allclose(r[keep], core_r, rtol=0, atol=1e-12):
        return sol.values[keep]
    # extend through the pole so the spline is well posed near r = 0
    M = g.Ntheta
    mirror = (np.arange(M) + M // 2) % M
    rr = np.concatenate([-r[::-1], r, [g.R]])
    vals = np.vstack([sol.values[::-1][:, mirror], sol.values, sol.boundary[None, :]])
    return CubicSpline(rr, vals, axis=0)(core_r)


def solve_exhaustion(geom: ModelGeometry, H, phi_inf, radii: Sequence[float],
                     config: SolverConfig = SolverConfig(), *, nodes_per_unit: int = 16,
                     Ntheta: int = 64, core_radius: float = 2.0,
                     pinching: Optional[Callable] = None, threads: int = 1):
    """Solve on B(o, R_k) for increasing R_k with data phi_inf(theta) on each circle.

    Consecutive solutions are compared in sup norm on B(o, core_radius).
    ``pinching(k, problem, solution)`` may return a check result per radius.
    """
    radii = [float(R) for R in radii]
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise InputError("radii must be increasing")
    if radii[0] <= core_radius:
        raise InputError("the core ball must lie inside the smallest ball")

    def one(R):
        grid = PolarGrid(R, max(8, int(round(R * nodes_per_unit))), Ntheta)
        prob = DirichletProblem(geom, H, phi_inf, grid)
        return prob, solve_dirichlet(prob, config)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            pairs = list(pool.map(one, radii))
    else:
        pairs = [one(R) for R in radii]
    sols = [s for _, s in pairs]
    g0 = sols[0].grid
    core_r = g0.r[g0.r < core_radius]
    core = [_core_values(s, core_r, core_radius) for s in sols]
    diffs = [float(np.max(np.abs(b - a))) for a, b in zip(core, core[1:])]
    report = ExhaustionReport(radii, sols, diffs, core_radius)
    if pinching is not None:
        report.pinching = [pinching(k, p, s) for k, (p, s) in enumerate(pairs)]
    return report
