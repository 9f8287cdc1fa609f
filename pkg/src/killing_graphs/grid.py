"""Polar grids over geodesic balls and fields sampled on them."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InputError


@dataclass(frozen=True)
class PolarGrid:
    """Cell-centred polar grid on B(o, R).

    Radial nodes sit at (i + 1/2) R / Nr, so none lies on the pole; the
    Dirichlet ring is the circle r = R. Unknowns are ordered with the angular
    index innermost: ``k = i * Ntheta + j``.
    """

    R: float
    Nr: int
    Ntheta: int

    def __post_init__(self):
        if not self.R > 0:
            raise InputError("grid radius must be positive")
        if self.Nr < 8 or self.Ntheta < 8 or self.Ntheta % 2:
            raise InputError("need Nr >= 8 and an even Ntheta >= 8")

    @property
    def dr(self):
        return self.R / self.Nr

    @property
    def dtheta(self):
        return 2 * math.pi / self.Ntheta

    @property
    def r(self):
        return (np.arange(self.Nr) + 0.5) * self.dr

    @property
    def theta(self):
        return np.arange(self.Ntheta) * self.dtheta

    @property
    def face_r(self):
        """Outer face radius of every cell; the last one is R."""
        return (np.arange(self.Nr) + 1.0) * self.dr

    @property
    def shape(self):
        return (self.Nr, self.Ntheta)

    @property
    def size(self):
        return self.Nr * self.Ntheta

    def mesh(self):
        return np.meshgrid(self.r, self.theta, indexing="ij")

    def node(self, k):
        """(i, j) of the flat unknown index k."""
        return divmod(int(k), self.Ntheta)

    def node_xy(self):
        rr, tt = self.mesh()
        return rr * np.cos(tt), rr * np.sin(tt)


@dataclass(eq=False)
class DiscreteField:
    """One value per grid node plus an optional Dirichlet ring at r = R."""

    grid: PolarGrid
    values: np.ndarray
    boundary: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.array(self.values, dtype=float).reshape(self.grid.shape)
        if not np.all(np.isfinite(self.values)):
            raise InputError("field values must be finite")
        if self.boundary is not None:
            self.boundary = np.array(self.boundary, dtype=float).reshape(-1)
            if self.boundary.size != self.grid.Ntheta:
                raise InputError("boundary ring must have Ntheta entries")
            if not np.all(np.isfinite(self.boundary)):
                raise InputError("boundary values must be finite")

    def copy(self):
        b = None if self.boundary is None else self.boundary.copy()
        return DiscreteField(self.grid, self.values.copy(), b, dict(self.meta))

    @classmethod
    def from_function(cls, grid, fn, with_boundary=True):
        """Sample ``fn(r, theta)`` at the nodes and on the ring r = R."""
        rr, tt = grid.mesh()
        vals = np.broadcast_to(fn(rr, tt), grid.shape)
        bnd = None
        if with_boundary:
            bnd = np.broadcast_to(fn(np.full(grid.Ntheta, grid.R), grid.theta),
                                  (grid.Ntheta,))
        return cls(grid, vals, bnd)


def evaluate_on_grid(H, grid: PolarGrid, *, boundary=False):
    """Values of a mean curvature specification at the nodes of ``grid``.

    ``H`` may be a number, a radial profile, a :class:`DiscreteField` on the
    same grid or a callable ``H(r, theta)``.
    """
    from .geometry import RadialFunction

    if boundary:
        r = np.full(grid.Ntheta, grid.R)
        t = grid.theta
    else:
        r, t = grid.mesh()
    if isinstance(H, DiscreteField):
        if H.grid != grid:
            raise InputError("field lives on a different grid")
        if boundary:
            if H.boundary is None:
                raise InputError("field has no boundary ring")
            out = H.boundary.copy()
        else:
            out = H.values.copy()
    elif isinstance(H, RadialFunction):
        out = np.asarray(H(r), dtype=float)
    elif callable(H):
        out = np.broadcast_to(np.asarray(H(r, t), dtype=float), np.shape(r)).copy()
    else:
        out = np.full(np.shape(r), float(H))
    if not np.all(np.isfinite(out)):
        raise InputError("mean curvature samples must be finite")
    return out


def sample_on_ball(H, R, samples=2000, n_theta=32):
    """Flattened (r, theta, value) samples of ``H`` on B(o, R)."""
    from .geometry import RadialFunction

    if isinstance(H, DiscreteField):
        rr, tt = H.grid.mesh()
        keep = rr <= R * (1 + 1e-12)
        r, t, v = rr[keep], tt[keep], H.values[keep]
    else:
        r1 = (np.arange(samples) + 0.5) * (R / samples)
        if isinstance(H, RadialFunction):
            r, t, v = r1, np.zeros_like(r1), np.asarray(H(r1), dtype=float)
        elif callable(H):
            th = np.arange(n_theta) * (2 * math.pi / n_theta)
            rr, tt = np.meshgrid(r1, th, indexing="ij")
            r, t = rr.ravel(), tt.ravel()
            v = np.broadcast_to(np.asarray(H(r, t), dtype=float), r.shape)
        else:
            r, t, v = r1, np.zeros_like(r1), np.full_like(r1, float(H))
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise InputError("mean curvature samples must be finite")
    return np.asarray(r, float), np.asarray(t, float), v
