"""Radial grids, quadrature, trap and pair potentials.

Units throughout are hbar = 2m = 1, lengths in trap units.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from math import gamma, pi

import numpy as np


class GpTrapError(Exception):
    """Base class for library errors."""


class ParameterError(GpTrapError, ValueError):
    """A physical or numerical parameter violates a precondition.

    ``key`` names the offending parameter so callers (the CLI) can report it.
    """

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key
        self.message = message


class ConvergenceError(GpTrapError, RuntimeError):
    """An iterative solver failed to reach its tolerance."""


class GridTooSmallError(ConvergenceError):
    """The profile has not decayed at the outer grid edge; r_max must grow."""


def sphere_area(D: int) -> float:
    """Surface area of the unit sphere in R^D (2*pi for D=2, 4*pi for D=3)."""
    return 2.0 * pi ** (D / 2) / gamma(D / 2)


def _check_dimension(D) -> int:
    if D not in (2, 3):
        raise ParameterError("dim", f"dimension must be 2 or 3, got {D!r}")
    return int(D)


@dataclass(frozen=True)
class RadialGrid:
    """Uniform radial grid r_k = k*h, k = 0..n_points-1, on [0, r_max]."""

    dimension: int
    r_max: float
    n_points: int

    @property
    def h(self) -> float:
        return self.r_max / (self.n_points - 1)

    @cached_property
    def r(self) -> np.ndarray:
        r = np.arange(self.n_points) * self.h
        r[-1] = self.r_max
        r.flags.writeable = False
        return r

    @cached_property
    def weights(self) -> np.ndarray:
        """Quadrature weights for S_D * int f(r) r^(D-1) dr.

        Trapezoid on f*r^(D-1) plus the Euler-Maclaurin end correction at the
        origin for radially smooth (even) profiles: the r^(D-1) factor makes
        every odd-derivative term vanish there in 3D and leaves h^2 f(0)/12
        in 2D. The rule is O(h^4) or better for smooth profiles that decay
        before r_max, and all weights are positive.
        """
        D, h = self.dimension, self.h
        w = sphere_area(D) * self.r ** (D - 1) * h
        w[-1] *= 0.5
        w[0] = sphere_area(D) * h * h / 12.0 if D == 2 else 0.0
        w.flags.writeable = False
        return w

    @cached_property
    def midpoints(self) -> np.ndarray:
        m = (np.arange(self.n_points - 1) + 0.5) * self.h
        m.flags.writeable = False
        return m

    def with_points(self, n_points: int) -> "RadialGrid":
        return build_radial_grid(self.dimension, self.r_max, n_points)


def build_radial_grid(D: int, r_max: float, n_points: int) -> RadialGrid:
    D = _check_dimension(D)
    if not np.isfinite(r_max) or r_max <= 0:
        raise ParameterError("r_max", f"grid extent must be positive and finite, got {r_max!r}")
    if int(n_points) != n_points or n_points < 16:
        raise ParameterError("n_points", f"need at least 16 grid points, got {n_points!r}")
    return RadialGrid(D, float(r_max), int(n_points))


def _simpson_weights(n: int, h: float) -> np.ndarray:
    w = np.ones(n)
    if (n - 1) % 2 == 0:
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        return w * h / 3.0
    # even number of intervals: trapezoid, as a fallback
    w[0] = w[-1] = 0.5
    return w * h


def radial_integral(values, grid: RadialGrid, method: str = "grid") -> float:
    """Integrate a radial profile over R^D: S_D * int f(r) r^(D-1) dr.

    ``method="grid"`` uses :attr:`RadialGrid.weights` (the rule the GP solver
    normalizes with); ``"simpson"`` uses composite Simpson on f*r^(D-1),
    falling back to the trapezoid rule for an even number of intervals.
    """
    f = np.asarray(values, dtype=float)
    if f.shape != (grid.n_points,):
        raise ParameterError(
            "values", f"profile length {f.shape} does not match grid ({grid.n_points},)"
        )
    if method == "grid":
        return float(np.dot(grid.weights, f))
    if method == "simpson":
        D = grid.dimension
        w = _simpson_weights(grid.n_points, grid.h)
        return float(sphere_area(D) * np.dot(w, f * grid.r ** (D - 1)))
    raise ParameterError("method", f"unknown quadrature {method!r}")


def simpson_integral(y, x) -> float:
    """Composite Simpson on uniform nodes ``x`` (trapezoid for even intervals)."""
    y = np.asarray(y, dtype=float)
    h = (x[-1] - x[0]) / (len(x) - 1)
    return float(np.dot(_simpson_weights(len(x), h), y))


@dataclass(frozen=True)
class TrapPotential:
    """Radial trap V(r) = c * r**s, or a tabulated radial profile.

    A tabulated trap is given as ``table=(r_samples, v_samples)`` and is
    interpolated linearly; beyond the last sample it grows as the last
    segment's slope continues. ``s`` and ``c`` are ignored in that case.
    """

    s: float = 2.0
    c: float = 1.0
    table: tuple | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.table is None:
            if not self.s > 0:
                raise ParameterError("s", f"trap order must be positive, got {self.s!r}")
            if not self.c > 0:
                raise ParameterError("c", f"trap coefficient must be positive, got {self.c!r}")
        else:
            rs, vs = (np.asarray(t, dtype=float) for t in self.table)
            if rs.ndim != 1 or rs.shape != vs.shape or len(rs) < 2 or np.any(np.diff(rs) <= 0):
                raise ParameterError("table", "need increasing radii and matching values")
            if rs[0] != 0.0:
                raise ParameterError("table", "tabulated trap must start at r=0")
            object.__setattr__(self, "table", (rs, vs))

    @property
    def is_homogeneous(self) -> bool:
        return self.table is None

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.table is None:
            return self.c * r ** self.s
        rs, vs = self.table
        out = np.interp(r, rs, vs)
        slope = (vs[-1] - vs[-2]) / (rs[-1] - rs[-2])
        return np.where(r > rs[-1], vs[-1] + slope * (r - rs[-1]), out)


def eval_trap(trap: TrapPotential, r):
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0):
        raise ParameterError("r", "radius must be non-negative")
    out = trap(r_arr)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class PairPotential:
    """Nonnegative, finite-range radial pair interaction v(r).

    Build with :meth:`hard_core`, :meth:`soft_sphere` or :meth:`tabulated`.
    """

    kind: str
    r0: float
    v0: float = 0.0
    table: tuple | None = field(default=None, compare=False)

    @classmethod
    def hard_core(cls, r0: float) -> "PairPotential":
        if not r0 > 0:
            raise ParameterError("r0", f"core radius must be positive, got {r0!r}")
        return cls("hard_core", float(r0), np.inf)

    @classmethod
    def soft_sphere(cls, v0: float, r0: float) -> "PairPotential":
        if not r0 > 0:
            raise ParameterError("r0", f"range must be positive, got {r0!r}")
        if not v0 >= 0:
            raise ParameterError("v0", f"soft-sphere height must be nonnegative, got {v0!r}")
        return cls("soft_sphere", float(r0), float(v0))

    @classmethod
    def tabulated(cls, r_samples, v_samples) -> "PairPotential":
        rs = np.asarray(r_samples, dtype=float)
        vs = np.asarray(v_samples, dtype=float)
        if rs.ndim != 1 or rs.shape != vs.shape or len(rs) < 2:
            raise ParameterError("table", "need at least two (r, v) samples of equal length")
        if rs[0] != 0.0 or np.any(np.diff(rs) <= 0):
            raise ParameterError("table", "sample radii must start at 0 and increase")
        if np.any(vs < 0) or not np.all(np.isfinite(vs)):
            raise ParameterError("table", "pair potential must be finite and nonnegative")
        rs.flags.writeable = False
        vs.flags.writeable = False
        return cls("tabulated", float(rs[-1]), float(vs.max()), (rs, vs))

    @property
    def range(self) -> float:
        return self.r0

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "hard_core":
            return np.where(r < self.r0, np.inf, 0.0)
        if self.kind == "soft_sphere":
            return np.where(r < self.r0, self.v0, 0.0)
        rs, vs = self.table
        return np.where(r <= rs[-1], np.interp(r, rs, vs), 0.0)
