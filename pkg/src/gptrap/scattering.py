"""Zero-energy two-body scattering and the scattering length.

The relative-motion equation in hbar = 2m = 1 units is

    -2 f'' - 2 (D-1)/r f' + v f = 0,

whose outer solution is A (1 - a/r) in 3D and A ln(r/a) in 2D.  The profile
is normalized so that A = 1.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import ceil

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .core import ConvergenceError, PairPotential, ParameterError, _check_dimension

MIN_STEPS_IN_RANGE = 200


@dataclass(frozen=True, eq=False)
class ScatteringSolution:
    dimension: int
    potential: PairPotential
    r: np.ndarray = field(repr=False)
    f0: np.ndarray = field(repr=False)
    df0: np.ndarray = field(repr=False)
    scattering_length: float
    match_radius: float
    fit_residual: float

    @property
    def a(self) -> float:
        return self.scattering_length

    def _spline(self):
        spl = self.__dict__.get("_spl")
        if spl is None:
            spl = CubicHermiteSpline(self.r, self.f0, self.df0)
            object.__setattr__(self, "_spl", spl)
        return spl

    def tail(self, r):
        """Fitted asymptote (A = 1) at radii ``r``."""
        r = np.asarray(r, dtype=float)
        if self.dimension == 3:
            return 1.0 - self.scattering_length / r
        return np.log(r / self.scattering_length)

    def derivatives(self, r):
        """Return f0, f0' and f0'' at radii ``r``.

        Inside the potential range the stored profile is interpolated with a
        cubic Hermite spline and f0'' comes from the ODE itself; beyond the
        range the exact free solution is used.
        """
        r = np.asarray(r, dtype=float)
        D, a, R = self.dimension, self.scattering_length, self.potential.range
        f = np.empty_like(r)
        d1 = np.empty_like(r)
        d2 = np.empty_like(r)
        out = r >= R
        ro = r[out]
        if D == 3:
            f[out] = 1.0 - a / ro
            d1[out] = a / ro**2
            d2[out] = -2.0 * a / ro**3
        else:
            f[out] = np.log(ro / a)
            d1[out] = 1.0 / ro
            d2[out] = -1.0 / ro**2
        inn = ~out
        if np.any(inn):
            ri = r[inn]
            if self.potential.kind == "hard_core":
                f[inn] = 0.0
                d1[inn] = 0.0
                d2[inn] = 0.0
            else:
                spl = self._spline()
                fi = spl(ri)
                qi = spl(ri, 1)
                vi = self.potential(ri)
                with np.errstate(divide="ignore", invalid="ignore"):
                    lap = np.where(ri > 0, (D - 1) * qi / ri, 0.0)
                    d2i = 0.5 * vi * fi - lap
                # r = 0: f'' = v f / (2D)
                d2i = np.where(ri > 0, d2i, vi * fi / (2 * D))
                f[inn] = fi
                d1[inn] = qi
                d2[inn] = d2i
        return f, d1, d2

    def __call__(self, r):
        return self.derivatives(r)[0]


def _rhs(D, r, f, q, v):
    if r == 0.0:
        return q, v * f / (2 * D)
    return q, 0.5 * v * f - (D - 1) * q / r


def _integrate(D, v: PairPotential, r_start, h, n):
    """Fixed-step RK4 for (f, f').  Steps never straddle the potential range."""
    r = r_start + h * np.arange(n)
    f = np.empty(n)
    q = np.empty(n)
    if v.kind == "hard_core":
        f[0], q[0] = 0.0, 1.0
    else:
        f[0], q[0] = 1.0, 0.0
    R = v.range
    for k in range(n - 1):
        rk = r[k]
        # the range is a node, so no step straddles the discontinuity
        vin = float(v(rk + 0.5 * h)) if (v.kind != "hard_core" and rk < R) else 0.0
        if v.kind == "tabulated" and rk < R:
            # linear interpolation is continuous: evaluate v at each stage
            v0, vh, v1 = (float(v(x)) for x in (rk, rk + 0.5 * h, rk + h))
        else:
            v0 = vh = v1 = vin
        fk, qk = f[k], q[k]
        k1f, k1q = _rhs(D, rk, fk, qk, v0)
        k2f, k2q = _rhs(D, rk + 0.5 * h, fk + 0.5 * h * k1f, qk + 0.5 * h * k1q, vh)
        k3f, k3q = _rhs(D, rk + 0.5 * h, fk + 0.5 * h * k2f, qk + 0.5 * h * k2q, vh)
        k4f, k4q = _rhs(D, rk + h, fk + h * k3f, qk + h * k3q, v1)
        f[k + 1] = fk + h / 6.0 * (k1f + 2 * k2f + 2 * k3f + k4f)
        q[k + 1] = qk + h / 6.0 * (k1q + 2 * k2q + 2 * k3q + k4q)
    return r, f, q


def _fit_tail(D, r, f):
    """Least squares f = A (1 - a/r) [3D] or A ln(r/a) [2D]; returns A, a, rms."""
    if D == 3:
        basis = np.column_stack([np.ones_like(r), -1.0 / r])
        (A, Aa), *_ = np.linalg.lstsq(basis, f, rcond=None)
        a = Aa / A
        model = A * (1.0 - a / r)
    else:
        basis = np.column_stack([np.log(r), -np.ones_like(r)])
        (A, Ala), *_ = np.linalg.lstsq(basis, f, rcond=None)
        a = float(np.exp(Ala / A))
        model = A * np.log(r / a)
    rms = float(np.sqrt(np.mean((f - model) ** 2)))
    return float(A), float(a), rms


def zero_energy_profile(v: PairPotential, D: int, r_max: float, n_points: int) -> ScatteringSolution:
    """Solve the zero-energy scattering equation and extract the scattering length.

    The step is shrunk below r_max/(n_points-1) if needed so that the
    potential range falls exactly on a node; the grid then runs to at least
    ``r_max``.  The scattering length comes from a least-squares fit of the
    asymptotic form over the outer quarter of the grid.
    """
    D = _check_dimension(D)
    R = v.range
    if not r_max >= 4 * R:
        raise ParameterError("r_max", f"r_max={r_max} must be at least 4x the potential range {R}")
    if int(n_points) != n_points or n_points < 16:
        raise ParameterError("n_points", f"need at least 16 points, got {n_points!r}")
    if v.kind == "hard_core":
        r_start = R
        h = (r_max - R) / (n_points - 1)
        steps_in_range = R / h
    else:
        r_start = 0.0
        h_nominal = r_max / (n_points - 1)
        m = ceil(R / h_nominal - 1e-9)
        h = R / m
        steps_in_range = m
    if steps_in_range < MIN_STEPS_IN_RANGE:
        raise ConvergenceError(
            f"step too coarse: {steps_in_range:.0f} steps across the potential range, "
            f"need {MIN_STEPS_IN_RANGE}; raise n_points"
        )
    if v.kind != "hard_core" and np.sqrt(0.5 * v.v0) * h > 0.5:
        raise ConvergenceError(
            f"step too coarse for potential height {v.v0}: kappa*h = {np.sqrt(0.5 * v.v0) * h:.3g} > 0.5"
        )
    n = int(ceil((r_max - r_start) / h - 1e-9)) + 1
    r, f, q = _integrate(D, v, r_start, h, n)
    if not (np.all(np.isfinite(f)) and np.all(np.isfinite(q))):
        raise ConvergenceError("zero-energy integration overflowed")

    tail = slice(n - max(n // 4, 4), n)
    A, a, rms = _fit_tail(D, r[tail], f[tail])
    if not (A > 0 and a > 0):
        raise ConvergenceError(f"asymptotic fit failed (A={A}, a={a})")
    return ScatteringSolution(
        dimension=D,
        potential=v,
        r=r,
        f0=f / A,
        df0=q / A,
        scattering_length=a,
        match_radius=float(r[tail][0]),
        fit_residual=rms / A,
    )


def scattering_length(v: PairPotential, D: int, n_points: int = 4001) -> float:
    """Convenience wrapper: scattering length on a default 8x-range grid."""
    return zero_energy_profile(v, D, 8.0 * v.range, n_points).scattering_length


def scale_pair_potential(v1: PairPotential, a1: float, a: float) -> PairPotential:
    """Rescale v1 (scattering length a1) to scattering length a.

    v(r) = (a1/a)^2 v1(a1 r / a): radii stretch by a/a1, heights by (a1/a)^2.
    """
    if not a1 > 0:
        raise ParameterError("a1", f"scattering length must be positive, got {a1!r}")
    if not a > 0:
        raise ParameterError("a", f"scattering length must be positive, got {a!r}")
    if a == a1:
        return v1
    lam = a / a1
    if v1.kind == "hard_core":
        return PairPotential.hard_core(v1.r0 * lam)
    if v1.kind == "soft_sphere":
        return PairPotential.soft_sphere(v1.v0 / lam**2, v1.r0 * lam)
    rs, vs = v1.table
    return PairPotential.tabulated(rs * lam, vs / lam**2)


def soft_sphere_with_length(a: float, kappa_r0: float = 2.0) -> PairPotential:
    """3D soft sphere of scattering length ``a`` with fixed shape kappa*r0.

    Uses the closed-form inner solution sinh(kappa r)/r, kappa = sqrt(v0/2).
    """
    if not a > 0 or not kappa_r0 > 0:
        raise ParameterError("a", "need positive scattering length and kappa*r0")
    x = kappa_r0
    r0 = a / (1.0 - np.tanh(x) / x)
    kappa = x / r0
    return PairPotential.soft_sphere(2.0 * kappa**2, r0)
