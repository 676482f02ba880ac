"""Thomas-Fermi minimizer rho = [mu - V]_+ / (8 pi g) and its energy."""
from __future__ import annotations

from dataclasses import dataclass
from math import pi

import numpy as np

from .core import ParameterError, TrapPotential, _check_dimension, simpson_integral, sphere_area

QUAD_POINTS = 4001


@dataclass(frozen=True)
class TfState:
    trap: TrapPotential
    dimension: int
    particle_number: float
    coupling: float
    chemical_potential: float
    support_radius: float
    energy: float
    mu_closed_form: float | None = None

    @property
    def N(self) -> float:
        return self.particle_number

    @property
    def g(self) -> float:
        return self.coupling

    def density(self, r):
        r = np.asarray(r, dtype=float)
        rho = np.maximum(self.chemical_potential - self.trap(r), 0.0) / (8.0 * pi * self.coupling)
        if self.trap.is_homogeneous:
            rho = np.where(r < self.support_radius, rho, 0.0)
        return rho

    def mean_density(self) -> float:
        """(1/N) int rho^2, the TF analogue of the mean GP density."""
        r = self.quadrature_nodes()
        S = sphere_area(self.dimension)
        rho = self.density(r)
        return S * simpson_integral(rho**2 * r ** (self.dimension - 1), r) / self.particle_number

    def quadrature_nodes(self, n: int = QUAD_POINTS) -> np.ndarray:
        return np.linspace(0.0, self.support_radius, n)


def _support(trap: TrapPotential, mu: float) -> float:
    if trap.is_homogeneous:
        return (mu / trap.c) ** (1.0 / trap.s)
    rs, vs = trap.table
    slope = (vs[-1] - vs[-2]) / (rs[-1] - rs[-2])
    if mu <= vs[-1]:
        # last tabulated radius where V < mu
        above = np.nonzero(vs >= mu)[0]
        return float(rs[above[-1]]) if len(above) else float(rs[-1])
    if slope <= 0:
        raise ParameterError("table", "tabulated trap must grow beyond its last sample")
    return float(rs[-1] + (mu - vs[-1]) / slope)


def _moments(trap: TrapPotential, D: int, mu: float, n: int = QUAD_POINTS):
    """Return g * (int rho, int (V rho + 4 pi g rho^2)) by Simpson on [0, R_s].

    Multiplying through by g keeps the integrals finite for tiny couplings.
    """
    R = _support(trap, mu)
    r = np.linspace(0.0, R, n)
    excess = np.maximum(mu - trap(r), 0.0)
    S = sphere_area(D)
    rD = r ** (D - 1)
    g_norm = S * simpson_integral(excess * rD, r) / (8.0 * pi)
    g_energy = S * simpson_integral((trap(r) * excess / (8.0 * pi) + excess**2 / (16.0 * pi)) * rD, r)
    return g_norm, g_energy


def tf_mu_closed_form(s: float, c: float, D: int, N: float, g: float) -> float:
    """mu^TF for V = c r^s from N = S_D s mu^(1+D/s) / (8 pi g D (D+s) c^(D/s))."""
    S = sphere_area(D)
    pref = S * s / (8.0 * pi * g * D * (D + s)) * c ** (-D / s)
    return (N / pref) ** (s / (s + D))


def tf_energy_closed_form(s: float, c: float, D: int, N: float, g: float) -> float:
    """E^TF = N mu (D+s)/(D+2s) for V = c r^s."""
    return N * tf_mu_closed_form(s, c, D, N, g) * (D + s) / (D + 2.0 * s)


def solve_tf(trap: TrapPotential, N: float, g: float, D: int, max_iter: int = 200, rtol: float = 1e-13) -> TfState:
    """Find mu^TF by bisection on the normalization and evaluate E^TF.

    The normalization is integrated on a grid aligned with the support edge.
    For homogeneous traps the closed-form mu is recorded alongside for
    cross-checking.
    """
    D = _check_dimension(D)
    if not N > 0:
        raise ParameterError("N", f"particle number must be positive, got {N!r}")
    if not g > 0:
        raise ParameterError("g", f"TF theory needs g > 0, got {g!r}")

    target = N * g
    lo, hi = 0.0, 1.0
    while _moments(trap, D, hi)[0] < target:
        lo, hi = hi, 2.0 * hi
    while lo == 0.0 and _moments(trap, D, 0.5 * hi)[0] >= target and hi > 1e-300:
        hi *= 0.5
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if _moments(trap, D, mid)[0] < target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= rtol * hi:
            break
    mu = 0.5 * (lo + hi)
    energy = _moments(trap, D, mu)[1] / g
    closed = tf_mu_closed_form(trap.s, trap.c, D, N, g) if trap.is_homogeneous else None
    return TfState(
        trap=trap,
        dimension=D,
        particle_number=float(N),
        coupling=float(g),
        chemical_potential=mu,
        support_radius=_support(trap, mu),
        energy=energy,
        mu_closed_form=closed,
    )


def rescaled_tf_profile(s: float, D: int) -> TfState:
    """Unit TF state: N = 1, g = 1, trap W = |x|^s."""
    if not s > 0:
        raise ParameterError("s", f"trap order must be positive, got {s!r}")
    return solve_tf(TrapPotential(s=s, c=1.0), 1.0, 1.0, D)


def tf_scale_factors(gamma_: float, s: float, D: int):
    """(length, density) factors with rho_{N,g}(x) = N dens * rho~(x / length)."""
    return gamma_ ** (1.0 / (s + D)), gamma_ ** (-D / (s + D))
