"""GP coupling constant from the scattering length, and diluteness diagnostics.

g = a in 3D.  In 2D, g = 1/|ln(a^2 rho_bar)| where rho_bar is the mean
density of the minimizer at that same g, so g is a fixed point.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from math import pi

import numpy as np

from .core import ConvergenceError, ParameterError, RadialGrid, TrapPotential, _check_dimension, radial_integral
from .gp import GpOptions, GpState, grid_policy, minimize_gp
from .tf import solve_tf

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CouplingReport:
    dimension: int
    a: float
    g: float
    mean_density: float
    particle_number: float
    iterations: int = 0
    fixed_point_residual: float = 0.0
    density_source: str = "gp"

    @property
    def Ng(self) -> float:
        return self.particle_number * self.g

    @property
    def diluteness(self) -> float:
        return diluteness(self.a, self.mean_density, self.dimension)


def mean_gp_density(state: GpState) -> float:
    """rho_bar = (1/N) int |phi|^4."""
    return radial_integral(state.phi**4, state.grid) / state.particle_number


def diluteness(a: float, rho_bar: float, D: int) -> float:
    if a < 0 or rho_bar < 0:
        raise ParameterError("a", "scattering length and density must be nonnegative")
    return a**D * rho_bar


def homogeneous_energy_density(rho: float, a: float, D: int) -> float:
    """Dilute-limit ground-state energy density of the homogeneous gas.

    4 pi a rho^2 in 3D and 4 pi rho^2 / |ln(a^2 rho)| in 2D.
    """
    D = _check_dimension(D)
    if not rho > 0:
        raise ParameterError("rho", f"density must be positive, got {rho!r}")
    if not a > 0:
        raise ParameterError("a", f"scattering length must be positive, got {a!r}")
    if D == 3:
        return 4.0 * pi * a * rho**2
    x = a * a * rho
    if x >= 1.0:
        raise ParameterError("a", f"not dilute: a^2 rho = {x:.3g} >= 1")
    return 4.0 * pi * rho**2 / abs(np.log(x))


def _g_from(a, rho_bar):
    x = a * a * rho_bar
    if not x < 1.0:
        raise ParameterError("a", f"diluteness violated: a^2 rho_bar = {x:.3g} >= 1")
    return float(1.0 / abs(np.log(x)))


def coupling_constant(
    D: int,
    a: float,
    trap: TrapPotential,
    N: float,
    tol: float = 1e-10,
    grid: RadialGrid | None = None,
    density_source: str = "gp",
    max_iter: int = 100,
    gp_opts: GpOptions | None = None,
) -> CouplingReport:
    """Coupling g for scattering length ``a``.

    ``density_source="tf"`` evaluates rho_bar on the TF minimizer instead of
    the GP one (2D only; both agree to leading order).  The 2D iteration
    starts from rho_bar of the g = 1 minimizer and switches to 0.5 damping
    if the increments alternate in sign.
    """
    D = _check_dimension(D)
    if not a > 0:
        raise ParameterError("a", f"scattering length must be positive, got {a!r}")
    if not N > 0:
        raise ParameterError("N", f"particle number must be positive, got {N!r}")
    if density_source not in ("gp", "tf"):
        raise ParameterError("density_source", f"expected 'gp' or 'tf', got {density_source!r}")

    phi_cache = {}

    def rho_bar(g):
        if density_source == "tf":
            return solve_tf(trap, N, g, D).mean_density()
        gr = grid if grid is not None else grid_policy(trap, D, N, max(g, 1.0))
        prev = phi_cache.get(gr)
        state = minimize_gp(trap, N, g, gr, gp_opts, initial=prev)
        phi_cache[gr] = state.phi
        return mean_gp_density(state)

    if D == 3:
        rb = rho_bar(a) if density_source == "gp" else solve_tf(trap, N, a, D).mean_density()
        return CouplingReport(3, a, a, rb, float(N), density_source=density_source)

    g = _g_from(a, rho_bar(1.0))
    damping = 1.0
    last_step = 0.0
    for k in range(1, max_iter + 1):
        rb = rho_bar(g)
        g_new = (1.0 - damping) * g + damping * _g_from(a, rb)
        step = g_new - g
        res = float(abs(step) / g)
        log.debug("2D coupling iteration %d: g=%.15g residual=%.3g", k, g_new, res)
        if last_step * step < 0 and damping == 1.0:
            damping = 0.5
        last_step = step
        g = g_new
        if res < tol:
            return CouplingReport(2, a, g, rb, float(N), k, res, density_source)
    raise ConvergenceError(f"2D coupling fixed point not converged in {max_iter} iterations (a={a})")
