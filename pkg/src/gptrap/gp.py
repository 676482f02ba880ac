"""Gross-Pitaevskii minimization on a radial grid.

The discrete functional is

    E[phi] = sum_k c_{k+1/2} (phi_{k+1} - phi_k)^2
             + sum_k w_k V(r_k) phi_k^2 + 4 pi g sum_k w_k phi_k^4,

with c_{k+1/2} = S_D r_{k+1/2}^(D-1) / h (midpoint rule for the gradient term)
and w_k the grid quadrature weights, minimized under sum_k w_k phi_k^2 = N
with phi = 0 at r_max.  Its stationarity condition is the symmetric
discretization of -Lap phi + V phi + 8 pi g phi^3 = mu phi with phi'(0) = 0.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from math import pi

import numpy as np
from scipy.linalg import solveh_banded

from .core import (
    ConvergenceError,
    GridTooSmallError,
    ParameterError,
    RadialGrid,
    TrapPotential,
    sphere_area,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GpOptions:
    energy_tol: float = 1e-12
    residual_tol: float = 1e-9
    max_iters: int = 200_000
    dt_initial: float = 0.1
    dt_max: float = 1e3
    boundary_tol: float = 1e-12
    record_history: bool = False


@dataclass(frozen=True, eq=False)
class GpState:
    grid: RadialGrid
    trap: TrapPotential
    phi: np.ndarray = field(repr=False)
    particle_number: float
    coupling: float
    energy_kinetic: float
    energy_trap: float
    energy_interaction: float
    chemical_potential: float
    residual: float
    iterations: int
    last_energy_change: float = 0.0
    energy_history: np.ndarray | None = field(default=None, repr=False)

    @property
    def energy_total(self) -> float:
        return self.energy_kinetic + self.energy_trap + self.energy_interaction

    @property
    def N(self) -> float:
        return self.particle_number

    @property
    def g(self) -> float:
        return self.coupling

    @property
    def density(self) -> np.ndarray:
        return self.phi**2


def _stiffness(grid: RadialGrid) -> np.ndarray:
    D = grid.dimension
    return sphere_area(D) * grid.midpoints ** (D - 1) / grid.h


def _check_profile(phi, grid):
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (grid.n_points,):
        raise ParameterError("phi", f"profile length {phi.shape} does not match grid ({grid.n_points},)")
    return phi


def gp_energy_breakdown(phi, trap: TrapPotential, g: float, grid: RadialGrid):
    """Kinetic, trap and interaction parts of the discrete GP energy.

    Gradients are central differences at the half-nodes, integrated with the
    midpoint rule; the potential terms use the grid quadrature.
    """
    phi = _check_profile(phi, grid)
    w = grid.weights
    kinetic = float(np.dot(_stiffness(grid), np.diff(phi) ** 2))
    trap_e = float(np.dot(w * trap(grid.r), phi**2))
    interaction = 4.0 * pi * g * float(np.dot(w, phi**4)) if g != 0 else 0.0
    return kinetic, trap_e, interaction


def gp_energy(phi, trap: TrapPotential, g: float, grid: RadialGrid) -> float:
    return sum(gp_energy_breakdown(phi, trap, g, grid))


def chemical_potential(state: GpState) -> float:
    """mu = (E + E_int) / N, the Lagrange multiplier of the normalization."""
    if not state.particle_number > 0:
        raise ParameterError("N", "state has no particles")
    return (state.energy_total + state.energy_interaction) / state.particle_number


def _apply_hamiltonian(phi, V, g, grid, c):
    """K phi + W (V + 8 pi g phi^2) phi, the weighted (not divided) form."""
    kphi = np.zeros_like(phi)
    d = np.diff(phi)
    kphi[:-1] -= c * d
    kphi[1:] += c * d
    return kphi + grid.weights * (V + 8.0 * pi * g * phi**2) * phi


def euler_lagrange_residual(phi, trap: TrapPotential, g: float, grid: RadialGrid, mu: float) -> float:
    """Relative grid 2-norm of -Lap phi + V phi + 8 pi g phi^3 - mu phi on interior nodes."""
    phi = _check_profile(phi, grid)
    w = grid.weights
    hphi = _apply_hamiltonian(phi, trap(grid.r), g, grid, _stiffness(grid))
    inner = slice(1, grid.n_points - 1)
    res = hphi[inner] / w[inner] - mu * phi[inner]
    num = np.sqrt(np.dot(w[inner], res**2))
    den = np.sqrt(np.dot(w[inner], (mu * phi[inner]) ** 2))
    return float(num / den) if den > 0 else float(num)


def gaussian_guess(grid: RadialGrid, N: float) -> np.ndarray:
    phi = np.exp(-0.5 * grid.r**2)
    phi[-1] = 0.0
    return phi * np.sqrt(N / np.dot(grid.weights, phi**2))


def boundary_ratio(phi, grid: RadialGrid) -> float:
    """Integrand phi^2 r^(D-1) at the last free node relative to its peak."""
    dens = phi**2 * grid.r ** (grid.dimension - 1)
    peak = dens.max()
    return float(dens[-2] / peak) if peak > 0 else 0.0


def minimize_gp(
    trap: TrapPotential,
    N: float,
    g: float,
    grid: RadialGrid,
    opts: GpOptions | None = None,
    initial=None,
) -> GpState:
    """Minimize the GP functional under sum w phi^2 = N by normalized gradient flow.

    Each step solves (W + dt (K + W (V + 8 pi g phi_n^2))) phi* = W phi_n
    (backward Euler with the density lagged one step) and rescales phi* to
    norm N.  A step that raises the energy is rejected and dt halved;
    accepted steps grow dt by 1.1 up to ``opts.dt_max``.

    Raises
    ------
    ConvergenceError
        if the flow has not met both the energy and residual tolerances
        within ``opts.max_iters`` steps.
    GridTooSmallError
        if the converged density has not decayed at r_max.
    """
    opts = opts or GpOptions()
    if not N > 0:
        raise ParameterError("N", f"particle number must be positive, got {N!r}")
    if not g >= 0:
        raise ParameterError("g", f"coupling must be nonnegative, got {g!r}")

    n = grid.n_points
    m = n - 1  # phi[n-1] = 0
    w = grid.weights
    V = trap(grid.r)
    c = _stiffness(grid)
    kd = np.zeros(m)
    kd += c[:m]
    kd[1:] += c[: m - 1]
    ko = -c[: m - 1]

    phi = gaussian_guess(grid, N) if initial is None else _check_profile(initial, grid).copy()
    phi[-1] = 0.0
    phi *= np.sqrt(N / np.dot(w, phi**2))
    E = gp_energy(phi, trap, g, grid)
    history = [E] if opts.record_history else None

    dt = opts.dt_initial
    ab = np.zeros((2, m))
    dE = np.inf
    it = 0
    while True:
        if it >= opts.max_iters:
            raise ConvergenceError(
                f"GP flow not converged after {it} steps (last dE/E = {dE:.3g}, N={N}, g={g})"
            )
        it += 1
        U = V[:m] + 8.0 * pi * g * phi[:m] ** 2
        ab[1] = w[:m] + dt * (kd + w[:m] * U)
        ab[0, 1:] = dt * ko
        new = np.zeros(n)
        new[:m] = solveh_banded(ab, w[:m] * phi[:m], check_finite=False)
        new *= np.sqrt(N / np.dot(w, new**2))
        E_new = gp_energy(new, trap, g, grid)
        if E_new > E + 1e-14 * abs(E):
            dt *= 0.5
            if dt < 1e-14:
                raise ConvergenceError("GP flow step size underflow")
            continue
        dE = abs(E - E_new) / max(abs(E_new), 1e-300)
        phi, E = new, E_new
        if history is not None:
            history.append(E)
        dt = min(1.1 * dt, opts.dt_max)
        if dE < opts.energy_tol:
            kin, tr, inter = gp_energy_breakdown(phi, trap, g, grid)
            mu = (kin + tr + 2 * inter) / N
            res = euler_lagrange_residual(phi, trap, g, grid, mu)
            if res < opts.residual_tol:
                break

    ratio = boundary_ratio(phi, grid)
    if ratio > opts.boundary_tol:
        raise GridTooSmallError(
            f"density at r_max={grid.r_max} is {ratio:.3g} of its peak (> {opts.boundary_tol:g}); enlarge r_max"
        )
    log.debug("GP converged: N=%g g=%g E=%.15g in %d steps", N, g, E, it)
    return GpState(
        grid=grid,
        trap=trap,
        phi=phi,
        particle_number=float(N),
        coupling=float(g),
        energy_kinetic=kin,
        energy_trap=tr,
        energy_interaction=inter,
        chemical_potential=mu,
        residual=res,
        iterations=it,
        last_energy_change=dE,
        energy_history=None if history is None else np.array(history),
    )


def grid_policy(trap: TrapPotential, D: int, N: float, g: float, points_per_unit: float = 400.0) -> RadialGrid:
    """Radial grid wide enough for the GP minimizer at (N, g).

    r_max covers 1.5 TF support radii plus two healing lengths (capped at
    the free extent), and never less than the extent where a noninteracting
    ground state has decayed.
    The spacing also resolves a twentieth of the healing length.
    """
    from .core import build_radial_grid
    from .tf import solve_tf

    if trap.is_homogeneous:
        p = 1.0 + 0.5 * trap.s
        free = trap.c ** (-1.0 / (trap.s + 2.0)) * (1.3 * (15.0 * p) ** (1.0 / p) + 1.0)
    else:
        rs = trap.table[0]
        free = float(rs[-1])
    r_max = free
    ppu = points_per_unit
    if g > 0:
        tf = solve_tf(trap, N, g, D)
        # g rho_bar = int (mu-V)_+^2 / (8 pi int (mu-V)_+), free of 1/g overflow
        r = tf.quadrature_nodes()
        excess = np.maximum(tf.chemical_potential - trap(r), 0.0) * r ** (D - 1)
        g_rho = np.dot(excess, tf.chemical_potential - trap(r)) / (8.0 * pi * excess.sum())
        healing = (8.0 * pi * g_rho) ** -0.5 if g_rho > 0 else np.inf
        # at weak coupling the healing length diverges; the free extent then suffices
        r_max = max(r_max, 1.5 * tf.support_radius + min(2.0 * healing, free))
        ppu = max(ppu, 20.0 / healing)
    n = int(np.ceil(ppu * r_max)) + 1
    return build_radial_grid(D, r_max, max(n, 16))
