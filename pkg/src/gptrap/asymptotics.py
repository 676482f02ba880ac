"""Parameter sweeps: scaling identity, GP -> TF convergence, density collapse, diluteness."""
from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial

import numpy as np
from scipy.interpolate import CubicSpline

from .core import ParameterError, RadialGrid, TrapPotential, _check_dimension
from .coupling import diluteness, mean_gp_density
from .gp import GpOptions, GpState, grid_policy, minimize_gp
from .tf import rescaled_tf_profile, solve_tf, tf_scale_factors

__all__ = [
    "SweepRecord",
    "ScalingReport",
    "scaling_check",
    "scaling_report",
    "gp_tf_sweep",
    "tf_collapse_check",
    "diluteness_sweep",
    "grid_policy",
    "worker_count",
]

log = logging.getLogger(__name__)


def worker_count(requested: int | None = None) -> int:
    """Worker processes to use: ``requested``, capped by GPTRAP_THREADS (default 1)."""
    env = os.environ.get("GPTRAP_THREADS")
    cap = int(env) if env else 1
    n = cap if requested is None else min(int(requested), cap)
    return max(1, n)


def _pmap(fn, items, workers: int | None = None):
    items = list(items)
    n = min(worker_count(workers), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


@dataclass(frozen=True)
class SweepRecord:
    parameter_name: str
    parameter: float
    dimension: int
    N: float
    g: float
    E_gp: float
    E_tf: float
    ratio: float
    mu_gp: float
    mu_tf: float
    mean_density: float
    diluteness: float | None
    r_max: float
    n_points: int
    iterations: int

    def as_row(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class ScalingReport:
    N: float
    g: float
    E_Ng: float
    E_1: float
    energy_error: float
    profile_error: float


def scaling_report(N: float, g: float, trap: TrapPotential, grid: RadialGrid, opts: GpOptions | None = None) -> ScalingReport:
    """Compare E^GP(N,g) with N E^GP(1,Ng) and Phi_{N,g} with sqrt(N) Phi_{1,Ng} on one grid."""
    big = minimize_gp(trap, N, g, grid, opts)
    if N == 1:
        one = big
    else:
        one = minimize_gp(trap, 1.0, N * g, grid, opts)
    e_err = abs(big.energy_total - N * one.energy_total) / abs(big.energy_total)
    diff = np.abs(big.phi - np.sqrt(N) * one.phi)
    p_err = float(diff.max() / big.phi.max())
    return ScalingReport(float(N), float(g), big.energy_total, one.energy_total, float(e_err), p_err)


def scaling_check(N: float, g: float, trap: TrapPotential, grid: RadialGrid, opts: GpOptions | None = None) -> float:
    """Relative error |E(N,g) - N E(1,Ng)| / E(N,g)."""
    return scaling_report(N, g, trap, grid, opts).energy_error


def _sweep_point(Ng, trap, D, points_per_unit, opts, refine):
    grid = grid_policy(trap, D, 1.0, Ng, points_per_unit)
    if refine != 1:
        grid = grid.with_points((grid.n_points - 1) * refine + 1)
    gp = minimize_gp(trap, 1.0, Ng, grid, opts)
    tf = solve_tf(trap, 1.0, Ng, D)
    return SweepRecord(
        parameter_name="Ng",
        parameter=float(Ng),
        dimension=D,
        N=1.0,
        g=float(Ng),
        E_gp=gp.energy_total,
        E_tf=tf.energy,
        ratio=gp.energy_total / tf.energy,
        mu_gp=gp.chemical_potential,
        mu_tf=tf.chemical_potential,
        mean_density=mean_gp_density(gp),
        diluteness=None,
        r_max=grid.r_max,
        n_points=grid.n_points,
        iterations=gp.iterations,
    )


def gp_tf_sweep(
    trap: TrapPotential,
    D: int,
    Ng_list,
    points_per_unit: float = 400.0,
    opts: GpOptions | None = None,
    refine: int = 1,
    workers: int | None = None,
) -> list[SweepRecord]:
    """E^GP(1,Ng) against E^TF(1,Ng) along increasing Ng.

    Each point gets its own grid from :func:`grid_policy`; ``refine``
    multiplies the number of intervals (for discretization checks).
    """
    D = _check_dimension(D)
    Ng_list = [float(x) for x in Ng_list]
    if not Ng_list or any(x <= 0 for x in Ng_list):
        raise ParameterError("Ng", "need a nonempty list of positive Ng values")
    if any(b <= a for a, b in zip(Ng_list, Ng_list[1:])):
        raise ParameterError("Ng", "Ng values must be strictly increasing")
    fn = partial(_sweep_point, trap=trap, D=D, points_per_unit=points_per_unit, opts=opts, refine=refine)
    records = _pmap(fn, Ng_list, workers)
    for r in records:
        log.info("Ng=%g E_gp=%.12g E_tf=%.12g ratio-1=%.3e", r.parameter, r.E_gp, r.E_tf, r.ratio - 1)
    return records


def _collapse_nodes(D: int, s: float, n: int = 201) -> tuple[np.ndarray, np.ndarray]:
    unit = rescaled_tf_profile(s, D)
    x = np.linspace(0.0, unit.support_radius, n)[:-1]
    return x, unit.density(x)


def _gp_density_at(state: GpState, r):
    grid = state.grid
    spl = CubicSpline(grid.r, state.phi**2, bc_type=((1, 0.0), "not-a-knot"))
    return spl(np.asarray(r))


def tf_collapse_check(
    s: float,
    D: int,
    gamma_list,
    kind: str = "tf",
    N: float = 1.0,
    points_per_unit: float = 400.0,
    opts: GpOptions | None = None,
) -> list[float]:
    """Max deviation of the rescaled density from the unit TF profile, per gamma.

    With gamma = Ng, lengths scale by gamma^(1/(s+D)) and densities by
    gamma^(-D/(s+D)); the rescaled density
    gamma^(D/(s+D))/N * rho(gamma^(1/(s+D)) x) is compared with rho~(x) on
    interior points of the unit support.  Deviations are relative to
    max rho~.  ``kind="gp"`` uses the GP density instead of the TF one.
    """
    D = _check_dimension(D)
    if kind not in ("tf", "gp"):
        raise ParameterError("kind", f"unknown density kind {kind!r}")
    trap = TrapPotential(s=s, c=1.0)
    x, ref = _collapse_nodes(D, s)
    peak = ref.max()
    out = []
    for gam in gamma_list:
        if not gam > 0:
            raise ParameterError("gamma", f"gamma must be positive, got {gam!r}")
        g = gam / N
        length, dens = tf_scale_factors(gam, s, D)
        if kind == "tf":
            rho = solve_tf(trap, N, g, D).density(length * x)
        else:
            grid = grid_policy(trap, D, N, g, points_per_unit)
            rho = _gp_density_at(minimize_gp(trap, N, g, grid, opts), length * x)
        scaled = rho / (N * dens)
        out.append(float(np.max(np.abs(scaled - ref)) / peak))
    return out


def diluteness_sweep(
    trap: TrapPotential,
    Ng: float,
    N_list,
    D: int = 3,
    points_per_unit: float = 400.0,
    opts: GpOptions | None = None,
) -> list[SweepRecord]:
    """GP-case bookkeeping: fixed Ng, growing N, a = g = Ng/N in 3D.

    The ``diluteness`` field holds a^D rho_bar (rho_bar the mean GP density);
    a^3 rho_bar N^2 should stay constant along the sweep.
    """
    D = _check_dimension(D)
    if D != 3:
        raise ParameterError("dim", "the a ~ 1/N bookkeeping is the 3D GP case")
    records = []
    grid = grid_policy(trap, D, 1.0, Ng, points_per_unit)
    tf1 = solve_tf(trap, 1.0, Ng, D)
    for N in N_list:
        g = Ng / N
        gp = minimize_gp(trap, N, g, grid, opts)
        rho = mean_gp_density(gp)
        records.append(
            SweepRecord(
                parameter_name="N",
                parameter=float(N),
                dimension=D,
                N=float(N),
                g=float(g),
                E_gp=gp.energy_total,
                E_tf=N * tf1.energy,
                ratio=gp.energy_total / (N * tf1.energy),
                mu_gp=gp.chemical_potential,
                mu_tf=tf1.chemical_potential,
                mean_density=rho,
                diluteness=diluteness(g, rho, D),
                r_max=grid.r_max,
                n_points=grid.n_points,
                iterations=gp.iterations,
            )
        )
    return records
