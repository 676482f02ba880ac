"""Variational Monte Carlo with the Dyson-type trial function.

    Psi(x_1..x_N) = prod_i phi(x_i) * prod_{i>=2} f(t_i),
    t_i = min_{j<i} |x_i - x_j|,
    f(r) = f0(r)/f0(b) for r < b, 1 otherwise,

with phi the GP minimizer and f0 the zero-energy scattering solution.

Energy estimator
----------------
f has a kink at r = b and F = prod f(t_i) has further kinks where the
nearest earlier neighbour changes, so the usual local energy
-Lap ln Psi - |grad ln Psi|^2 misses surface (delta) terms and is biased.
Writing ln Psi = A + B (one-body and pair parts) we use

    T_i = -Lap_i A - |grad_i A|^2 + |grad_i B|^2 - Z_i,

which has the exact expectation of sum_i |grad_i ln Psi|^2.  Z is the
zero-mean control variate Z = sum_i [Lap_i G + 2 grad_i G . grad_i ln Psi]
for the smooth G = sum_{i<j} chi(r_ij) ln f(r_ij), with chi = 1 at short
range and 0 beyond b/2.  Inside the chi = 1 region it turns the pair
term back into the Laplacian form, where the scattering equation cancels
the potential sample by sample.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
import numpy as np
from scipy.interpolate import CubicSpline

from .core import ConvergenceError, PairPotential, ParameterError, TrapPotential, sphere_area
from .coupling import mean_gp_density
from .gp import GpState
from .scattering import ScatteringSolution

log = logging.getLogger(__name__)

N_BLOCKS = 32
TARGET_ACCEPTANCE = 0.5


def _smootherstep(x):
    x = np.clip(x, 0.0, 1.0)
    s = x**3 * (10.0 - 15.0 * x + 6.0 * x * x)
    ds = 30.0 * x * x * (1.0 - x) ** 2
    d2s = 60.0 * x * (1.0 - x) * (1.0 - 2.0 * x)
    return s, ds, d2s


@dataclass(frozen=True, eq=False)
class TrialFunction:
    gp: GpState
    scattering: ScatteringSolution | None
    cutoff: float
    cutoff_multiplier: float
    cv_inner: float
    cv_outer: float
    _lnphi: CubicSpline = field(repr=False)
    r_extent: float = 0.0
    _log_f0_b: float = field(default=0.0, repr=False)
    order: tuple | None = None

    @property
    def dimension(self) -> int:
        return self.gp.grid.dimension

    @property
    def has_pair_factor(self) -> bool:
        return self.scattering is not None

    # one-body factor ---------------------------------------------------
    def log_phi(self, r):
        r = np.asarray(r, dtype=float)
        out = self._lnphi(np.minimum(r, self.r_extent))
        return np.where(r <= self.r_extent, out, -np.inf)

    def log_phi_derivs(self, r):
        r = np.minimum(np.asarray(r, dtype=float), self.r_extent)
        return self._lnphi(r, 1), self._lnphi(r, 2)

    # pair factor ---------------------------------------------------------
    def log_f(self, t):
        """ln f(t): ln f0(t) - ln f0(b) below the cutoff, 0 beyond."""
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        if self.scattering is None:
            return out
        inside = t < self.cutoff
        if np.any(inside):
            f0 = self.scattering(t[inside])
            with np.errstate(divide="ignore"):
                out[inside] = np.where(f0 > 0, np.log(np.maximum(f0, 1e-300)), -np.inf) - self._log_f0_b
        return out

    def log_f_derivs(self, t):
        """(ln f, (ln f)', (ln f)'') at distances t."""
        t = np.asarray(t, dtype=float)
        l0 = np.zeros_like(t)
        l1 = np.zeros_like(t)
        l2 = np.zeros_like(t)
        if self.scattering is None:
            return l0, l1, l2
        inside = t < self.cutoff
        if np.any(inside):
            f, d1, d2 = self.scattering.derivatives(t[inside])
            with np.errstate(divide="ignore", invalid="ignore"):
                good = f > 0
                fs = np.where(good, f, 1.0)
                l0[inside] = np.where(good, np.log(fs) - self._log_f0_b, -np.inf)
                l1[inside] = np.where(good, d1 / fs, np.inf)
                l2[inside] = np.where(good, d2 / fs - (d1 / fs) ** 2, -np.inf)
        return l0, l1, l2

    def pair_factor(self, t):
        return np.exp(self.log_f(t))

    def _cv_profile(self, t):
        """psi = chi * ln f and its first two derivatives (the control-variate pair term)."""
        l0, l1, l2 = self.log_f_derivs(t)
        width = self.cv_outer - self.cv_inner
        s, ds, d2s = _smootherstep((t - self.cv_inner) / width)
        chi = 1.0 - s
        dchi = -ds / width
        d2chi = -d2s / width**2
        active = t < self.cv_outer
        with np.errstate(invalid="ignore"):
            p0 = np.where(active, chi * l0, 0.0)
            p1 = np.where(active, dchi * l0 + chi * l1, 0.0)
            p2 = np.where(active, d2chi * l0 + 2.0 * dchi * l1 + chi * l2, 0.0)
        return p0, p1, p2


def build_trial(
    gp_state: GpState,
    scattering: ScatteringSolution | None = None,
    cutoff: float | None = None,
    cutoff_multiplier: float = 1.0,
    order=None,
) -> TrialFunction:
    """Trial function from a GP minimizer and (optionally) a scattering solution.

    Without ``scattering`` the pair factor is identically 1.  The default
    cutoff is b = cutoff_multiplier * rho_bar^(-1/D).  ``order`` is a
    permutation of particle labels fixing the sequence in which the
    nearest-earlier-neighbour distances t_i are taken (input order if None).
    """
    if order is not None:
        order = tuple(int(i) for i in order)
        if sorted(order) != list(range(len(order))):
            raise ParameterError("order", "must be a permutation of 0..N-1")
    grid = gp_state.grid
    D = grid.dimension
    phi = gp_state.phi
    peak = phi.max()
    keep = np.nonzero(phi[:-1] > peak * 1e-100)[0]
    last = int(keep[-1])
    r = grid.r[: last + 1]
    lnphi = CubicSpline(r, np.log(phi[: last + 1]), bc_type=((1, 0.0), "not-a-knot"))

    if scattering is None:
        return TrialFunction(gp_state, None, np.inf, cutoff_multiplier, 0.0, 0.0, lnphi, float(r[-1]), 0.0, order)
    if scattering.dimension != D:
        raise ParameterError("scattering", "scattering solution dimension does not match the GP grid")
    if cutoff is None:
        cutoff = cutoff_multiplier * mean_gp_density(gp_state) ** (-1.0 / D)
    rng = scattering.potential.range
    if not cutoff > rng:
        raise ParameterError("cutoff", f"cutoff b={cutoff:.4g} must exceed the potential range {rng:.4g}")
    log_f0_b = float(np.log(scattering(np.array([cutoff]))[0]))
    inner = max(0.25 * cutoff, rng)
    outer = max(0.5 * cutoff, 1.5 * inner) if inner < 0.5 * cutoff else 0.5 * (inner + cutoff)
    outer = min(outer, cutoff)
    return TrialFunction(
        gp_state, scattering, float(cutoff), cutoff_multiplier, inner, outer, lnphi, float(r[-1]), log_f0_b, order
    )


@dataclass(frozen=True)
class Configuration:
    positions: np.ndarray

    def __post_init__(self):
        x = np.array(self.positions, dtype=float)
        if x.ndim != 2 or x.shape[0] < 1:
            raise ParameterError("positions", "expected an (N, D) array with N >= 1")
        if not np.all(np.isfinite(x)):
            raise ParameterError("positions", "coordinates must be finite")
        x.flags.writeable = False
        object.__setattr__(self, "positions", x)

    @property
    def N(self) -> int:
        return self.positions.shape[0]


def initial_configuration(trial: TrialFunction, N: int, rng, max_tries: int = 10_000) -> Configuration:
    """Random start drawn from a Gaussian of the GP rms width.

    Particles are placed one at a time and redrawn until no pair sits
    inside the potential range, so hard cores start without overlap.
    """
    grid, D = trial.gp.grid, trial.dimension
    width = np.sqrt(np.dot(grid.weights, trial.gp.phi**2 * grid.r**2) / trial.gp.N / D)
    rmin = trial.scattering.potential.range if trial.scattering is not None else 0.0
    pos = np.empty((N, D))
    for i in range(N):
        for _ in range(max_tries):
            x = rng.normal(scale=width, size=D)
            if np.linalg.norm(x) < trial.r_extent and (
                i == 0 or np.min(np.linalg.norm(pos[:i] - x, axis=1)) > 1.01 * rmin
            ):
                pos[i] = x
                break
        else:
            raise ConvergenceError("could not place particles without overlap; the system is too dense")
    return Configuration(pos)


# batched kernels: X has shape (W, N, D) ---------------------------------

def _pair_geometry(X):
    diff = X[:, :, None, :] - X[:, None, :, :]
    dist = np.sqrt(np.einsum("wijd,wijd->wij", diff, diff))
    return diff, dist


def _links(dist):
    """Ordered nearest-earlier-neighbour links: (t, nn) for particles 1..N-1."""
    N = dist.shape[1]
    lower = np.tril(np.ones((N, N), dtype=bool), k=-1)
    masked = np.where(lower, dist, np.inf)[:, 1:, :]
    nn = np.argmin(masked, axis=2)
    t = np.take_along_axis(masked, nn[:, :, None], axis=2)[:, :, 0]
    return t, nn


def _reorder(X, trial: TrialFunction):
    if trial.order is None:
        return X
    if len(trial.order) != X.shape[1]:
        raise ParameterError("order", f"permutation has {len(trial.order)} labels for {X.shape[1]} particles")
    return X[:, trial.order, :]


def _log_psi_batch(X, trial: TrialFunction):
    X = _reorder(X, trial)
    r = np.sqrt(np.einsum("wid,wid->wi", X, X))
    lp = trial.log_phi(r).sum(axis=1)
    if trial.has_pair_factor and X.shape[1] > 1:
        _, dist = _pair_geometry(X)
        t, _ = _links(dist)
        lp = lp + trial.log_f(t).sum(axis=1)
    return lp


def trial_log_psi(cfg: Configuration, trial: TrialFunction) -> float:
    """ln|Psi| at a configuration; -inf where a pair factor vanishes."""
    x = cfg.positions
    if x.shape[1] != trial.dimension:
        raise ParameterError("positions", f"expected {trial.dimension}-dimensional points")
    r = np.linalg.norm(x, axis=1)
    if np.any(r > trial.r_extent):
        raise ParameterError("positions", f"particle beyond the GP grid extent {trial.r_extent:.4g}; enlarge the grid")
    return float(_log_psi_batch(x[None], trial)[0])


def _local_energy_batch(X, trial: TrialFunction, trap: TrapPotential, v: PairPotential | None):
    # the estimator is a sum over particles, so relabeling first is harmless
    X = _reorder(X, trial)
    W, N, D = X.shape
    r = np.sqrt(np.einsum("wid,wid->wi", X, X))
    dl, d2l = trial.log_phi_derivs(r)
    safe_r = np.where(r > 1e-12, r, 1.0)
    radial = np.where(r > 1e-12, dl / safe_r, d2l)
    gradA = radial[..., None] * X
    lapA = d2l + (D - 1) * radial
    energy = np.sum(-lapA - dl * dl, axis=1) + np.sum(trap(r), axis=1)
    if N == 1:
        return energy

    diff, dist = _pair_geometry(X)
    iu = np.triu_indices(N, k=1)
    if v is not None:
        energy = energy + np.sum(v(dist[:, iu[0], iu[1]]), axis=1)
    if not trial.has_pair_factor:
        return energy

    # grad B from the ordered links
    t, nn = _links(dist)
    _, l1, _ = trial.log_f_derivs(t)
    k_idx = np.arange(1, N)
    unit = diff[:, k_idx, :, :][np.arange(W)[:, None], np.arange(N - 1)[None, :], nn] / t[..., None]
    contrib = l1[..., None] * unit
    gradB = np.zeros_like(X)
    gradB[:, 1:, :] += contrib
    w_idx = np.repeat(np.arange(W), N - 1)
    np.add.at(gradB, (w_idx, nn.ravel()), -contrib.reshape(-1, D))
    energy = energy + np.einsum("wid,wid->w", gradB, gradB)

    # control variate over all pairs
    d_pairs = dist[:, iu[0], iu[1]]
    p0, p1, p2 = trial._cv_profile(d_pairs)
    if np.any(p1 != 0.0):
        u = diff[:, iu[0], iu[1], :] / d_pairs[..., None]
        gi = p1[..., None] * u
        gradG = np.zeros_like(X)
        np.add.at(gradG, (slice(None), iu[0]), gi)
        np.add.at(gradG, (slice(None), iu[1]), -gi)
        lap_pair = p2 + (D - 1) * p1 / d_pairs
        Z = 2.0 * np.sum(lap_pair, axis=1) + 2.0 * np.einsum("wid,wid->w", gradG, gradA + gradB)
        energy = energy - Z
    return energy


def local_energy(
    cfg: Configuration,
    trial: TrialFunction,
    trap: TrapPotential,
    v: PairPotential | None = None,
    method: str = "analytic",
    h_d: float = 1e-4,
) -> float:
    """Energy estimator at one configuration (see module docstring).

    ``method="fd"`` evaluates every derivative by central differences of
    step ``h_d`` instead, as an independent check of the analytic path.
    """
    if not np.isfinite(trial_log_psi(cfg, trial)):
        raise ParameterError("positions", "trial function vanishes at this configuration")
    X = cfg.positions[None].astype(float)
    if method == "analytic":
        e = float(_local_energy_batch(X, trial, trap, v)[0])
    elif method == "fd":
        e = _local_energy_fd(_reorder(cfg.positions[None], trial)[0], trial, trap, v, h_d)
    else:
        raise ParameterError("method", f"unknown method {method!r}")
    if not np.isfinite(e):
        raise ConvergenceError("non-finite local energy")
    return e


def _local_energy_fd(x, trial, trap, v, h):
    N, D = x.shape

    def A(y):
        return float(trial.log_phi(np.linalg.norm(y, axis=1)).sum())

    def B(y):
        if not trial.has_pair_factor or N == 1:
            return 0.0
        _, dist = _pair_geometry(y[None])
        t, _ = _links(dist)
        return float(trial.log_f(t).sum())

    def G(y):
        if not trial.has_pair_factor or N == 1:
            return 0.0
        iu = np.triu_indices(N, k=1)
        d = np.linalg.norm(y[iu[0]] - y[iu[1]], axis=1)
        return float(trial._cv_profile(d)[0].sum())

    def grad_lap(fn):
        f0 = fn(x)
        grad = np.zeros_like(x)
        lap = 0.0
        for i in range(N):
            for d in range(D):
                xp = x.copy()
                xm = x.copy()
                xp[i, d] += h
                xm[i, d] -= h
                fp, fm = fn(xp), fn(xm)
                grad[i, d] = (fp - fm) / (2 * h)
                lap += (fp - 2 * f0 + fm) / (h * h)
        return grad, lap

    gA, lA = grad_lap(A)
    gB, _ = grad_lap(B)
    gG, lG = grad_lap(G)
    r = np.linalg.norm(x, axis=1)
    e = -lA - np.sum(gA * gA) + np.sum(gB * gB) - (lG + 2.0 * np.sum(gG * (gA + gB)))
    e += float(np.sum(trap(r)))
    if v is not None and N > 1:
        iu = np.triu_indices(N, k=1)
        e += float(np.sum(v(np.linalg.norm(x[iu[0]] - x[iu[1]], axis=1))))
    return e


@dataclass(frozen=True, eq=False)
class VmcResult:
    energy_mean: float
    energy_stderr: float
    acceptance_rate: float
    n_samples: int
    burn_in: int
    step_size: float
    rng_seed: int | None
    n_walkers: int
    n_particles: int
    dimension: int
    block_means: np.ndarray = field(repr=False)
    hist_edges: np.ndarray = field(repr=False)
    hist_density: np.ndarray = field(repr=False)
    hist_stderr: np.ndarray = field(repr=False)

    @property
    def upper_bound_candidate(self) -> float:
        return self.energy_mean + 3.0 * self.energy_stderr


def block_average(series, n_blocks: int = N_BLOCKS):
    """Mean and standard error from ``n_blocks`` contiguous block means."""
    series = np.asarray(series, dtype=float)
    if len(series) < n_blocks:
        raise ParameterError("steps", f"need at least {n_blocks} samples for block averaging")
    size = len(series) // n_blocks
    blocks = series[: size * n_blocks].reshape(n_blocks, size, *series.shape[1:]).mean(axis=1)
    mean = blocks.mean(axis=0)
    err = blocks.std(axis=0, ddof=1) / np.sqrt(n_blocks)
    return mean, err, blocks


def _default_hist_edges(trial: TrialFunction, n_bins: int = 20) -> np.ndarray:
    # all but 1e-4 of the GP mass: sparse tail bins make block errors unreliable
    grid = trial.gp.grid
    cum = np.cumsum(grid.weights * trial.gp.phi**2)
    r_hi = grid.r[np.searchsorted(cum, cum[-1] * (1.0 - 1e-4))]
    return np.linspace(0.0, min(r_hi, trial.r_extent), n_bins + 1)


def run_vmc(
    trial: TrialFunction,
    trap: TrapPotential,
    v: PairPotential | None,
    cfg0: Configuration,
    steps: int,
    step_size: float,
    seed: int | None,
    n_walkers: int = 32,
    hist_edges=None,
    burn_in_fraction: float = 0.1,
    min_steps: int = 10_000,
) -> VmcResult:
    """Metropolis sampling of |Psi|^2 with single-particle Gaussian moves.

    ``steps`` counts sweeps (N proposed moves per walker).  The first
    ``burn_in_fraction`` of the sweeps tunes the step size toward 50%
    acceptance and is discarded.  All walkers start from ``cfg0``; error
    bars come from 32 blocks of the walker-averaged energy series.
    """
    if steps < min_steps:
        raise ParameterError("steps", f"need at least {min_steps} sweeps, got {steps}")
    if not step_size > 0:
        raise ParameterError("step_size", f"step size must be positive, got {step_size!r}")
    if not np.isfinite(trial_log_psi(cfg0, trial)):
        raise ParameterError("cfg0", "trial function vanishes at the initial configuration")
    rng = np.random.default_rng(seed)
    N, D = cfg0.positions.shape
    W = int(n_walkers)
    X = np.repeat(cfg0.positions[None].astype(float), W, axis=0)
    lp = _log_psi_batch(X, trial)
    edges = _default_hist_edges(trial) if hist_edges is None else np.asarray(hist_edges, dtype=float)
    shell = sphere_area(D) / D * np.diff(edges**D)

    burn = int(burn_in_fraction * steps)
    prod = steps - burn
    energies = np.empty(prod)
    counts = np.empty((prod, len(edges) - 1))
    accepted = 0
    window_acc = 0
    window_n = 0
    for sweep in range(steps):
        for i in range(N):
            prop = X.copy()
            prop[:, i, :] += step_size * rng.standard_normal((W, D))
            lp_new = _log_psi_batch(prop, trial)
            u = rng.random(W)
            with np.errstate(invalid="ignore"):
                ok = np.log(u) < 2.0 * (lp_new - lp)
            X[ok] = prop[ok]
            lp[ok] = lp_new[ok]
            n_ok = int(ok.sum())
            if sweep >= burn:
                accepted += n_ok
            else:
                window_acc += n_ok
                window_n += W
        if sweep < burn:
            if window_n >= 20 * N * W:
                rate = window_acc / window_n
                step_size *= float(np.clip(rate / TARGET_ACCEPTANCE, 0.5, 2.0))
                window_acc = window_n = 0
            continue
        k = sweep - burn
        e = _local_energy_batch(X, trial, trap, v)
        if not np.all(np.isfinite(e)):
            raise ConvergenceError(f"non-finite local energy at sweep {sweep}")
        energies[k] = e.mean()
        r = np.sqrt(np.einsum("wid,wid->wi", X, X)).ravel()
        counts[k] = np.histogram(r, bins=edges)[0] / (W * shell)

    acc = accepted / (prod * N * W)
    if acc == 0.0:
        raise ConvergenceError("no Metropolis move accepted; step size is pathological")
    mean, err, blocks = block_average(energies)
    hmean, herr, _ = block_average(counts)
    return VmcResult(
        energy_mean=float(mean),
        energy_stderr=float(err),
        acceptance_rate=float(acc),
        n_samples=prod * W,
        burn_in=burn,
        step_size=float(step_size),
        rng_seed=seed,
        n_walkers=W,
        n_particles=N,
        dimension=D,
        block_means=blocks,
        hist_edges=edges,
        hist_density=hmean,
        hist_stderr=herr,
    )


def vmc_density(result: VmcResult):
    """Radial density histogram: (bin centres, density, standard error).

    Normalized so that sum(density * shell volume) is the particle number
    found inside the histogram range.
    """
    e = result.hist_edges
    return 0.5 * (e[1:] + e[:-1]), result.hist_density, result.hist_stderr


def histogram_total(result: VmcResult) -> float:
    e = result.hist_edges
    shell = sphere_area(result.dimension) / result.dimension * np.diff(e**result.dimension)
    return float(np.dot(result.hist_density, shell))


def merge_vmc_results(results) -> VmcResult:
    """Combine independent chains by inverse-variance weighting."""
    results = list(results)
    if len(results) == 1:
        return results[0]
    w = np.array([1.0 / r.energy_stderr**2 for r in results])
    mean = float(np.dot(w, [r.energy_mean for r in results]) / w.sum())
    err = float(1.0 / np.sqrt(w.sum()))
    hw = np.array([1.0 / np.maximum(r.hist_stderr, 1e-300) ** 2 for r in results])
    hd = np.sum(hw * np.array([r.hist_density for r in results]), axis=0) / hw.sum(axis=0)
    he = 1.0 / np.sqrt(hw.sum(axis=0))
    base = results[0]
    return VmcResult(
        energy_mean=mean,
        energy_stderr=err,
        acceptance_rate=float(np.mean([r.acceptance_rate for r in results])),
        n_samples=sum(r.n_samples for r in results),
        burn_in=base.burn_in,
        step_size=float(np.mean([r.step_size for r in results])),
        rng_seed=base.rng_seed,
        n_walkers=sum(r.n_walkers for r in results),
        n_particles=base.n_particles,
        dimension=base.dimension,
        block_means=np.concatenate([r.block_means for r in results]),
        hist_edges=base.hist_edges,
        hist_density=hd,
        hist_stderr=he,
    )
