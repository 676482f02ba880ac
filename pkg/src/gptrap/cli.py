"""Command-line driver.

    gptrap <command> [--config FILE] [--key value ...] --out PATH [--format json|csv]

Settings come from built-in defaults, then a flat ``key = value`` config
file, then command-line flags.  Every run writes the result file plus a
``<out>.repro`` sidecar holding the fully resolved settings; passing that
sidecar back with ``--config`` repeats the run exactly.

Exit codes: 0 success, 2 invalid input, 3 solver did not converge, 4 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import dataclass
from importlib import metadata

import numpy as np

from .core import ConvergenceError, PairPotential, ParameterError, TrapPotential, build_radial_grid
from .coupling import coupling_constant, mean_gp_density
from .gp import GpOptions, grid_policy, minimize_gp
from .scattering import soft_sphere_with_length, zero_energy_profile
from .tf import solve_tf, tf_energy_closed_form

SCHEMA_VERSION = 1
COMMANDS = ("solve-gp", "solve-tf", "scattering", "coupling", "vmc", "sweep")

log = logging.getLogger("gptrap")


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def _bool(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    return [float(x) for x in str(text).split(",") if x.strip()]


@dataclass(frozen=True)
class Key:
    parse: object
    default: object
    help: str


KEYS = {
    "dim": Key(int, 3, "spatial dimension (2 or 3)"),
    "s": Key(float, 2.0, "trap exponent in V = c r^s"),
    "c": Key(float, 1.0, "trap coefficient"),
    "N": Key(float, 1.0, "particle number"),
    "g": Key(float, None, "GP coupling (vmc: defaults to the value from a)"),
    "a": Key(float, None, "scattering length"),
    "potential": Key(str, "soft_sphere", "pair potential: hard_core or soft_sphere"),
    "r0": Key(float, None, "pair potential range"),
    "v0": Key(float, None, "soft-sphere height"),
    "kappa_r0": Key(float, 2.0, "soft-sphere shape sqrt(v0/2) r0 when built from a"),
    "r_max": Key(float, None, "outer grid radius (default: grid policy)"),
    "n_points": Key(int, None, "grid points (default: grid policy)"),
    "points_per_unit": Key(float, 400.0, "grid density used by the grid policy"),
    "energy_tol": Key(float, 1e-12, "GP relative energy change at convergence"),
    "residual_tol": Key(float, 1e-9, "GP Euler-Lagrange residual at convergence"),
    "max_iters": Key(int, 200_000, "GP flow step limit"),
    "tol": Key(float, 1e-10, "coupling fixed-point tolerance"),
    "density_source": Key(str, "gp", "mean density for the coupling: gp or tf"),
    "seed": Key(int, 12345, "random seed"),
    "steps": Key(int, 20_000, "Metropolis sweeps per chain"),
    "step_size": Key(float, 0.8, "initial Metropolis step"),
    "walkers": Key(int, 32, "walkers per chain"),
    "chains": Key(int, 1, "independent chains (merged by inverse variance)"),
    "pair_factor": Key(_bool, True, "use the scattering pair factor in the trial state"),
    "cutoff_multiplier": Key(float, 1.0, "b = multiplier * rho_bar^(-1/D)"),
    "sweep": Key(str, "gp-tf", "sweep kind: gp-tf or diluteness"),
    "Ng_list": Key(_floats, "10,100,1000,10000", "comma-separated Ng values (gp-tf sweep)"),
    "Ng": Key(float, 100.0, "fixed Ng (diluteness sweep)"),
    "N_list": Key(_floats, "1,10,100", "comma-separated N values (diluteness sweep)"),
    "format": Key(str, None, "json or csv (default from the output suffix)"),
    "out": Key(str, None, "output path"),
}

_GP_NUM = ("r_max", "n_points", "points_per_unit", "energy_tol", "residual_tol", "max_iters")
COMMAND_KEYS = {
    "solve-gp": ("dim", "s", "c", "N", "g") + _GP_NUM,
    "solve-tf": ("dim", "s", "c", "N", "g"),
    "scattering": ("dim", "potential", "r0", "v0", "a", "kappa_r0", "r_max", "n_points"),
    "coupling": ("dim", "s", "c", "N", "a", "tol", "density_source") + _GP_NUM,
    "vmc": ("dim", "s", "c", "N", "g", "a", "potential", "r0", "v0", "kappa_r0", "seed", "steps",
            "step_size", "walkers", "chains", "pair_factor", "cutoff_multiplier") + _GP_NUM,
    "sweep": ("dim", "s", "c", "sweep", "Ng_list", "Ng", "N_list", "points_per_unit", "energy_tol",
              "residual_tol", "max_iters"),
}
_IO_KEYS = ("format", "out")


class CliError(Exception):
    def __init__(self, code: int, kind: str, message: str, key: str | None = None):
        super().__init__(message)
        self.code, self.kind, self.message, self.key = code, kind, message, key

    def record(self) -> dict:
        rec = {"schema_version": SCHEMA_VERSION, "error": self.kind, "message": self.message}
        if self.key is not None:
            rec["key"] = self.key
        return rec


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        key = None
        for tok in message.split():
            if tok.startswith("--"):
                key = tok.strip(",:'\"").lstrip("-").replace("-", "_").split("=")[0]
                break
        raise CliError(2, "validation", message, key)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gptrap", description="Trapped dilute Bose gas: GP, TF, scattering and VMC tools.")
    p.add_argument("command", nargs="?", help="one of: " + ", ".join(COMMANDS))
    p.add_argument("--config", help="flat key = value settings file")
    p.add_argument("--version", action="version", version=f"gptrap {_version()}")
    p.add_argument("-v", "--verbose", action="store_true")
    for name, k in KEYS.items():
        flags = {f"--{name}", f"--{name.replace('_', '-')}"}
        p.add_argument(*sorted(flags), dest=name, default=None, help=k.help)
    return p


def read_config(path: str) -> dict:
    """Parse a flat ``key = value`` file; '#' starts a comment."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise CliError(4, "io", f"cannot read config {path}: {exc}") from exc
    out = {}
    for n, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(2, "validation", f"{path}:{n}: expected 'key = value'", "config")
        key, val = (x.strip() for x in line.split("=", 1))
        out[key] = val
    return out


def resolve(argv) -> tuple[str, dict]:
    """Merge defaults, config file and flags; reject unknown or misplaced keys."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    file_cfg = read_config(args.config) if args.config else {}
    meta = {k: file_cfg.pop(k) for k in ("command", "version") if k in file_cfg}
    command = args.command or meta.get("command")
    if command not in COMMANDS:
        raise CliError(2, "validation", f"unknown or missing command {command!r}", "command")
    if args.command and meta.get("command") and meta["command"] != args.command:
        raise CliError(2, "validation", f"config is for {meta['command']!r}, not {args.command!r}", "command")
    allowed = set(COMMAND_KEYS[command]) | set(_IO_KEYS)
    for key in file_cfg:
        if key not in KEYS or key not in allowed:
            raise CliError(2, "validation", f"unknown key {key!r} for {command}", key)
    given = {k: v for k, v in vars(args).items() if k in KEYS and v is not None}
    for key in given:
        if key not in allowed:
            raise CliError(2, "validation", f"option --{key} does not apply to {command}", key)
    cfg = {}
    for key in sorted(allowed):
        raw = given.get(key, file_cfg.get(key, KEYS[key].default))
        if raw is None:
            cfg[key] = None
            continue
        try:
            cfg[key] = KEYS[key].parse(raw)
        except (TypeError, ValueError) as exc:
            raise CliError(2, "validation", f"bad value {raw!r} for {key}: {exc}", key) from exc
    _validate(command, cfg)
    return command, cfg


def _need(cfg, key, cond, msg):
    if cfg.get(key) is None or not cond(cfg[key]):
        raise CliError(2, "validation", f"{key}: {msg} (got {cfg.get(key)!r})", key)


def _validate(command: str, cfg: dict) -> None:
    _need(cfg, "out", lambda v: bool(v), "an output path is required")
    fmt = cfg.get("format") or ("csv" if cfg["out"].lower().endswith(".csv") else "json")
    if fmt not in ("json", "csv"):
        raise CliError(2, "validation", f"format must be json or csv, got {fmt!r}", "format")
    cfg["format"] = fmt
    _need(cfg, "dim", lambda v: v in (2, 3), "must be 2 or 3")
    if "s" in cfg:
        _need(cfg, "s", lambda v: v > 0, "must be positive")
        _need(cfg, "c", lambda v: v > 0, "must be positive")
    if "N" in cfg:
        _need(cfg, "N", lambda v: v > 0, "must be positive")
    if command in ("solve-gp", "solve-tf"):
        lo = (lambda v: v > 0) if command == "solve-tf" else (lambda v: v >= 0)
        _need(cfg, "g", lo, "coupling must be positive for TF, nonnegative for GP")
    if command in ("coupling",):
        _need(cfg, "a", lambda v: v > 0, "must be positive")
        _need(cfg, "density_source", lambda v: v in ("gp", "tf"), "must be gp or tf")
        _need(cfg, "tol", lambda v: v > 0, "must be positive")
    for key in ("r_max", "points_per_unit", "energy_tol", "residual_tol"):
        if cfg.get(key) is not None:
            _need(cfg, key, lambda v: v > 0, "must be positive")
    for key in ("n_points",):
        if cfg.get(key) is not None:
            _need(cfg, key, lambda v: v >= 16, "need at least 16 points")
    if command == "scattering":
        _need(cfg, "potential", lambda v: v in ("hard_core", "soft_sphere"), "must be hard_core or soft_sphere")
        if cfg.get("r0") is None and cfg.get("a") is None:
            raise CliError(2, "validation", "give r0 (and v0) or a", "r0")
    if command == "vmc":
        _need(cfg, "steps", lambda v: v >= 10_000, "need at least 10000 sweeps")
        _need(cfg, "step_size", lambda v: v > 0, "must be positive")
        _need(cfg, "walkers", lambda v: v >= 1, "must be at least 1")
        _need(cfg, "chains", lambda v: v >= 1, "must be at least 1")
        _need(cfg, "N", lambda v: float(v).is_integer(), "VMC needs an integer particle number")
        _need(cfg, "cutoff_multiplier", lambda v: v > 0, "must be positive")
        if cfg.get("g") is not None:
            _need(cfg, "g", lambda v: v >= 0, "must be nonnegative")
        if cfg.get("a") is None and cfg.get("r0") is None and cfg["pair_factor"]:
            raise CliError(2, "validation", "give a scattering length a or a potential r0", "a")
    if command == "sweep":
        _need(cfg, "sweep", lambda v: v in ("gp-tf", "diluteness"), "must be gp-tf or diluteness")
        if cfg["sweep"] == "gp-tf":
            _need(cfg, "Ng_list", lambda v: len(v) > 0 and min(v) > 0, "need positive values")
            _need(cfg, "Ng_list", lambda v: all(b > a for a, b in zip(v, v[1:])), "must be increasing")
        else:
            _need(cfg, "dim", lambda v: v == 3, "the diluteness sweep is three-dimensional")
            _need(cfg, "Ng", lambda v: v > 0, "must be positive")
            _need(cfg, "N_list", lambda v: len(v) > 0 and min(v) > 0, "need positive values")


# dispatch ------------------------------------------------------------------

def _trap(cfg) -> TrapPotential:
    return TrapPotential(s=cfg["s"], c=cfg["c"])


def _gp_opts(cfg) -> GpOptions:
    return GpOptions(energy_tol=cfg["energy_tol"], residual_tol=cfg["residual_tol"], max_iters=cfg["max_iters"])


def _grid(cfg, trap, N, g):
    if cfg.get("r_max") is None and cfg.get("n_points") is None:
        return grid_policy(trap, cfg["dim"], N, g, cfg["points_per_unit"])
    auto = grid_policy(trap, cfg["dim"], N, g, cfg["points_per_unit"])
    r_max = cfg["r_max"] if cfg.get("r_max") is not None else auto.r_max
    n = cfg["n_points"] if cfg.get("n_points") is not None else int(np.ceil(cfg["points_per_unit"] * r_max)) + 1
    return build_radial_grid(cfg["dim"], r_max, n)


def _pair_potential(cfg) -> PairPotential:
    if cfg.get("r0") is not None:
        if cfg["potential"] == "hard_core":
            return PairPotential.hard_core(cfg["r0"])
        if cfg.get("v0") is None:
            raise CliError(2, "validation", "soft_sphere needs v0", "v0")
        return PairPotential.soft_sphere(cfg["v0"], cfg["r0"])
    if cfg["potential"] == "hard_core":
        return PairPotential.hard_core(cfg["a"])
    if cfg["dim"] != 3:
        raise CliError(2, "validation", "building a soft sphere from a is three-dimensional; give r0 and v0", "a")
    return soft_sphere_with_length(cfg["a"], cfg["kappa_r0"])


def _scattering(v, D, cfg):
    r_max = cfg.get("r_max") or 8.0 * v.range
    n = cfg.get("n_points") or 8001
    return zero_energy_profile(v, D, r_max, n)


def run_solve_gp(cfg):
    trap = _trap(cfg)
    grid = _grid(cfg, trap, cfg["N"], cfg["g"])
    st = minimize_gp(trap, cfg["N"], cfg["g"], grid, _gp_opts(cfg))
    scalars = {
        "dim": cfg["dim"], "N": st.N, "g": st.g, "energy": st.energy_total,
        "energy_kinetic": st.energy_kinetic, "energy_trap": st.energy_trap,
        "energy_interaction": st.energy_interaction, "chemical_potential": st.chemical_potential,
        "mean_density": mean_gp_density(st), "residual": st.residual, "iterations": st.iterations,
        "r_max": grid.r_max, "n_points": grid.n_points,
    }
    return [scalars], {"r": grid.r, "phi": st.phi}


def run_solve_tf(cfg):
    trap = _trap(cfg)
    st = solve_tf(trap, cfg["N"], cfg["g"], cfg["dim"])
    scalars = {
        "dim": cfg["dim"], "N": st.N, "g": st.g, "mu": st.chemical_potential,
        "mu_closed_form": st.mu_closed_form, "energy": st.energy,
        "energy_closed_form": tf_energy_closed_form(cfg["s"], cfg["c"], cfg["dim"], cfg["N"], cfg["g"]),
        "support_radius": st.support_radius, "mean_density": st.mean_density(),
    }
    return [scalars], {}


def run_scattering(cfg):
    v = _pair_potential(cfg)
    sol = _scattering(v, cfg["dim"], cfg)
    scalars = {
        "dim": cfg["dim"], "potential": v.kind, "r0": v.r0, "v0": v.v0 if np.isfinite(v.v0) else None,
        "scattering_length": sol.a, "match_radius": sol.match_radius, "fit_residual": sol.fit_residual,
    }
    return [scalars], {"r": sol.r, "f0": sol.f0}


def run_coupling(cfg):
    trap = _trap(cfg)
    grid = _grid(cfg, trap, cfg["N"], 1.0)
    rep = coupling_constant(cfg["dim"], cfg["a"], trap, cfg["N"], tol=cfg["tol"], grid=grid,
                            density_source=cfg["density_source"], gp_opts=_gp_opts(cfg))
    scalars = {
        "dim": rep.dimension, "a": rep.a, "N": rep.particle_number, "g": rep.g, "Ng": rep.Ng,
        "mean_density": rep.mean_density, "diluteness": rep.diluteness, "iterations": rep.iterations,
        "fixed_point_residual": rep.fixed_point_residual, "density_source": rep.density_source,
        "r_max": grid.r_max, "n_points": grid.n_points,
    }
    return [scalars], {}


def _chain_seeds(seed: int, chains: int) -> list[int]:
    if chains == 1:
        return [seed]
    return [int(x) for x in np.random.SeedSequence(seed).generate_state(chains, dtype=np.uint32)]


def _vmc_chain(args):
    from .vmc import run_vmc

    trial, trap, v, cfg0, steps, step, seed, walkers = args
    return run_vmc(trial, trap, v, cfg0, steps, step, seed, n_walkers=walkers)


def run_vmc_command(cfg):
    from .asymptotics import _pmap
    from .vmc import build_trial, initial_configuration, merge_vmc_results

    D, N, trap = cfg["dim"], int(cfg["N"]), _trap(cfg)
    v = sc = None
    if cfg.get("a") is not None or cfg.get("r0") is not None:
        v = _pair_potential(cfg)
        sc = _scattering(v, D, {})
    g = cfg.get("g")
    if g is None:
        if sc is None:
            g = 0.0
        else:
            g = coupling_constant(D, sc.a, trap, N).g if D == 2 else sc.a
    grid = _grid(cfg, trap, N, g)
    gp = minimize_gp(trap, N, g, grid, _gp_opts(cfg))
    trial = build_trial(gp, sc if cfg["pair_factor"] else None, cutoff_multiplier=cfg["cutoff_multiplier"])
    cfg0 = initial_configuration(trial, N, np.random.default_rng(cfg["seed"]))
    seeds = _chain_seeds(cfg["seed"], cfg["chains"])
    jobs = [(trial, trap, v, cfg0, cfg["steps"], cfg["step_size"], s, cfg["walkers"]) for s in seeds]
    res = merge_vmc_results(_pmap(_vmc_chain, jobs))
    E = gp.energy_total
    scalars = {
        "dim": D, "N": N, "g": g, "a": sc.a if sc is not None else None, "cutoff": trial.cutoff,
        "energy_mean": res.energy_mean, "energy_stderr": res.energy_stderr,
        "upper_bound_candidate": res.upper_bound_candidate, "energy_gp": E,
        "ratio_to_gp": res.energy_mean / E, "acceptance_rate": res.acceptance_rate,
        "n_samples": res.n_samples, "burn_in": res.burn_in, "step_size": res.step_size,
        "rng_seed": cfg["seed"], "chains": len(seeds),
    }
    return [scalars], {"hist_edges": res.hist_edges, "hist_density": res.hist_density,
                       "hist_stderr": res.hist_stderr, "chain_seeds": seeds}


def run_sweep(cfg):
    from .asymptotics import diluteness_sweep, gp_tf_sweep

    trap, opts = _trap(cfg), _gp_opts(cfg)
    if cfg["sweep"] == "gp-tf":
        recs = gp_tf_sweep(trap, cfg["dim"], cfg["Ng_list"], cfg["points_per_unit"], opts)
    else:
        recs = diluteness_sweep(trap, cfg["Ng"], cfg["N_list"], 3, cfg["points_per_unit"], opts)
    return [r.as_row() for r in recs], {}


RUNNERS = {
    "solve-gp": run_solve_gp,
    "solve-tf": run_solve_tf,
    "scattering": run_scattering,
    "coupling": run_coupling,
    "vmc": run_vmc_command,
    "sweep": run_sweep,
}

# output ----------------------------------------------------------------------

SWEEP_COLUMNS = [
    "parameter_name", "parameter", "dimension", "N", "g", "E_gp", "E_tf", "ratio", "mu_gp", "mu_tf",
    "mean_density", "diluteness", "r_max", "n_points", "iterations",
]


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % float(x)
    if isinstance(x, (list, tuple)):
        return ",".join(_fmt(v) for v in x)
    return str(x)


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if np.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def repro_stanza(command: str, cfg: dict) -> dict:
    stanza = {"command": command, "version": _version()}
    stanza.update({k: v for k, v in cfg.items() if k != "out"})
    return stanza


def write_outputs(command, cfg, rows, arrays) -> None:
    out, fmt = cfg["out"], cfg["format"]
    stanza = repro_stanza(command, cfg)
    try:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            if fmt == "json":
                doc = {
                    "schema_version": SCHEMA_VERSION,
                    "command": command,
                    "result": rows[0] if command != "sweep" else None,
                    "records": rows if command == "sweep" else None,
                    "arrays": arrays,
                    "reproducibility": stanza,
                }
                json.dump(_jsonable({k: v for k, v in doc.items() if v is not None}), fh, indent=1)
                fh.write("\n")
            else:
                cols = ["schema_version"] + (SWEEP_COLUMNS if command == "sweep" else list(rows[0]))
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(cols)
                for row in rows:
                    w.writerow([_fmt(SCHEMA_VERSION)] + [_fmt(row.get(c)) for c in cols[1:]])
        with open(out + ".repro", "w", encoding="utf-8") as fh:
            fh.write("# gptrap reproducibility stanza; rerun with: gptrap --config <this file> --out <path>\n")
            for k, v in stanza.items():
                if v is not None:
                    fh.write(f"{k} = {_fmt(v)}\n")
    except OSError as exc:
        raise CliError(4, "io", f"cannot write {out}: {exc}") from exc


def main(argv=None) -> int:
    try:
        command, cfg = resolve(sys.argv[1:] if argv is None else argv)
        try:
            rows, arrays = RUNNERS[command](cfg)
        except ParameterError as exc:
            raise CliError(2, "validation", exc.message, exc.key) from exc
        except ConvergenceError as exc:
            raise CliError(3, "convergence", str(exc)) from exc
        write_outputs(command, cfg, rows, arrays)
    except CliError as exc:
        sys.stderr.write(json.dumps(exc.record()) + "\n")
        return exc.code
    return 0


if __name__ == "__main__":
    sys.exit(main())
