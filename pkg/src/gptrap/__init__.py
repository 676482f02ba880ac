"""Gross-Pitaevskii and Thomas-Fermi tools for trapped dilute Bose gases."""
from .core import (
    ConvergenceError,
    GpTrapError,
    GridTooSmallError,
    PairPotential,
    ParameterError,
    RadialGrid,
    TrapPotential,
    build_radial_grid,
)
from .coupling import coupling_constant
from .gp import GpOptions, GpState, grid_policy, minimize_gp
from .scattering import scattering_length, zero_energy_profile
from .tf import TfState, solve_tf

__version__ = "0.1.0"
