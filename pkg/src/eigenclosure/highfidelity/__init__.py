"""Two-dimensional Darcy-flow transport model used to manufacture ensemble-mean data."""
from .darcy import VelocityField, solve_darcy
from .ensemble import EnsembleStats, HifiConfig, Moments, member_seeds, run_ensemble, run_member
from .grf import GrfConfig, Grid2D, LogPermeabilitySampler, sample_log_permeability
from .transport import advance_ade_2d, depth_average, stable_dt, total_mass

__all__ = [
    "VelocityField",
    "solve_darcy",
    "EnsembleStats",
    "HifiConfig",
    "Moments",
    "member_seeds",
    "run_ensemble",
    "run_member",
    "GrfConfig",
    "Grid2D",
    "LogPermeabilitySampler",
    "sample_log_permeability",
    "advance_ade_2d",
    "depth_average",
    "stable_dt",
    "total_mass",
]
