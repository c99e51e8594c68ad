"""Bayesian inference of the eigenvalues of a closure operator for mean
scalar transport, with a spectral forward model and a high-fidelity
Darcy-flow data generator."""
from .bayes import NoiseModel, ObservationSet, Posterior, PriorSpec
from .config import RunConfig, load_config
from .diagnostics import kl_report, posterior_predictive
from .operator import SpectrumParams, check_constraints
from .sampler import Chain, DramConfig, optimize_frade_mle, optimize_map, run_dram
from .sensitivity import screen_eigenvalues, select_inferred_set, sobol_total_effect
from .spectral import (FourierGrid, FradeParams, InitialCondition, ModalState, ObservationOperator,
                       evaluate_field, frade_eigenvalues, propagate, transform_initial_condition)

__version__ = "0.1.0"

__all__ = [
    "Chain",
    "DramConfig",
    "FourierGrid",
    "FradeParams",
    "InitialCondition",
    "ModalState",
    "NoiseModel",
    "ObservationOperator",
    "ObservationSet",
    "Posterior",
    "PriorSpec",
    "RunConfig",
    "SpectrumParams",
    "check_constraints",
    "evaluate_field",
    "frade_eigenvalues",
    "kl_report",
    "load_config",
    "optimize_frade_mle",
    "optimize_map",
    "posterior_predictive",
    "propagate",
    "run_dram",
    "screen_eigenvalues",
    "select_inferred_set",
    "sobol_total_effect",
    "transform_initial_condition",
]
