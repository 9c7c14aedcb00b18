"""Discrete-time model-reference adaptive control with gradient and high-order tuner laws."""

from .config import build_scenario, load_config, parse_config
from .exceptions import (
    CertificateViolation,
    ConfigError,
    ConvergenceError,
    DimensionError,
    DivergenceError,
    GainConditionError,
    MracError,
    ReferenceBoundError,
    StabilityError,
)
from .laws import EXTENDED, PROPOSITION, GdLaw, HotLaw, make_law, nesterov_update, validate_gains
from .lti import StateSpace, discretize_zoh, is_schur_stable, solve_dlqr, solve_dlyap
from .plant import NonlinearBasis, PlantModel, ReferenceModel, basis_function
from .region import build_region_grid, minimize_over_lambda
from .sim import (
    Ensemble,
    StepRecord,
    TrialStats,
    emit_csv,
    run_closed_loop,
    run_monte_carlo,
    simulate,
    simulate_config,
)

__version__ = "0.1.0"

__all__ = [
    "build_scenario",
    "load_config",
    "parse_config",
    "CertificateViolation",
    "ConfigError",
    "ConvergenceError",
    "DimensionError",
    "DivergenceError",
    "GainConditionError",
    "MracError",
    "ReferenceBoundError",
    "StabilityError",
    "EXTENDED",
    "PROPOSITION",
    "GdLaw",
    "HotLaw",
    "make_law",
    "nesterov_update",
    "validate_gains",
    "StateSpace",
    "discretize_zoh",
    "is_schur_stable",
    "solve_dlqr",
    "solve_dlyap",
    "NonlinearBasis",
    "PlantModel",
    "ReferenceModel",
    "basis_function",
    "build_region_grid",
    "minimize_over_lambda",
    "Ensemble",
    "StepRecord",
    "TrialStats",
    "emit_csv",
    "run_closed_loop",
    "run_monte_carlo",
    "simulate",
    "simulate_config",
]
