"""Markov-modulated fluid queues: first-passage matrices, stationary
distribution, escape probabilities and a Monte Carlo oracle."""

from .datasets import make_fluid_model
from .estimators import FluidQueue
from .exceptions import (
    ConvergenceError,
    FluidError,
    ModelValidationError,
    NumericalError,
    RegimeError,
    SingularPencilError,
)
from .model import (
    CensoredGenerator,
    FluidModel,
    PhasePartition,
    Regime,
    censor,
    classify,
    dump_model,
    load_model,
    partition_phases,
)
from .passage import EscapeResult, TransformPoint, escape, escape_zero_rows, mean_first_return, transform_at
from .riccati import (
    RiccatiSolution,
    derive_all,
    solve,
    solve_psi_functional,
    solve_psi_newton,
    wiener_hopf_residuals,
)
from .stationary import StationaryDistribution, cdf, density, stationary_distribution

__version__ = "0.1.0"

__all__ = [
    "CensoredGenerator", "ConvergenceError", "EscapeResult", "FluidError", "FluidModel",
    "FluidQueue", "ModelValidationError", "NumericalError", "PhasePartition", "Regime",
    "RegimeError", "RiccatiSolution", "SingularPencilError", "StationaryDistribution",
    "TransformPoint", "cdf", "censor", "classify", "density", "derive_all", "dump_model",
    "escape", "escape_zero_rows", "load_model", "make_fluid_model", "mean_first_return",
    "partition_phases", "solve", "solve_psi_functional", "solve_psi_newton",
    "stationary_distribution", "transform_at", "wiener_hopf_residuals",
]
