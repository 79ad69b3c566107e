"""Boundary backstepping for the linearized Saint-Venant-Exner channel."""

from .characteristics import Regime, Spectrum, char_coefficients, spectrum
from .errors import (CFLError, ConfigError, ConvergenceError, CriticalFlowError,
                     DegeneracyError, DomainError, RegimeError, ScalingError, SVEError)
from .kernels import (AbstractCoefficients, solve_controller_kernels,
                      solve_observer_kernels)
from .model import EquilibriumSetup, PhysicalParams, froude, linearize

__all__ = [
    "AbstractCoefficients", "CFLError", "ConfigError", "ConvergenceError",
    "CriticalFlowError", "DegeneracyError", "DomainError", "EquilibriumSetup",
    "PhysicalParams", "Regime", "RegimeError", "SVEError", "ScalingError", "Spectrum",
    "char_coefficients", "froude", "linearize", "solve_controller_kernels",
    "solve_observer_kernels", "spectrum",
]
