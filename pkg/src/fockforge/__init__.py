"""Dissipative stabilization of displaced Fock states in a linearized optomechanical model."""

from .analytic import (
    CouplingSet,
    PhiParams,
    TargetSpec,
    build_annihilator_f,
    build_dark_operator,
    build_phi_n,
    kernel_state,
    phi_params,
    physical_to_couplings,
    position_wavefunction,
    resonant_coupling,
    zeta_of,
)
from .errors import ConfigurationError, GridError, StabilityError, TruncationWarning
from .fockspace import DensityMatrix, QuantumOperator, StateVector

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "CouplingSet",
    "DensityMatrix",
    "GridError",
    "PhiParams",
    "QuantumOperator",
    "StabilityError",
    "StateVector",
    "TargetSpec",
    "TruncationWarning",
    "build_annihilator_f",
    "build_dark_operator",
    "build_phi_n",
    "kernel_state",
    "phi_params",
    "physical_to_couplings",
    "position_wavefunction",
    "resonant_coupling",
    "zeta_of",
]
