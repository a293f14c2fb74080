"""Coulomb crystals in a magnetic gradient: structure, modes, spin-motion coupling and spin dynamics."""
from .core import CA40, CONSTANTS, ConvergenceError, DomainError, IonSpecies, SingularityError
from .coupling import CouplingMatrix, effective_lamb_dicke
from .crystal import (Configuration, CrystalState, TrapPotential, classify_configuration,
                      critical_anisotropy, find_equilibrium)
from .field import FieldModel, WireSegment, load_wire_layout, magnitude_gradient, zeeman_frequency
from .modes import ModeSpectrum, classify_modes, normal_modes, soft_mode_curve

__version__ = "0.1.0"

__all__ = [
    "CA40", "CONSTANTS", "Configuration", "ConvergenceError", "CouplingMatrix", "CrystalState",
    "DomainError", "FieldModel", "IonSpecies", "ModeSpectrum", "SingularityError", "TrapPotential",
    "WireSegment", "classify_configuration", "classify_modes", "critical_anisotropy",
    "effective_lamb_dicke", "find_equilibrium", "load_wire_layout", "magnitude_gradient",
    "normal_modes", "soft_mode_curve", "zeeman_frequency", "__version__",
]
