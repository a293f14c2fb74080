"""Physical constants, the ion species record and length scales.

Everything in the package works in SI units. Conversions to MHz, um and
friends happen only at the command-line boundary.
"""
from __future__ import annotations

from dataclasses import dataclass
from types import MappingProxyType

import numpy as np

# CODATA 2018, frozen here so golden numbers never drift with a library upgrade.
CODATA_2018 = MappingProxyType({
    "hbar": 1.054571817e-34,  # J s
    "bohr_magneton": 9.2740100783e-24,  # J/T
    "elementary_charge": 1.602176634e-19,  # C
    "vacuum_permittivity": 8.8541878128e-12,  # F/m
    "vacuum_permeability": 1.25663706212e-6,  # T m/A
    "atomic_mass_unit": 1.66053906660e-27,  # kg
})


class DomainError(ValueError):
    """An input lies outside the domain where an operation is defined."""


class SingularityError(ArithmeticError):
    """Evaluation at a singular point (coincident ions, on a wire axis)."""


class ConvergenceError(RuntimeError):
    """An iterative solver ran out of budget. ``best`` holds the last iterate."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class PhysicalConstants:
    hbar: float
    bohr_magneton: float
    elementary_charge: float
    coulomb_constant: float  # e^2 / (4 pi eps0), J m
    vacuum_permeability: float
    atomic_mass_unit: float

    @classmethod
    def codata2018(cls) -> "PhysicalConstants":
        c = CODATA_2018
        e = c["elementary_charge"]
        return cls(
            hbar=c["hbar"],
            bohr_magneton=c["bohr_magneton"],
            elementary_charge=e,
            coulomb_constant=e**2 / (4 * np.pi * c["vacuum_permittivity"]),
            vacuum_permeability=c["vacuum_permeability"],
            atomic_mass_unit=c["atomic_mass_unit"],
        )


CONSTANTS = PhysicalConstants.codata2018()


@dataclass(frozen=True)
class IonSpecies:
    """Mass, charge and spin-transition magnetic moment of one ion species.

    ``delta_mS`` is the difference of magnetic quantum numbers of the two
    spin states used as qubit, so the transition shifts by
    ``delta_mS * lande_g * mu_B * B / hbar`` per tesla.
    """

    name: str
    mass: float
    charge: float
    lande_g: float
    delta_mS: float = 1.0

    def __post_init__(self):
        if not self.mass > 0:
            raise DomainError(f"mass must be positive, got {self.mass}")
        if not self.charge > 0:
            raise DomainError(f"charge must be positive, got {self.charge}")

    @property
    def coulomb_constant(self) -> float:
        """q^2 / (4 pi eps0) for a pair of these ions, J m."""
        e = CONSTANTS.elementary_charge
        return CONSTANTS.coulomb_constant * (self.charge / e) ** 2


# 40Ca+ S1/2 ground state, m_S = +1/2 <-> -1/2
CA40 = IonSpecies(
    name="40Ca+",
    mass=40 * CONSTANTS.atomic_mass_unit,
    charge=CONSTANTS.elementary_charge,
    lande_g=2.00225664,
    delta_mS=1.0,
)

SPECIES = {"Ca40": CA40, "40Ca+": CA40}


def _check_frequency(omega):
    omega = np.asarray(omega, dtype=float)
    if np.any(~(omega > 0)):
        raise DomainError(f"angular frequency must be positive, got {omega}")
    return omega


def characteristic_length(species: IonSpecies, omega_z):
    """Coulomb length scale ``(q^2 / (4 pi eps0 m omega_z^2))**(1/3)`` in metres.

    Two ions in a harmonic well of frequency ``omega_z`` sit ``2**(1/3)`` of
    this length apart.
    """
    omega_z = _check_frequency(omega_z)
    length = np.cbrt(species.coulomb_constant / (species.mass * omega_z**2))
    return float(length) if length.ndim == 0 else length


def ground_state_size(species: IonSpecies, omega, nbar=0.0):
    """Wave-packet rms size ``sqrt(hbar / (2 m omega)) * sqrt(2 nbar + 1)``."""
    omega = _check_frequency(omega)
    if np.any(np.asarray(nbar) < 0):
        raise DomainError("mean phonon number must be non-negative")
    x0 = np.sqrt(CONSTANTS.hbar / (2 * species.mass * omega)) * np.sqrt(2 * np.asarray(nbar) + 1)
    return float(x0) if np.ndim(x0) == 0 else x0


def two_ion_spacing(species: IonSpecies, omega_z):
    """Equilibrium separation of two ions on the weak axis."""
    return 2 ** (1 / 3) * characteristic_length(species, omega_z)


def two_pi(freq_hz):
    """Convert an ordinary frequency in Hz to rad/s."""
    return 2 * np.pi * freq_hz
