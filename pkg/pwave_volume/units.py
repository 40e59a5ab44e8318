"""Van der Waals reduced units.

Lengths are measured in sigma = (2 mu C6 / hbar^2)^(1/4), energies in
epsilon = hbar^2 / (2 mu sigma^2) and laser intensities in
beta = c sigma^3 epsilon / (12 pi alpha1 alpha2). Inputs are SI with
polarizabilities given as volumes (m^3).
"""

import logging
import math
from dataclasses import dataclass

from scipy import constants

from pwave_volume.errors import DomainError

LOGGER = logging.getLogger(__name__)

HBAR = constants.hbar
SPEED_OF_LIGHT = constants.c

AMU = constants.atomic_mass
BOHR = constants.physical_constants["Bohr radius"][0]
HARTREE = constants.physical_constants["Hartree energy"][0]


@dataclass(frozen=True)
class UnitSystem:
    mu: float
    C6: float
    alpha1: float
    alpha2: float
    sigma: float
    epsilon: float
    beta_intensity: float
    hbar: float = HBAR
    c: float = SPEED_OF_LIGHT


def _require_positive(**values):
    for name, value in values.items():
        if not value > 0 or not math.isfinite(value):
            msg = f"{name} must be finite and > 0, got {value}"
            raise DomainError(msg)


def make_unit_system(mu, C6, alpha1, alpha2, hbar=HBAR, c=SPEED_OF_LIGHT):
    """
    Build the reduced unit system of a colliding pair

    :param mu: reduced mass
    :param C6: van der Waals coefficient (energy * length^6)
    :param alpha1: static polarizability volume of atom 1
    :param alpha2: static polarizability volume of atom 2
    :param hbar: reduced Planck constant (SI by default)
    :param c: speed of light (SI by default)

    :returns: `UnitSystem`
    """
    _require_positive(mu=mu, C6=C6, alpha1=alpha1, alpha2=alpha2, hbar=hbar, c=c)

    sigma = (2.0 * mu * C6 / hbar**2) ** 0.25
    epsilon = hbar**2 / (2.0 * mu * sigma**2)
    beta_intensity = c * sigma**3 * epsilon / (12.0 * math.pi * alpha1 * alpha2)

    LOGGER.debug("sigma: {}".format(sigma))
    LOGGER.debug("epsilon: {}".format(epsilon))
    LOGGER.debug("beta: {}".format(beta_intensity))
    return UnitSystem(
        mu=mu,
        C6=C6,
        alpha1=alpha1,
        alpha2=alpha2,
        sigma=sigma,
        epsilon=epsilon,
        beta_intensity=beta_intensity,
        hbar=hbar,
        c=c,
    )


def unit_system_from_atomic(mu_amu, C6_au, alpha1_au, alpha2_au):
    """
    Build the unit system from atomic-unit inputs

    :param mu_amu: reduced mass in unified atomic mass units
    :param C6_au: C6 in Hartree * bohr^6
    :param alpha1_au: polarizability of atom 1 in bohr^3
    :param alpha2_au: polarizability of atom 2 in bohr^3

    :returns: `UnitSystem` with SI contents
    """
    return make_unit_system(
        mu_amu * AMU,
        C6_au * HARTREE * BOHR**6,
        alpha1_au * BOHR**3,
        alpha2_au * BOHR**3,
    )


def dipole_strength_to_ru(D, u):
    """
    Reduced intensity of a dipole-dipole strength D (energy * length^3)

    :param D: induced dipole strength
    :param u: `UnitSystem`

    :returns: intensity in reduced units
    """
    if not D >= 0:
        msg = f"dipole strength must be >= 0, got {D}"
        raise DomainError(msg)
    return 3.0 * D / (u.epsilon * u.sigma**3)


def dipole_strength(intensity, u):
    """Induced dipole strength D = 4 pi I alpha1 alpha2 / c of a laser intensity (SI)"""
    if not intensity >= 0:
        msg = f"intensity must be >= 0, got {intensity}"
        raise DomainError(msg)
    return 4.0 * math.pi * intensity * u.alpha1 * u.alpha2 / u.c


def length_to_ru(r, u):
    return r / u.sigma


def length_from_ru(x, u):
    return x * u.sigma


def energy_to_ru(energy, u):
    return energy / u.epsilon


def energy_from_ru(energy, u):
    return energy * u.epsilon


def intensity_to_ru(intensity, u):
    return intensity / u.beta_intensity


def intensity_from_ru(value, u):
    return value * u.beta_intensity
