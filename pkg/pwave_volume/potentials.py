"""Channel coupling by the dipolar term and effective p-wave potentials.

In reduced units the threshold equation reads u'' = W(x) u with

    W_ij = delta_ij [l_i (l_i + 1) / x^2 - 1 / x^6] - I <l_i m| cos^2 - 1/3 |l_j m> / x^3

over the odd partial waves l = 1, 3, ..., 2n - 1. The effective single-channel
potentials are written V(x) = -c2/x^2 - c3/x^3 - c4/x^4 - c5/x^5 - c6/x^6.
"""

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
from sympy import Rational, sqrt
from sympy.physics.wigner import wigner_3j

from pwave_volume.errors import DiagnosticsError, DomainError

LOGGER = logging.getLogger(__name__)

MODELS = ("diabatic", "adiabatic", "nonadiabatic")

# rational parts of the effective p-wave potentials, keyed by (model, |m|):
# (c3 / I, c4 / I^2, c5 / I^3, (c6 - 1) / I^4)
_MULTIPOLE_COEFFICIENTS = {
    ("diabatic", 0): (Fraction(4, 15), 0, 0, 0),
    ("diabatic", 1): (Fraction(-2, 15), 0, 0, 0),
    ("adiabatic", 0): (
        Fraction(4, 15),
        Fraction(6, 875),
        Fraction(-4, 65625),
        Fraction(-86, 20671875),
    ),
    ("adiabatic", 1): (
        Fraction(-2, 15),
        Fraction(4, 875),
        Fraction(8, 65625),
        Fraction(8, 6890625),
    ),
    ("nonadiabatic", 0): (
        Fraction(4, 15),
        Fraction(33, 4375),
        Fraction(-4, 46875),
        Fraction(-3814, 516796875),
    ),
    ("nonadiabatic", 1): (
        Fraction(-2, 15),
        Fraction(22, 4375),
        Fraction(8, 46875),
        Fraction(472, 172265625),
    ),
}

ORACLE_CONDITION_LIMIT = 1e8


@dataclass(frozen=True)
class ChannelSet:
    m: int
    n: int
    ells: tuple = field(init=False)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            msg = f"channel count must be a positive integer, got {self.n}"
            raise DomainError(msg)
        if abs(self.m) > 1:
            msg = f"|m| must be 0 or 1 for odd partial waves from l=1, got {self.m}"
            raise DomainError(msg)
        object.__setattr__(self, "ells", tuple(range(1, 2 * int(self.n), 2)))


@dataclass(frozen=True)
class Multipole:
    c2: float
    c3: float
    c4: float
    c5: float
    c6: float
    model: str = "custom"

    @property
    def ell(self):
        """partial wave carried by the rotational term c2 = -l(l+1)"""
        return int(round((-1.0 + math.sqrt(max(1.0 - 4.0 * self.c2, 0.0))) / 2.0))

    def value(self, x):
        """V(x) for scalar or array x"""
        return (
            -self.c2 / x**2
            - self.c3 / x**3
            - self.c4 / x**4
            - self.c5 / x**5
            - self.c6 / x**6
        )


@lru_cache(maxsize=None)
def anisotropy_coupling(ell, ell_prime, m):
    """
    Matrix element <l m| cos^2(theta) - 1/3 |l' m> between spherical harmonics

    :param ell: partial wave l
    :param ell_prime: partial wave l'
    :param m: magnetic quantum number

    :returns: float
    """
    if abs(m) > min(ell, ell_prime):
        msg = f"|m|={abs(m)} exceeds min(l, l')={min(ell, ell_prime)}"
        raise DomainError(msg)
    if abs(ell - ell_prime) not in (0, 2):
        return 0.0

    # cos^2 - 1/3 = (2/3) P2
    value = (
        Rational(2, 3)
        * (-1) ** abs(m)
        * wigner_3j(ell, 2, ell_prime, 0, 0, 0)
        * wigner_3j(ell, 2, ell_prime, -m, 0, m)
        * sqrt((2 * ell + 1) * (2 * ell_prime + 1))
    )
    return float(value)


@lru_cache(maxsize=None)
def anisotropy_matrix(channels):
    """Angular coupling matrix of a `ChannelSet` (read-only array)"""
    ells = channels.ells
    matrix = np.array(
        [[anisotropy_coupling(a, b, channels.m) for b in ells] for a in ells]
    )
    matrix.setflags(write=False)
    return matrix


def centrifugal_vector(channels):
    return np.array([ell * (ell + 1.0) for ell in channels.ells])


def coupling_matrix(channels, intensity, x):
    """
    Coupling matrix W(x) of the threshold equation u'' = W u

    :param channels: `ChannelSet`
    :param intensity: reduced intensity I
    :param x: distance (ru), > 0

    :returns: symmetric n x n `numpy.ndarray`
    """
    if not x > 0:
        msg = f"distance must be > 0, got {x}"
        raise DomainError(msg)

    diagonal = centrifugal_vector(channels) / x**2 - 1.0 / x**6
    return np.diag(diagonal) - intensity * anisotropy_matrix(channels) / x**3


def _check_model(model, m, intensity):
    if model not in MODELS:
        msg = f"unknown potential model {model!r}, expected one of {MODELS}"
        raise DomainError(msg)
    if abs(m) > 1:
        msg = f"effective p-wave potentials need |m| in (0, 1), got {m}"
        raise DomainError(msg)
    if not intensity >= 0:
        msg = f"intensity must be >= 0, got {intensity}"
        raise DomainError(msg)


def multipole_model(model, m, intensity):
    """
    Closed-form effective p-wave potential

    :param model: one of diabatic, adiabatic, nonadiabatic
    :param m: magnetic quantum number
    :param intensity: reduced intensity I >= 0

    :returns: `Multipole`
    """
    _check_model(model, m, intensity)

    r3, r4, r5, r6 = _MULTIPOLE_COEFFICIENTS[(model, abs(m))]
    return Multipole(
        c2=-2.0,
        c3=float(r3) * intensity,
        c4=float(r4) * intensity**2,
        c5=float(r5) * intensity**3,
        c6=1.0 + float(r6) * intensity**4,
        model=model,
    )


def adiabatic_series_oracle(
    m, intensity, include_nonadiabatic=False, radius=10.0, points=64, order=12
):
    """
    Extract the multipolar coefficients of the lowest eigenvalue of the l in {1, 3}
    coupling matrix numerically.

    The eigenvalue (optionally minus the squared derivative of the mixing angle) is
    sampled on the circle |x| = radius of the complex plane, where powers of 1/x
    are orthogonal, and fitted to 1/x, ..., 1/x^order after multiplication by x^2.

    :param m: magnetic quantum number
    :param intensity: reduced intensity I >= 0
    :param include_nonadiabatic: add the kinetic correction of the adiabatic state
    :param radius: sampling radius (ru)
    :param points: number of samples on the circle
    :param order: highest fitted power of 1/x

    :returns: `Multipole`
    """
    model = "nonadiabatic" if include_nonadiabatic else "adiabatic"
    _check_model(model, m, intensity)
    if points < 2 * order:
        msg = f"oracle needs at least {2 * order} samples, got {points}"
        raise DomainError(msg)

    a11 = anisotropy_coupling(1, 1, m)
    a13 = anisotropy_coupling(1, 3, m)
    a33 = anisotropy_coupling(3, 3, m)

    angles = 2.0 * np.pi * np.arange(points) / points
    x = radius * np.exp(1j * angles)
    y = 1.0 / x

    # x^2 W without the common -1/x^4
    p = 2.0 - intensity * a11 * y
    s = 12.0 - intensity * a33 * y
    b = -intensity * a13 * y
    lowest = 0.5 * (p + s) - np.sqrt((0.5 * (s - p)) ** 2 + b**2)
    residual = lowest - 2.0

    if include_nonadiabatic:
        denominator = 10.0 * x - intensity * (a33 - a11)
        g = -2.0 * intensity * a13 / denominator
        dg = 20.0 * intensity * a13 / denominator**2
        dtheta = 0.5 * dg / (1.0 + g**2)
        residual = residual - x**2 * dtheta**2

    design = np.stack([y**k for k in range(1, order + 1)], axis=1)
    scale = np.linalg.norm(design, axis=0)
    scaled = design / scale
    condition = np.linalg.cond(scaled)
    LOGGER.debug("Oracle condition: {}".format(condition))
    if condition > ORACLE_CONDITION_LIMIT:
        msg = f"oracle fit condition {condition:.3e} above {ORACLE_CONDITION_LIMIT:.1e}"
        raise DiagnosticsError(msg)

    solution, *_ = np.linalg.lstsq(scaled, residual, rcond=None)
    coefficients = solution / scale

    leading = coefficients[:4]
    if np.max(np.abs(leading.imag)) > 1e-9 * (1.0 + np.max(np.abs(leading.real))):
        msg = f"oracle coefficients not real: {leading}"
        raise DiagnosticsError(msg)

    q1, q2, q3, q4 = leading.real
    return Multipole(
        c2=-2.0, c3=-q1, c4=-q2, c5=-q3, c6=1.0 - q4, model=model
    )
