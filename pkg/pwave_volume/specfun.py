"""Bessel functions used by the reference pairs"""

import logging
from typing import NamedTuple

from scipy import special

from pwave_volume.errors import DomainError, UnsupportedError

LOGGER = logging.getLogger(__name__)

EULER_GAMMA = 0.57721566490153286061

MAX_SPHERICAL_ORDER = 12
MAX_INTEGER_ORDER = 15


class BesselEval(NamedTuple):
    value: float
    derivative: float


def _check_order(order, limit, kind):
    if int(order) != order or order < 0:
        msg = f"{kind} order must be a non-negative integer, got {order}"
        raise DomainError(msg)
    if order > limit:
        msg = f"{kind} order {order} above supported maximum {limit}"
        raise UnsupportedError(msg)


def spherical_bessel(ell, rho):
    """
    Spherical Bessel functions j_ell, y_ell and their derivatives

    :param ell: order, 0 <= ell <= 12
    :param rho: argument, > 0

    :returns: tuple of `BesselEval` (j, y)
    """
    _check_order(ell, MAX_SPHERICAL_ORDER, "spherical Bessel")
    if not rho > 0:
        msg = f"spherical Bessel argument must be > 0, got {rho}"
        raise DomainError(msg)

    ell = int(ell)
    j = BesselEval(
        float(special.spherical_jn(ell, rho)),
        float(special.spherical_jn(ell, rho, derivative=True)),
    )
    y = BesselEval(
        float(special.spherical_yn(ell, rho)),
        float(special.spherical_yn(ell, rho, derivative=True)),
    )
    return j, y


def bessel_integer(n, z):
    """
    Integer-order Bessel functions J_n, Y_n and their derivatives

    :param n: order, 0 <= n <= 15
    :param z: argument, > 0

    :returns: tuple of `BesselEval` (J, Y)
    """
    _check_order(n, MAX_INTEGER_ORDER, "Bessel")
    if not z > 0:
        msg = f"Bessel argument must be > 0, got {z}"
        raise DomainError(msg)

    n = int(n)
    J = BesselEval(float(special.jv(n, z)), float(special.jvp(n, z)))
    Y = BesselEval(float(special.yv(n, z)), float(special.yvp(n, z)))
    return J, Y
