"""Reference-function pairs (phi, psi) of solvable comparison potentials.

  BC2k  free waves at energy k^2:      phi = kx j_l(kx),  psi = -kx y_l(kx),  W = -k
  BC2   free waves at threshold:       phi = x^(l+1),     psi = x^(-l),        W = -(2l+1)
  BC23  -c3f/x^3 tail at threshold:    Bessel functions of order 2l+1 in 2 sqrt(c3f/x)

All pairs tend to x^(l+1) and x^(-l) (BC2k up to the k-dependent normalization).
"""

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

from pwave_volume import specfun
from pwave_volume.errors import DomainError

LOGGER = logging.getLogger(__name__)

BOUNDARY_CONDITIONS = ("BC2k", "BC2", "BC23")


@dataclass(frozen=True)
class RefPairSpec:
    bc: str
    ell: int
    k: float = 0.0
    c3f: float = 0.0

    def __post_init__(self):
        if self.bc not in BOUNDARY_CONDITIONS:
            msg = f"unknown reference pair {self.bc!r}"
            raise DomainError(msg)
        if int(self.ell) != self.ell or self.ell < 0:
            msg = f"partial wave must be a non-negative integer, got {self.ell}"
            raise DomainError(msg)
        if self.bc == "BC2k":
            if not self.k > 0:
                msg = f"BC2k needs k > 0, got {self.k}"
                raise DomainError(msg)
        elif self.k != 0:
            msg = f"{self.bc} is a threshold pair, k must be 0, got {self.k}"
            raise DomainError(msg)
        if self.bc == "BC23" and not self.c3f > 0:
            msg = f"BC23 needs c3f > 0, got {self.c3f}"
            raise DomainError(msg)


class PairEval(NamedTuple):
    phi: float
    psi: float
    dphi: float
    dpsi: float


def wronskian(spec):
    """
    Wronskian phi psi' - phi' psi of a reference pair

    :param spec: `RefPairSpec`

    :returns: float
    """
    if spec.bc == "BC2k":
        return -spec.k
    return -(2.0 * spec.ell + 1.0)


def reference_potential(spec, x):
    """Potential V_f of the pair, energy excluded (so BC2k shares the BC2 form)"""
    value = spec.ell * (spec.ell + 1.0) / x**2
    if spec.bc == "BC23":
        value -= spec.c3f / x**3
    return value


def eval_pair(spec, x):
    """
    Values and first derivatives of a reference pair

    :param spec: `RefPairSpec`
    :param x: distance (ru), > 0

    :returns: `PairEval`
    """
    if not x > 0:
        msg = f"distance must be > 0, got {x}"
        raise DomainError(msg)

    ell = spec.ell
    if spec.bc == "BC2":
        return PairEval(
            phi=x ** (ell + 1),
            psi=x ** (-ell),
            dphi=(ell + 1) * x**ell,
            dpsi=-ell * x ** (-ell - 1),
        )

    if spec.bc == "BC2k":
        k = spec.k
        rho = k * x
        j, y = specfun.spherical_bessel(ell, rho)
        return PairEval(
            phi=rho * j.value,
            psi=-rho * y.value,
            dphi=k * (j.value + rho * j.derivative),
            dpsi=-k * (y.value + rho * y.derivative),
        )

    f = spec.c3f
    order = 2 * ell + 1
    z = 2.0 * math.sqrt(f / x)
    J, Y = specfun.bessel_integer(order, z)
    root = math.sqrt(x)
    phi_norm = -math.pi * f ** (ell + 0.5) / math.factorial(2 * ell)
    psi_norm = f ** (-ell - 0.5) * math.factorial(2 * ell + 1)

    # d/dx [sqrt(x) F(z)] = (F - z F') / (2 sqrt(x)) with z = 2 sqrt(c3f / x)
    return PairEval(
        phi=phi_norm * root * Y.value,
        psi=psi_norm * root * J.value,
        dphi=phi_norm * (Y.value - z * Y.derivative) / (2.0 * root),
        dpsi=psi_norm * (J.value - z * J.derivative) / (2.0 * root),
    )
