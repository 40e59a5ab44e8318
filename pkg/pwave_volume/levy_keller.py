"""Two-potential (Levy-Keller) description of the threshold p-wave.

The solution is written u = A(x) [phi(x) - psi(x) M(x)] with (phi, psi) a
reference pair of the comparison potential V_f. M obeys the Riccati equation

    dM/dx = -(V - V_f) / W * (phi - psi M)^2

and ln A obeys d ln A/dx = -(V - V_f) / W * psi (phi - psi M). Under a 1/x^3 tail
M diverges as x^2; the constant M0 of its asymptotic expansion is the generalized
scattering volume.
"""

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy.integrate import IntegrationWarning, quad, solve_ivp

from pwave_volume.errors import (
    DiagnosticsError,
    DomainError,
    IntegrationError,
    PoleEvent,
    UnsupportedError,
)
from pwave_volume.refpairs import RefPairSpec, eval_pair, wronskian
from pwave_volume.specfun import EULER_GAMMA, spherical_bessel

LOGGER = logging.getLogger(__name__)

BASIS_FUNCTIONS = {
    "x^2": lambda x: x**2,
    "x": lambda x: x,
    "ln(x)": np.log,
    "1": np.ones_like,
    "ln(x)/x": lambda x: np.log(x) / x,
    "1/x": lambda x: 1.0 / x,
    "ln(x)/x^2": lambda x: np.log(x) / x**2,
    "1/x^2": lambda x: 1.0 / x**2,
    "1/x^3": lambda x: 1.0 / x**3,
}
BASIS_TAGS = tuple(BASIS_FUNCTIONS)

# |psi M / phi| above which the Riccati march continues with N = 1/M, and the
# (inverse) level at which it returns to M
RECIPROCAL_SWITCH = 10.0
MAX_MODE_SWITCHES = 10000


@dataclass(frozen=True)
class AsymptoticExpansion:
    terms: tuple
    M0: Optional[float] = None

    def __post_init__(self):
        tags = [tag for tag, _ in self.terms]
        if len(set(tags)) != len(tags):
            msg = f"duplicate basis tag in {tags}"
            raise DomainError(msg)
        for tag, coefficient in self.terms:
            if tag not in BASIS_FUNCTIONS:
                msg = f"unknown basis tag {tag!r}"
                raise DomainError(msg)
            if not math.isfinite(coefficient):
                msg = f"coefficient of {tag} is not finite: {coefficient}"
                raise DomainError(msg)

    @classmethod
    def from_mapping(cls, coefficients, M0=None):
        """Build with terms in canonical basis order"""
        terms = tuple(
            (tag, float(coefficients[tag])) for tag in BASIS_TAGS if tag in coefficients
        )
        return cls(terms=terms, M0=M0)

    def as_dict(self):
        return dict(self.terms)

    def coefficient(self, tag):
        return self.as_dict().get(tag, 0.0)

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        total = np.zeros_like(x)
        for tag, coefficient in self.terms:
            total = total + coefficient * BASIS_FUNCTIONS[tag](x)
        return total


class PhaseParams(NamedTuple):
    d: float
    t0: float
    k: float


class PerturbationIntegrals(NamedTuple):
    """first-order integrals k int_{kd}^inf Phi Psi / rho^3, c3 factored out"""

    phi_phi: float
    phi_psi: float
    psi_psi: float


def _p_wave_coefficients(V):
    if V.ell != 1:
        msg = f"closed-form expansions exist for l=1 only, got c2={V.c2}"
        raise UnsupportedError(msg)
    return V.c3, V.c4, V.c5, V.c6


def _check_bc(bc, c3f):
    if bc not in ("BC2", "BC23"):
        msg = f"threshold expansions need BC2 or BC23, got {bc!r}"
        raise DomainError(msg)
    if bc == "BC23" and (c3f is None or not c3f > 0):
        msg = f"BC23 needs c3f > 0, got {c3f}"
        raise DomainError(msg)


def delta_m0(c3, c4, c3f):
    """
    Difference M0(BC23) - M0(BC2) of the generalized scattering volume

    :param c3: dipolar coefficient of the potential
    :param c4: 1/x^4 coefficient of the potential
    :param c3f: coefficient of the BC23 comparison potential, > 0

    :returns: float (ru volume)
    """
    if not c3f > 0:
        msg = f"c3f must be > 0, got {c3f}"
        raise DomainError(msg)
    f = c3f
    return (
        -2.0 / 9.0 * f * c4
        - 11.0 / 144.0 * c3**2 * f
        - c3 * f**2 / 24.0
        + (83.0 / 432.0 - EULER_GAMMA / 6.0 - math.log(f) / 12.0) * f**3
    )


def m_expansion(V, bc="BC2", c3f=None, M0=0.0):
    """
    Asymptotic expansion of M(x) through 1/x

    :param V: `Multipole` of an l=1 potential
    :param bc: BC2 or BC23
    :param c3f: comparison coefficient for BC23
    :param M0: generalized scattering volume

    :returns: `AsymptoticExpansion`
    """
    _check_bc(bc, c3f)
    c3, c4, c5, c6 = _p_wave_coefficients(V)

    if bc == "BC2":
        coefficients = {
            "x^2": -c3 / 6.0,
            "x": -(c3**2 / 9.0 + c4 / 3.0),
            "ln(x)": -(c3**3 / 12.0 + c3 * c4 / 3.0 + c5 / 3.0),
            "1": M0,
            "ln(x)/x": c3**4 / 18.0 + 2.0 * c3**2 * c4 / 9.0 + 2.0 * c3 * c5 / 9.0,
            "1/x": 11.0 * c3**4 / 162.0
            + 37.0 * c3**2 * c4 / 108.0
            + 2.0 * c4**2 / 9.0
            + c3 * c5 / 3.0
            + c6 / 3.0
            - 2.0 * c3 * M0 / 3.0,
        }
        return AsymptoticExpansion.from_mapping(coefficients, M0=M0)

    f = c3f
    d = c3 - f
    coefficients = {
        "x^2": -d / 6.0,
        "x": -(d**2 / 9.0 + d * f / 3.0 + c4 / 3.0),
        "ln(x)": -((c3**3 - f**3) / 12.0 + c3 * c4 / 3.0 + c5 / 3.0),
        "1": M0,
        "ln(x)/x": d * (c3**3 / 18.0 + 2.0 * c3 * c4 / 9.0 + 2.0 * c5 / 9.0),
        "1/x": d
        * (
            11.0 * c3**3 / 162.0
            + c3**2 * f / 72.0
            + c3 * f**2 / 135.0
            + 491.0 * f**3 / 3240.0
            + 5.0 * c3 * c4 / 54.0
            - 7.0 * f * c4 / 108.0
        )
        + c3**2 * c4 / 4.0
        + 2.0 * c4**2 / 9.0
        + c3 * c5 / 3.0
        + c6 / 3.0
        - d * f**3 * EULER_GAMMA / 9.0
        - d * f**3 * math.log(f) / 18.0
        - 2.0 * d * M0 / 3.0,
    }
    return AsymptoticExpansion.from_mapping(coefficients, M0=M0)


def a_expansion(V, bc="BC2", c3f=None):
    """
    Asymptotic expansion of the global amplitude A(x) through 1/x^3, A -> 1

    :param V: `Multipole` of an l=1 potential
    :param bc: BC2 or BC23
    :param c3f: comparison coefficient for BC23

    :returns: `AsymptoticExpansion`
    """
    _check_bc(bc, c3f)
    c3, c4, c5, _ = _p_wave_coefficients(V)

    if bc == "BC2":
        coefficients = {
            "1": 1.0,
            "1/x": c3 / 3.0,
            "1/x^2": c3**2 / 12.0 + c4 / 6.0,
            "1/x^3": c3**3 / 36.0 + c3 * c4 / 9.0 + c5 / 9.0,
        }
        return AsymptoticExpansion.from_mapping(coefficients)

    f = c3f
    d = c3 - f
    coefficients = {
        "1": 1.0,
        "1/x": d / 3.0,
        "1/x^2": d**2 / 12.0 + f * d / 24.0 + c4 / 6.0,
        "1/x^3": d**3 / 36.0
        + d**2 * f / 24.0
        + d * f**2 / 60.0
        + c4 * d / 9.0
        + c4 * f / 36.0
        + c5 / 9.0,
    }
    return AsymptoticExpansion.from_mapping(coefficients)


def u_expansion(V, bc="BC2", c3f=None, M0=0.0):
    """
    Asymptotic expansion of the threshold wave function u(x) through 1/x^2

    The wave function does not depend on the reference pair: the BC23 form is the
    BC2 one with M0 shifted by `delta_m0`.

    :param V: `Multipole` of an l=1 potential
    :param bc: BC2 or BC23
    :param c3f: comparison coefficient for BC23
    :param M0: generalized scattering volume in the chosen pair

    :returns: `AsymptoticExpansion`
    """
    _check_bc(bc, c3f)
    c3, c4, c5, c6 = _p_wave_coefficients(V)

    m0 = M0
    if bc == "BC23":
        m0 = M0 - delta_m0(c3, c4, c3f)

    coefficients = {
        "x^2": 1.0,
        "x": c3 / 2.0,
        "1": c3**2 / 4.0 + c4 / 2.0,
        "ln(x)/x": c3**3 / 12.0 + c3 * c4 / 3.0 + c5 / 3.0,
        "1/x": 17.0 * c3**3 / 216.0 + c3 * c4 / 4.0 + c5 / 9.0 - m0,
        "ln(x)/x^2": -(c3**4 / 48.0 + c3**2 * c4 / 12.0 + c3 * c5 / 12.0),
        "1/x^2": -(
            79.0 * c3**4 / 1728.0
            + 11.0 * c3**2 * c4 / 48.0
            + c4**2 / 8.0
            + c6 / 4.0
            + 37.0 * c3 * c5 / 144.0
            - c3 * m0 / 4.0
        ),
    }
    return AsymptoticExpansion.from_mapping(coefficients, M0=M0)


def linear_relation_analytic(V):
    """
    (alpha, beta) of the BC2 relation eta = alpha * M0 + beta for the 1/x term

    :param V: `Multipole` of an l=1 potential

    :returns: tuple (alpha, beta)
    """
    beta = m_expansion(V, "BC2", M0=0.0).coefficient("1/x")
    return -2.0 * V.c3 / 3.0, beta


def delta_potential(V, spec, x):
    """V(x) - V_f(x), with the centrifugal and 1/x^3 parts cancelled analytically"""
    c2_excess = -V.c2 - spec.ell * (spec.ell + 1.0)
    c3_excess = V.c3 - (spec.c3f if spec.bc == "BC23" else 0.0)
    return (
        c2_excess / x**2
        - c3_excess / x**3
        - V.c4 / x**4
        - V.c5 / x**5
        - V.c6 / x**6
    )


@dataclass
class _Segment:
    lower: float
    upper: float
    reciprocal: bool
    solution: object

    def value(self, x):
        y = self.solution(x)[0]
        if self.reciprocal:
            with np.errstate(divide="ignore"):
                return 1.0 / y
        return y


@dataclass
class RiccatiTrace:
    """
    M(x) on a grid, with dense evaluation between grid points

    poles holds (location, (lower, upper)) for every traversal of M through infinity
    """

    x: np.ndarray
    M: np.ndarray
    poles: tuple = ()
    segments: list = field(default_factory=list, repr=False)

    def __iter__(self):
        return iter(zip(self.x, self.M))

    def __len__(self):
        return len(self.x)

    def evaluate(self, x):
        for segment in self.segments:
            if segment.lower <= x <= segment.upper:
                return float(segment.value(x))
        msg = f"x={x} outside the integrated range"
        raise DomainError(msg)


def _march(V, spec, x_start, m_start, x_end, rtol):
    """Integrate M from x_start to x_end, switching to 1/M around poles."""
    W = wronskian(spec)
    ends = (eval_pair(spec, x_start), eval_pair(spec, x_end))
    ratio = min(abs(pair.phi / pair.psi) for pair in ends)
    atol_direct = max(1e-3 * rtol * ratio, 1e-300)
    atol_reciprocal = max(1e-3 * rtol / ratio if ratio > 0 else 1e-300, 1e-300)

    def rhs_direct(x, y):
        pair = eval_pair(spec, x)
        return [-delta_potential(V, spec, x) / W * (pair.phi - pair.psi * y[0]) ** 2]

    def rhs_reciprocal(x, y):
        pair = eval_pair(spec, x)
        return [delta_potential(V, spec, x) / W * (pair.phi * y[0] - pair.psi) ** 2]

    def leave_direct(x, y):
        pair = eval_pair(spec, x)
        return (pair.psi * y[0]) ** 2 - RECIPROCAL_SWITCH**2 * pair.phi**2

    def leave_reciprocal(x, y):
        pair = eval_pair(spec, x)
        return (pair.phi * y[0]) ** 2 - RECIPROCAL_SWITCH**2 * pair.psi**2

    def crossing(x, y):
        return y[0]

    leave_direct.terminal = True
    leave_direct.direction = 1
    leave_reciprocal.terminal = True
    leave_reciprocal.direction = 1
    crossing.terminal = False

    pair = ends[0]
    reciprocal = not math.isfinite(m_start) or abs(pair.psi * m_start) > (
        RECIPROCAL_SWITCH * abs(pair.phi)
    )
    y = (0.0 if not math.isfinite(m_start) else 1.0 / m_start) if reciprocal else m_start

    segments, poles = [], []
    x = x_start
    for _ in range(MAX_MODE_SWITCHES):
        if reciprocal:
            fun, events, atol = rhs_reciprocal, [leave_reciprocal, crossing], atol_reciprocal
        else:
            fun, events, atol = rhs_direct, [leave_direct], atol_direct

        sol = solve_ivp(
            fun,
            (x, x_end),
            [y],
            method="DOP853",
            rtol=rtol,
            atol=atol,
            dense_output=True,
            events=events,
        )
        if sol.status == -1:
            msg = f"Riccati integration failed near x={sol.t[-1]}: {sol.message}"
            raise IntegrationError(msg, location=float(sol.t[-1]))

        x_stop = float(sol.t[-1])
        lower, upper = min(x, x_stop), max(x, x_stop)
        segments.append(_Segment(lower, upper, reciprocal, sol.sol))
        if reciprocal:
            for location in sol.t_events[1]:
                LOGGER.debug("Riccati pole: {}".format(location))
                poles.append((float(location), (lower, upper)))

        if sol.status != 1:
            return segments, poles

        value = float(sol.y[0, -1])
        y = 1.0 / value
        x = x_stop
        reciprocal = not reciprocal

    msg = f"more than {MAX_MODE_SWITCHES} pole switches between {x_start} and {x_end}"
    raise IntegrationError(msg, location=x)


def ricatti_integrate(V, spec, anchor_x, anchor_M, x_grid, rtol=1e-12):
    """
    Integrate the Riccati equation of M(x) from an anchor over a grid

    :param V: `Multipole` of the true potential (same l as the pair)
    :param spec: `RefPairSpec`
    :param anchor_x: position of the anchor value, inside the grid range
    :param anchor_M: M(anchor_x)
    :param x_grid: abscissas at which M is reported
    :param rtol: relative tolerance of the DOP853 steps

    :returns: `RiccatiTrace`
    """
    if V.ell != spec.ell:
        msg = f"potential partial wave {V.ell} differs from pair partial wave {spec.ell}"
        raise DomainError(msg)
    grid = np.sort(np.asarray(x_grid, dtype=float))
    if grid.size == 0 or grid[0] <= 0:
        msg = "grid must be non-empty with positive abscissas"
        raise DomainError(msg)
    if not grid[0] <= anchor_x <= grid[-1]:
        msg = f"anchor {anchor_x} outside grid range [{grid[0]}, {grid[-1]}]"
        raise DomainError(msg)

    segments, poles = [], []
    for x_end in (grid[0], grid[-1]):
        if x_end == anchor_x:
            continue
        branch_segments, branch_poles = _march(V, spec, anchor_x, anchor_M, x_end, rtol)
        segments.extend(branch_segments)
        poles.extend(branch_poles)
    if not segments:
        segments.append(
            _Segment(anchor_x, anchor_x, False, lambda x: np.array([anchor_M]))
        )

    trace = RiccatiTrace(x=grid, M=np.empty_like(grid), poles=tuple(poles))
    trace.segments = segments
    trace.M = np.array([trace.evaluate(x) for x in grid])
    LOGGER.debug("Riccati segments: {}".format(len(segments)))
    return trace


def amplitude_integrate(V, spec, M_trace, x_grid, rtol=1e-12):
    """
    Integrate d ln A / dx = -(V - V_f) / W * psi (phi - psi M) downward from the
    largest grid point, where A is set from its asymptotic expansion.

    :param V: `Multipole`
    :param spec: `RefPairSpec`
    :param M_trace: `RiccatiTrace` covering the grid
    :param x_grid: abscissas
    :param rtol: relative tolerance

    :returns: tuple of arrays (x, A)
    """
    grid = np.sort(np.asarray(x_grid, dtype=float))
    lower, upper = grid[0], grid[-1]
    inside = [location for location, _ in M_trace.poles if lower <= location <= upper]
    if inside:
        msg = f"M passes through a pole at x={inside[0]}, A vanishes there"
        raise PoleEvent(msg, location=inside[0], bracket=(lower, upper))

    W = wronskian(spec)
    start = 1.0
    if V.ell == 1 and spec.bc in ("BC2", "BC23"):
        tail = a_expansion(V, spec.bc, spec.c3f if spec.bc == "BC23" else None)
        start = float(tail.evaluate(upper))

    def rhs(x, y):
        pair = eval_pair(spec, x)
        M = M_trace.evaluate(x)
        return [-delta_potential(V, spec, x) / W * pair.psi * (pair.phi - pair.psi * M)]

    if lower == upper:
        return grid, np.array([start])

    sol = solve_ivp(
        rhs,
        (upper, lower),
        [math.log(start)],
        method="DOP853",
        rtol=rtol,
        atol=1e-14,
        t_eval=grid[::-1],
    )
    if sol.status == -1:
        msg = f"amplitude integration failed near x={sol.t[-1]}: {sol.message}"
        raise IntegrationError(msg, location=float(sol.t[-1]))
    return sol.t[::-1], np.exp(sol.y[0][::-1])


def low_energy_phase(c3, p):
    """
    Tangent of the asymptotic p-wave phase shift from first-order perturbation
    beyond a matching radius d

    :param c3: dipolar coefficient
    :param p: `PhaseParams` (d, t0, k)

    :returns: tan(delta)
    """
    d, t0, k = p.d, p.t0, p.k
    if not (d > 0 and k > 0):
        msg = f"phase parameters need d > 0 and k > 0, got d={d}, k={k}"
        raise DomainError(msg)
    if k * d > 0.1:
        LOGGER.warning("k d = {} is not small, low-energy phase inaccurate".format(k * d))

    return (
        c3 * (k / 4.0 - d**2 * k**3 / 18.0)
        + t0 * (1.0 + 2.0 * c3 / (3.0 * d) - 4.0 * c3 * d * k**2 / 15.0)
        + t0**2
        * c3
        * (
            1.0 / (4.0 * d**4 * k**3)
            + 1.0 / (2.0 * d**2 * k)
            - k / 4.0
            + d**2 * k**3 / 18.0
        )
    )


def low_energy_phase_series(c3, A, d, k):
    """Leading k and k^3 terms of tan(delta) for a short-range phase t0 = -A k^3"""
    return c3 * k / 4.0 - k**3 * (
        A - c3 * A**2 / (4.0 * d**4) + 2.0 * A * c3 / (3.0 * d) + c3 * d**2 / 18.0
    )


# trigonometric form of the l=1 free pair at large rho, divided by rho^3:
# (non-oscillating, cos(2 rho), sin(2 rho)) parts as powers of 1/rho
_TAIL_PARTS = {
    "phi_phi": ({5: 0.5, 3: 0.5}, {5: -0.5, 3: 0.5}, {4: -1.0}),
    "phi_psi": ({}, {4: -1.0}, {5: 0.5, 3: -0.5}),
    "psi_psi": ({5: 0.5, 3: 0.5}, {5: 0.5, 3: -0.5}, {4: 1.0}),
}


def _free_product(name, rho):
    j, y = spherical_bessel(1, rho)
    phi = rho * j.value
    psi = -rho * y.value
    first, second = {"phi_phi": (phi, phi), "phi_psi": (phi, psi), "psi_psi": (psi, psi)}[
        name
    ]
    return first * second / rho**3


def _quad(func, a, b, **kwargs):
    with warnings.catch_warnings():
        warnings.simplefilter("error", IntegrationWarning)
        try:
            value, error = quad(func, a, b, **kwargs)
        except IntegrationWarning as err:
            msg = f"quadrature on [{a}, {b}] did not converge: {err}"
            raise DiagnosticsError(msg)
    return value, error


def perturbation_integrals(d, k, ell=1, upper=None, split=30.0):
    """
    First-order perturbation integrals of the free p-wave pair beyond kd

    :param d: matching radius (ru)
    :param k: wave number (ru)
    :param ell: partial wave (only 1 is supported)
    :param upper: optional finite upper limit in kx, infinite by default
    :param split: rho beyond which the infinite tail is integrated in trigonometric form

    :returns: `PerturbationIntegrals`
    """
    if not (d > 0 and k > 0):
        msg = f"integrals need d > 0 and k > 0, got d={d}, k={k}"
        raise DomainError(msg)
    if ell != 1:
        msg = f"perturbation integrals implemented for l=1, got {ell}"
        raise UnsupportedError(msg)

    lower = k * d
    values = {}
    for name, (flat, cos_part, sin_part) in _TAIL_PARTS.items():
        if upper is not None:
            head, _ = _quad(
                lambda rho: _free_product(name, rho),
                lower,
                upper,
                limit=2000,
                epsabs=1e-14,
                epsrel=1e-12,
            )
            values[name] = k * head
            continue

        cut = max(split, 2.0 * lower)
        head, _ = _quad(
            lambda rho: _free_product(name, rho),
            lower,
            cut,
            limit=2000,
            epsabs=1e-14,
            epsrel=1e-12,
        )
        tail = sum(coefficient / ((power - 1) * cut ** (power - 1)) for power, coefficient in flat.items())
        for weight, part in (("cos", cos_part), ("sin", sin_part)):
            if not part:
                continue
            oscillating, _ = _quad(
                lambda rho, part=part: sum(c * rho**-p for p, c in part.items()),
                cut,
                np.inf,
                weight=weight,
                wvar=2.0,
                limlst=200,
                epsabs=1e-14,
            )
            tail += oscillating
        values[name] = k * (head + tail)

    return PerturbationIntegrals(**values)
