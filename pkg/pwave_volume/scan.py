"""Nodal-parameter and intensity scans, field-free parameters, resonance labels.

The field-free threshold problem u'' = [l(l+1)/x^2 - 1/x^6] u has the exact
solutions sqrt(x) J_{+-nu}(1/(2x^2)) with nu = (2l+1)/4; normalized to x^(l+1)
and x^(-l) at large x they serve as the matching pair of `field_free_params`.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Optional

import numpy as np
from scipy import optimize, special
from scipy.integrate import solve_ivp

from pwave_volume.ccsolve import GridControl
from pwave_volume.errors import DomainError, IntegrationError, NumericalError
from pwave_volume.volfit import extract_volume

LOGGER = logging.getLogger(__name__)

QUASI_PERIOD = (0.142152, 0.152135)
SCAN_POINTS = 150
POLE_XTOL = 1e-9
BISECTION_FRACTIONS = (0.5, 0.25, 0.75)
POLE_MIN_AMPLITUDE = 1e3
MATCH_TOLERANCE = 1e-3
WIDTH_FACTOR = 10.0


def double_factorial(k):
    """k!! with (-1)!! = 0!! = 1"""
    return math.prod(range(k, 0, -2)) if k > 0 else 1


@dataclass(frozen=True)
class ScatteringParams:
    ell: int
    value: float
    a_power: float

    @property
    def length(self):
        """a_l, the real (2l+1)-th root of a_l^(2l+1)"""
        return math.copysign(abs(self.a_power) ** (1.0 / (2 * self.ell + 1)), self.a_power)

    @property
    def volume(self):
        if self.ell != 1:
            return None
        return self.a_power / 3.0

    def as_dict(self):
        return {
            "ell": self.ell,
            "value": self.value,
            "a_power": self.a_power,
            "length": self.length,
            "volume": self.volume,
        }


def _check_ell(ell):
    if int(ell) != ell or ell < 0:
        msg = f"partial wave must be a non-negative integer, got {ell}"
        raise DomainError(msg)


def vdw_pair(ell, x):
    """
    Exact threshold solutions of the field-free problem

    :param ell: partial wave
    :param x: distance (ru), > 0

    :returns: tuple (phi, psi, dphi, dpsi), phi ~ x^(l+1) and psi ~ x^(-l)
    """
    _check_ell(ell)
    if not x > 0:
        msg = f"distance must be > 0, got {x}"
        raise DomainError(msg)

    nu = (2.0 * ell + 1.0) / 4.0
    z = 1.0 / (2.0 * x**2)
    root = math.sqrt(x)
    phi_norm = special.gamma(1.0 - nu) * 2.0 ** (-2.0 * nu)
    psi_norm = special.gamma(1.0 + nu) * 2.0 ** (2.0 * nu)

    def value_and_slope(order):
        value = special.jv(order, z)
        # dz/dx = -1/x^3
        slope = value / (2.0 * root) - root * special.jvp(order, z) / x**3
        return root * value, slope

    phi, dphi = value_and_slope(-nu)
    psi, dpsi = value_and_slope(nu)
    return phi_norm * phi, psi_norm * psi, phi_norm * dphi, psi_norm * dpsi


def _params(ell, a_power):
    value = a_power / (double_factorial(2 * ell + 1) * double_factorial(2 * ell - 1))
    return ScatteringParams(ell=int(ell), value=value, a_power=a_power)


def field_free_exact(ell, x00):
    """Closed-form field-free parameters of a node at x00"""
    _check_ell(ell)
    phi, psi, _, _ = vdw_pair(ell, x00)
    return _params(ell, phi / psi)


def field_free_params(ell, x00, matching_radius=None, rtol=1e-12):
    """
    Field-free scattering parameter of partial wave ell for a node at x00

    The threshold equation is integrated outward from the node and the solution
    is projected on the exact pair, u = A phi + B psi.

    :param ell: partial wave, >= 0
    :param x00: nodal parameter (ru), > 0
    :param matching_radius: projection radius (default max(4 x00, 1))
    :param rtol: relative integration tolerance

    :returns: `ScatteringParams`
    """
    _check_ell(ell)
    if not x00 > 0:
        msg = f"nodal parameter must be > 0, got {x00}"
        raise DomainError(msg)

    x_match = matching_radius or max(4.0 * x00, 1.0)
    if not x_match > x00:
        msg = f"matching radius {x_match} must exceed x00={x00}"
        raise DomainError(msg)

    centrifugal = ell * (ell + 1.0)

    def rhs(x, y):
        return [y[1], (centrifugal / x**2 - 1.0 / x**6) * y[0]]

    sol = solve_ivp(
        rhs,
        (x00, x_match),
        [0.0, 1.0],
        method="DOP853",
        rtol=rtol,
        atol=1e-14,
        max_step=x00 / 100.0,
    )
    if sol.status != 0:
        msg = f"field-free integration failed: {sol.message}"
        raise IntegrationError(msg, location=float(sol.t[-1]))

    u, du = sol.y[:, -1]
    phi, psi, dphi, dpsi = vdw_pair(ell, x_match)
    wronskian = phi * dpsi - dphi * psi
    A = (u * dpsi - du * psi) / wronskian
    B = (phi * du - dphi * u) / wronskian
    LOGGER.debug("Field-free amplitudes: {}".format((A, B)))
    return _params(ell, -B / A)


def field_free_poles(ell, lo=QUASI_PERIOD[0], hi=QUASI_PERIOD[1], points=400):
    """x00 values in (lo, hi) where the field-free parameter of ell diverges"""
    _check_ell(ell)
    nu = (2.0 * ell + 1.0) / 4.0

    def amplitude(x00):
        return special.jv(nu, 1.0 / (2.0 * x00**2))

    axis = np.linspace(lo, hi, points)
    values = amplitude(axis)
    poles = []
    for i in np.nonzero(np.sign(values[:-1]) != np.sign(values[1:]))[0]:
        poles.append(optimize.brentq(amplitude, axis[i], axis[i + 1], xtol=1e-12))
    return poles


def field_free_curve(x00_grid, ells=(0, 1, 3)):
    """
    Field-free parameters over an x00 grid

    :returns: list of rows {"x00": ..., "l=0": ..., ...}, values a_l^(2l+1)
              normalized by the double factorials
    """
    rows = []
    for x00 in x00_grid:
        row = {"x00": float(x00)}
        for ell in ells:
            row[f"l={ell}"] = field_free_exact(ell, float(x00)).value
        rows.append(row)
    return rows


@dataclass
class Resonance:
    position: float
    bracket: tuple
    n_appear: int = 1
    signs: tuple = (0, 0)
    width: Optional[float] = None
    ambiguous: bool = False

    @property
    def label(self):
        return 2 * self.n_appear - 1

    def as_dict(self):
        return {
            "position": self.position,
            "bracket": list(self.bracket),
            "label": self.label,
            "n_appear": self.n_appear,
            "signs": list(self.signs),
            "width": self.width,
            "ambiguous": self.ambiguous,
        }


@dataclass
class ScanCurve:
    axis: np.ndarray
    values: np.ndarray
    provenance: dict
    pole_flags: np.ndarray = None
    brackets: list = field(default_factory=list)

    def __post_init__(self):
        self.axis = np.asarray(self.axis, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if np.any(np.diff(self.axis) <= 0):
            msg = "scan axis must be strictly ascending"
            raise DomainError(msg)
        if self.pole_flags is None:
            self.pole_flags = np.isinf(self.values)

    def rows(self):
        return list(
            zip(self.axis.tolist(), self.values.tolist(), self.pole_flags.tolist())
        )

    def rows_xy(self):
        return list(zip(self.axis.tolist(), self.values.tolist()))


@dataclass(frozen=True)
class ScanSettings:
    """Solver settings shared by every point of a scan"""

    n: int = 1
    bc: str = "BC2"
    x_max_grid: tuple = None
    grid: GridControl = GridControl(mode="fast")
    workers: int = 1


def _volume(m, intensity, x00, settings):
    try:
        return extract_volume(
            m,
            intensity,
            x00,
            n=settings.n,
            bc=settings.bc,
            x_max_grid=settings.x_max_grid,
            grid=settings.grid,
        ).volume
    except NumericalError as err:
        LOGGER.debug("Scan point x00={} failed: {}".format(x00, err))
        return math.nan


def _volume_task(task):
    return _volume(*task)


def _evaluate_all(tasks, workers):
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            return list(executor.map(_volume_task, tasks))
    return [_volume_task(task) for task in tasks]


def _trend(values):
    """Direction in which M0 grows between poles, from the steps of valid points"""
    steps = np.diff(values[np.isfinite(values)])
    if steps.size == 0:
        return 1.0
    direction = np.sign(np.median(steps))
    return float(direction) if direction != 0 else 1.0


def _signs(left, right):
    return (int(np.sign(left)), int(np.sign(right)))


def _descends(trend, v_lo, v_mid):
    return trend * (v_mid - v_lo) < 0


def _changes_sign(v_lo, v_mid):
    return np.sign(v_mid) != np.sign(v_lo)


def _bisect(evaluate, lo, hi, v_lo, v_hi, keep_left, xtol):
    """
    Shrink [lo, hi] around the point where `keep_left` locates the feature

    :returns: tuple (lo, hi, v_lo, v_hi, position of an infinite value or None)
    """
    while hi - lo > xtol * max(1.0, abs(lo)):
        for fraction in BISECTION_FRACTIONS:
            mid = lo + fraction * (hi - lo)
            v_mid = evaluate(mid)
            if not math.isnan(v_mid):
                break
        else:
            LOGGER.debug("No valid point inside [{}, {}]".format(lo, hi))
            break
        if math.isinf(v_mid):
            return lo, hi, v_lo, v_hi, mid
        if keep_left(v_lo, v_mid):
            hi, v_hi = mid, v_mid
        else:
            lo, v_lo = mid, v_mid
    return lo, hi, v_lo, v_hi, None


def _find_poles(axis, values, evaluate, xtol=POLE_XTOL):
    """
    Locate the divergences of a scanned M0

    Between poles M0 is monotone, so a pole shows up as a step against the
    overall trend, with or without a sign change. NaN points are skipped.

    :param axis: ascending scan abscissae
    :param values: M0 at the abscissae (inf at detected poles, nan at failures)
    :param evaluate: callable giving M0 at any abscissa
    :param xtol: relative width at which a bracket is considered resolved

    :returns: list of `Resonance`
    """
    values = np.asarray(values, dtype=float)
    valid = np.nonzero(~np.isnan(values))[0]
    trend = _trend(values)
    resonances = []

    k = 0
    while k < len(valid):
        i = valid[k]
        if math.isinf(values[i]):
            # grid points on the pole itself
            end = k
            while end + 1 < len(valid) and math.isinf(values[valid[end + 1]]):
                end += 1
            before = valid[k - 1] if k > 0 else i
            after = valid[end + 1] if end + 1 < len(valid) else valid[end]
            resonance = Resonance(
                position=float(0.5 * (axis[i] + axis[valid[end]])),
                bracket=(float(axis[before]), float(axis[after])),
                signs=_signs(values[before], values[after]),
            )
            resonance.width = _width(axis, values, before, after)
            resonances.append(resonance)
            k = end + 1
            continue
        if k + 1 == len(valid) or math.isinf(values[valid[k + 1]]):
            k += 1
            continue

        j = valid[k + 1]
        k += 1
        left, right = values[i], values[j]
        if trend * (right - left) < 0:
            keep_left = partial(_descends, trend)
        elif np.sign(left) != np.sign(right):
            keep_left = _changes_sign
        else:
            continue

        lo, hi, v_lo, v_hi, hit = _bisect(
            evaluate, axis[i], axis[j], left, right, keep_left, xtol
        )
        if hit is None and not (
            abs(v_lo) > POLE_MIN_AMPLITUDE and abs(v_hi) > POLE_MIN_AMPLITUDE
        ):
            LOGGER.debug("Zero crossing or smooth step of M0 near {}".format(lo))
            continue

        resonance = Resonance(
            position=float(hit if hit is not None else 0.5 * (lo + hi)),
            bracket=(float(axis[i]), float(axis[j])),
            signs=_signs(v_lo, v_hi),
        )
        resonance.width = _width(axis, values, i, j)
        resonances.append(resonance)
    return resonances


def _width(axis, values, i, j):
    """x-extent around the bracket [i, j] where |M0| exceeds the width level"""
    magnitude = np.where(np.isnan(values), 0.0, np.abs(values))
    finite = magnitude[np.isfinite(values)]
    if finite.size == 0:
        return None
    level = WIDTH_FACTOR * float(np.median(finite))
    large = magnitude > level
    lo = i
    while lo > 0 and large[lo - 1] and large[lo]:
        lo -= 1
    hi = j
    while hi < len(axis) - 1 and large[hi + 1] and large[hi]:
        hi += 1
    return float(axis[hi] - axis[lo])


def default_x00_grid(lo=QUASI_PERIOD[0], hi=QUASI_PERIOD[1], points=SCAN_POINTS):
    if not 0 < lo < hi:
        msg = f"x00 range must satisfy 0 < lo < hi, got ({lo}, {hi})"
        raise DomainError(msg)
    return np.linspace(lo, hi, points)


def scan_x00(m, intensity, x00_grid=None, settings=None):
    """
    Generalized scattering volume over a grid of nodal parameters

    :param m: magnetic quantum number
    :param intensity: reduced intensity I
    :param x00_grid: ascending nodal parameters (default 150 points on the
                     s-wave quasi-period)
    :param settings: `ScanSettings`

    :returns: tuple (`ScanCurve`, list of `Resonance`)
    """
    settings = settings or ScanSettings()
    axis = default_x00_grid() if x00_grid is None else np.asarray(x00_grid, float)
    tasks = [(m, intensity, float(x00), settings) for x00 in axis]
    values = np.array(_evaluate_all(tasks, settings.workers))

    resonances = _find_poles(
        axis, values, lambda x00: _volume(m, intensity, x00, settings)
    )
    for resonance in resonances:
        resonance.n_appear = settings.n
    LOGGER.debug("Resonances: {}".format([r.position for r in resonances]))

    curve = ScanCurve(
        axis=axis,
        values=values,
        provenance={
            "m": m,
            "intensity": intensity,
            "n": settings.n,
            "bc": settings.bc,
        },
        brackets=[resonance.bracket for resonance in resonances],
    )
    return curve, resonances


def scan_intensity(m, x00, intensity_grid, settings=None):
    """
    Generalized scattering volume over a grid of intensities at fixed x00

    :returns: tuple (`ScanCurve`, list of `Resonance`)
    """
    settings = settings or ScanSettings()
    axis = np.asarray(intensity_grid, dtype=float)
    if np.any(axis < 0):
        msg = "intensities must be >= 0"
        raise DomainError(msg)
    tasks = [(m, float(intensity), x00, settings) for intensity in axis]
    values = np.array(_evaluate_all(tasks, settings.workers))

    resonances = _find_poles(
        axis, values, lambda intensity: _volume(m, intensity, x00, settings)
    )
    curve = ScanCurve(
        axis=axis,
        values=values,
        provenance={"m": m, "x00": x00, "n": settings.n, "bc": settings.bc},
        brackets=[resonance.bracket for resonance in resonances],
    )
    return curve, resonances


def match_resonances(known, found, tolerance=MATCH_TOLERANCE):
    """
    Pair resonances of consecutive channel counts by position

    :returns: tuple (matched pairs (known index, found index), unmatched found
              indices, ambiguous found indices)
    """
    if not known or not found:
        return [], list(range(len(found))), []

    known_positions = np.array([resonance.position for resonance in known])
    found_positions = np.array([resonance.position for resonance in found])
    distance = np.abs(known_positions[:, None] - found_positions[None, :])
    cost = np.where(distance <= tolerance, distance, 1e6)
    rows, cols = optimize.linear_sum_assignment(cost)

    pairs = [(r, c) for r, c in zip(rows, cols) if distance[r, c] <= tolerance]
    paired = {c for _, c in pairs}
    unmatched = [c for c in range(len(found)) if c not in paired]
    ambiguous = [
        c
        for c in range(len(found))
        if np.count_nonzero(distance[:, c] <= tolerance) > 1
        or any(
            np.count_nonzero(distance[r, :] <= tolerance) > 1
            for r in np.nonzero(distance[:, c] <= tolerance)[0]
        )
    ]
    return pairs, unmatched, ambiguous


def label_resonances(m, intensity, n_max, x00_grid=None, settings=None):
    """
    Label resonances by the smallest channel count at which they appear

    :param m: magnetic quantum number
    :param intensity: reduced intensity I
    :param n_max: largest channel count, >= 1
    :param x00_grid: nodal parameter grid
    :param settings: `ScanSettings`; its channel count is replaced by 1..n_max

    :returns: tuple (list of `Resonance` at n_max positions, {n: `ScanCurve`})
    """
    if int(n_max) != n_max or n_max < 1:
        msg = f"n_max must be a positive integer, got {n_max}"
        raise DomainError(msg)
    settings = settings or ScanSettings()

    tracked = []
    curves = {}
    for n in range(1, int(n_max) + 1):
        current = ScanSettings(
            n=n,
            bc=settings.bc,
            x_max_grid=settings.x_max_grid,
            grid=settings.grid,
            workers=settings.workers,
        )
        curve, found = scan_x00(m, intensity, x00_grid, current)
        curves[n] = curve

        pairs, unmatched, ambiguous = match_resonances(tracked, found)
        for r, c in pairs:
            found[c].n_appear = tracked[r].n_appear
            found[c].ambiguous = tracked[r].ambiguous
        for c in unmatched:
            found[c].n_appear = n
        for c in ambiguous:
            found[c].ambiguous = True
            LOGGER.warning(
                "Ambiguous resonance tracking near x00={:.6f} at n={}".format(
                    found[c].position, n
                )
            )
        tracked = found

    return tracked, curves
