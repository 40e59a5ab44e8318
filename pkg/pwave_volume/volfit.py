"""Fit M(x_max) traces to the asymptotic basis and extract the volume M0"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg, stats

from pwave_volume.ccsolve import (
    GridControl,
    NodalLine,
    SolveRequest,
    regular_sweep,
    threshold_solution,
    with_x_max,
)
from pwave_volume.errors import (
    DomainError,
    IllConditionedError,
    PoleEvent,
    RankError,
)
from pwave_volume.levy_keller import BASIS_FUNCTIONS, delta_m0
from pwave_volume.potentials import ChannelSet, multipole_model

LOGGER = logging.getLogger(__name__)

FULL_BASIS = ("x^2", "x", "ln(x)", "1", "ln(x)/x", "1/x", "ln(x)/x^2", "1/x^2")
# BC23 with m=0 cancels the x^2 divergence and the ln(x)/x term
BC23_M0_BASIS = ("x", "ln(x)", "1", "1/x", "ln(x)/x^2", "1/x^2")
EXTENDED_TAGS = ("1/x^3",)

X_MAX_LO = 20.0
X_MAX_HI = 500.0
X_MAX_POINTS = 50
RESIDUAL_THRESHOLD = 1e-5
CONDITION_LIMIT = 1e12


def default_x_max_grid(lo=X_MAX_LO, hi=X_MAX_HI, points=X_MAX_POINTS):
    if not 0 < lo < hi:
        msg = f"x_max range must satisfy 0 < lo < hi, got ({lo}, {hi})"
        raise DomainError(msg)
    return np.geomspace(lo, hi, points)


def basis_for(bc, m):
    if bc == "BC23" and m == 0:
        return BC23_M0_BASIS
    return FULL_BASIS


@dataclass
class MTrace:
    x_max: np.ndarray
    M: np.ndarray
    m: int
    intensity: float
    x00: float
    n: int
    bc: str
    resonant: bool = False
    poles: list = field(default_factory=list)

    def __post_init__(self):
        self.x_max = np.asarray(self.x_max, dtype=float)
        self.M = np.asarray(self.M, dtype=float)
        if self.x_max.shape != self.M.shape:
            msg = f"trace shapes differ: {self.x_max.shape} vs {self.M.shape}"
            raise DomainError(msg)
        if np.any(np.diff(self.x_max) <= 0):
            msg = "trace x_max values must be strictly ascending"
            raise DomainError(msg)

    def rows(self):
        return list(zip(self.x_max.tolist(), self.M.tolist()))


@dataclass
class FitResult:
    coefficients: dict
    residual_rms: float
    condition: float
    accepted: bool = True

    @property
    def volume(self):
        return self.coefficients.get("1", 0.0)

    @property
    def eta(self):
        return self.coefficients.get("1/x", 0.0)

    def as_dict(self):
        return {
            "coefficients": dict(self.coefficients),
            "volume": self.volume,
            "eta": self.eta,
            "residual_rms": self.residual_rms,
            "condition": self.condition,
            "accepted": self.accepted,
        }


@dataclass
class VolumeResult:
    volume: float
    eta: Optional[float]
    fit: Optional[FitResult] = None
    bc2_equivalent: Optional[float] = None
    pole: bool = False
    location: Optional[float] = None

    def as_dict(self):
        return {
            "volume": self.volume,
            "eta": self.eta,
            "bc2_equivalent": self.bc2_equivalent,
            "pole": self.pole,
            "location": self.location,
            "fit": self.fit.as_dict() if self.fit is not None else None,
        }


def _request(m, intensity, x00, n, bc, x_max, grid, nodal=None):
    return SolveRequest(
        channels=ChannelSet(m=m, n=n),
        intensity=intensity,
        nodal=nodal or NodalLine(x00),
        bc=bc,
        x_max=float(x_max),
        grid=grid,
    )


def _solve_point(request):
    try:
        return threshold_solution(request).m_at_xmax
    except PoleEvent as err:
        return err


def m_trace(
    m,
    intensity,
    x00,
    n=1,
    bc="BC2",
    x_max_grid=None,
    grid=None,
    nodal=None,
    workers=1,
):
    """
    M(x_max) over a grid of x_max values

    :param m: magnetic quantum number
    :param intensity: reduced intensity I
    :param x00: nodal parameter (ru)
    :param n: number of coupled channels
    :param bc: BC2 or BC23 reference pair in the p-channel
    :param x_max_grid: ascending x_max values (default 50 log points on [20, 500])
    :param grid: `GridControl`, fast mode by default
    :param nodal: `NodalLine` overriding x00 with slopes
    :param workers: process count for faithful mode

    :returns: `MTrace`
    """
    x_values = (
        default_x_max_grid() if x_max_grid is None else np.asarray(x_max_grid, float)
    )
    grid = grid or GridControl(mode="fast")
    request = _request(m, intensity, x00, n, bc, x_values[-1], grid, nodal)
    trace = MTrace(
        x_max=x_values,
        M=np.full(x_values.shape, np.nan),
        m=m,
        intensity=intensity,
        x00=request.nodal.x00,
        n=n,
        bc=bc,
    )

    if grid.mode == "fast":
        solutions, poles = regular_sweep(request, x_values)
        trace.M = np.array([solution.m_at_xmax for solution in solutions])
        trace.poles.extend(poles)
        trace.poles.extend(float(x) for x in x_values[~np.isfinite(trace.M)])
        trace.poles.sort()
        trace.resonant = bool(trace.poles)
        if trace.resonant:
            LOGGER.debug("Resonant trace at x_max: {}".format(trace.poles))
        return trace

    requests = [with_x_max(request, x_max) for x_max in x_values]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(_solve_point, requests))
    else:
        results = [_solve_point(item) for item in requests]

    for i, result in enumerate(results):
        if isinstance(result, PoleEvent):
            trace.resonant = True
            trace.poles.append(float(x_values[i]))
        else:
            trace.M[i] = result
    return trace


def pole_side(trace):
    """
    Sign of the volume of a trace that diverges inside the x_max grid

    Beyond its last divergence M(x_max) keeps the sign it tends to, so the side
    is read from the first finite value past it, or as the opposite of the last
    one before it.
    """
    last = max(trace.poles)
    finite = np.isfinite(trace.M)
    after = trace.M[finite & (trace.x_max > last)]
    if after.size:
        return math.copysign(1.0, after[0])
    before = trace.M[finite & (trace.x_max < last)]
    if before.size:
        return -math.copysign(1.0, before[-1])
    return 1.0


def fit_expansion(
    trace,
    tags=None,
    threshold=RESIDUAL_THRESHOLD,
    condition_limit=CONDITION_LIMIT,
):
    """
    Linear least-squares fit of a trace to the asymptotic basis

    :param trace: `MTrace`
    :param tags: basis tags (default chosen from bc and m)
    :param threshold: relative residual above which the fit is not accepted
    :param condition_limit: largest allowed condition of the scaled design matrix

    :returns: `FitResult`
    """
    if trace.resonant:
        msg = f"trace at x00={trace.x00} crosses a pole, refusing to fit"
        raise PoleEvent(msg, location=trace.poles[0] if trace.poles else None)

    tags = tuple(tags or basis_for(trace.bc, trace.m))
    unknown = [tag for tag in tags if tag not in BASIS_FUNCTIONS]
    if unknown:
        msg = f"unknown basis tags {unknown}"
        raise DomainError(msg)
    if any(tag in EXTENDED_TAGS for tag in tags):
        LOGGER.warning("Extended fit basis trades conditioning for bias")
    if len(trace.x_max) < 3 * len(tags):
        msg = f"{len(trace.x_max)} samples for {len(tags)} basis terms, need 3x more"
        raise DomainError(msg)

    x = trace.x_max
    design = np.stack([BASIS_FUNCTIONS[tag](x) for tag in tags], axis=1)
    scale = np.linalg.norm(design, axis=0)
    scaled = design / scale
    condition = float(np.linalg.cond(scaled))
    LOGGER.debug("Fit condition: {}".format(condition))
    if condition > condition_limit:
        msg = (
            f"fit design condition {condition:.3e} above {condition_limit:.1e}, "
            "widen the x_max grid"
        )
        raise IllConditionedError(msg, condition=condition)

    solution, *_ = linalg.lstsq(scaled, trace.M)
    values = solution / scale
    residual = trace.M - design @ values
    residual_rms = float(
        np.sqrt(np.mean(residual**2)) / max(np.sqrt(np.mean(trace.M**2)), 1e-300)
    )
    accepted = residual_rms <= threshold
    if not accepted:
        LOGGER.warning(
            "Fit residual {:.3e} above threshold {:.1e}".format(residual_rms, threshold)
        )

    coefficients = {tag: float(value) for tag, value in zip(tags, values)}
    return FitResult(
        coefficients=coefficients,
        residual_rms=residual_rms,
        condition=condition,
        accepted=accepted,
    )


def reference_model(m, intensity, n):
    """Effective p-wave potential matching the channel count"""
    return multipole_model("diabatic" if n == 1 else "adiabatic", m, intensity)


def extract_volume(
    m,
    intensity,
    x00,
    n=1,
    bc="BC2",
    x_max_grid=None,
    grid=None,
    nodal=None,
    workers=1,
    bc2_equivalent=False,
):
    """
    Generalized scattering volume M0 = v_m(I, x00)

    :param bc2_equivalent: for BC23 also report the value shifted to the BC2 pair

    :returns: `VolumeResult`; at a pole the volume is a signed infinity
    """
    trace = m_trace(m, intensity, x00, n, bc, x_max_grid, grid, nodal, workers)
    if trace.resonant:
        sign = pole_side(trace) if trace.poles else 1.0
        return VolumeResult(
            volume=sign * math.inf,
            eta=None,
            pole=True,
            location=trace.poles[0] if trace.poles else None,
        )

    fit = fit_expansion(trace)
    result = VolumeResult(volume=fit.volume, eta=fit.eta, fit=fit)
    if bc2_equivalent and bc == "BC23":
        V = reference_model(m, intensity, n)
        c3f = abs(V.c3)
        if c3f > 0:
            result.bc2_equivalent = fit.volume - delta_m0(V.c3, V.c4, c3f)
        else:
            result.bc2_equivalent = fit.volume
    return result


@dataclass(frozen=True)
class LinearRelation:
    alpha: float
    beta: float
    r_squared: float


def linear_relation(volumes, etas, min_points=10):
    """
    Ordinary least squares eta = alpha * v + beta over a set of x00 values

    :param volumes: fitted volumes v_m
    :param etas: fitted 1/x coefficients eta_m
    :param min_points: smallest accepted sample count

    :returns: `LinearRelation`
    """
    v = np.asarray(volumes, dtype=float)
    eta = np.asarray(etas, dtype=float)
    if v.shape != eta.shape:
        msg = f"volume and eta samples differ in shape: {v.shape} vs {eta.shape}"
        raise DomainError(msg)
    if v.size < min_points:
        msg = f"linear relation needs at least {min_points} points, got {v.size}"
        raise DomainError(msg)
    if not np.all(np.isfinite(v)) or not np.all(np.isfinite(eta)):
        msg = "linear relation samples must avoid poles"
        raise DomainError(msg)
    if np.std(v) <= 1e-12 * (1.0 + abs(np.mean(v))):
        msg = "volumes have no spread, slope undefined"
        raise RankError(msg)

    fit = stats.linregress(v, eta)
    return LinearRelation(
        alpha=float(fit.slope),
        beta=float(fit.intercept),
        r_squared=float(fit.rvalue**2),
    )
