"""Coupled-channel threshold solutions with nodal-line boundary conditions.

Faithful mode follows the construction channel by channel: for every channel j a
pair f^j_+ / f^j_- is started at x_max from the reference pair of that channel,
all 2n solutions are propagated inward to the nodal positions and the solution

    z = f^1_+ - sum_j Mbar_j f^j_-

vanishing at every nodal position fixes Mbar; M(x_max) = Mbar_1.

Fast mode propagates the regular solutions outward once. Near the wall it works
with values and derivatives; beyond the gauge radius it works with the
two-potential coefficients u = phi c - psi d of every channel, so that
M(x_max) = (D C^-1)_11 is read off at every x_max of a grid from one propagation.
Out there the closed channels grow like x^(l+1) and swamp any basis of raw
solutions, so the span is carried as the matrix R = D C^-1 itself.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy import linalg
from scipy.integrate import solve_ivp

from pwave_volume.errors import DomainError, IntegrationError, PoleEvent
from pwave_volume.potentials import (
    ChannelSet,
    anisotropy_coupling,
    anisotropy_matrix,
    centrifugal_vector,
)
from pwave_volume.refpairs import RefPairSpec, eval_pair, wronskian

LOGGER = logging.getLogger(__name__)

CONDITION_SUBDIVIDE = 1e10
CONDITION_POLE = 1e14
CONDITION_RICCATI = 1e8
# |R_ij| relative to its natural size beyond which a segment is redone as a block
RICCATI_LIMIT = 1e10
MODES = ("faithful", "fast")


@dataclass(frozen=True)
class NodalLine:
    x00: float
    gamma_E: float = 0.0
    gamma_L: float = 0.0
    gamma_I: float = 0.0

    def __post_init__(self):
        if not self.x00 > 0:
            msg = f"nodal parameter x00 must be > 0, got {self.x00}"
            raise DomainError(msg)


def nodal_position(nodal, E, ell, intensity):
    """
    Position of the imposed node in a channel

    :param nodal: `NodalLine`
    :param E: collision energy (ru)
    :param ell: partial wave
    :param intensity: reduced intensity

    :returns: float (ru)
    """
    position = (
        nodal.x00
        + nodal.gamma_E * E
        + nodal.gamma_L * ell * (ell + 1)
        + nodal.gamma_I * intensity
    )
    if not position > 0:
        msg = f"nodal position {position} for l={ell} is not positive"
        raise DomainError(msg)
    return position


@dataclass(frozen=True)
class GridControl:
    """Integration control: tolerances, step bound and segmentation"""

    rtol: float = 1e-11
    wavelength_fraction: float = 1.0 / 40.0
    segment_ratio: float = 2.0
    gauge_radius: float = 2.0
    mode: str = "faithful"

    def __post_init__(self):
        if self.mode not in MODES:
            msg = f"unknown solve mode {self.mode!r}, expected one of {MODES}"
            raise DomainError(msg)
        if not self.segment_ratio > 1:
            msg = f"segment ratio must be > 1, got {self.segment_ratio}"
            raise DomainError(msg)


@dataclass(frozen=True)
class SolveRequest:
    channels: ChannelSet
    intensity: float
    nodal: NodalLine
    bc: str = "BC2"
    x_max: float = 500.0
    grid: GridControl = GridControl()

    def __post_init__(self):
        if self.bc not in ("BC2", "BC23"):
            msg = f"threshold solve needs BC2 or BC23, got {self.bc!r}"
            raise DomainError(msg)
        if not self.intensity >= 0:
            msg = f"intensity must be >= 0, got {self.intensity}"
            raise DomainError(msg)
        if not self.x_max > max(self.nodal_positions):
            msg = f"x_max={self.x_max} must lie beyond the nodal positions"
            raise DomainError(msg)

    @property
    def nodal_positions(self):
        return np.array(
            [
                nodal_position(self.nodal, 0.0, ell, self.intensity)
                for ell in self.channels.ells
            ]
        )

    @property
    def p_wave_c3(self):
        return self.intensity * anisotropy_coupling(1, 1, self.channels.m)

    def channel_specs(self):
        """Reference pair of every channel; BC23 applies to the p-channel only"""
        specs = [RefPairSpec("BC2", ell) for ell in self.channels.ells]
        if self.bc == "BC23":
            c3f = abs(self.p_wave_c3)
            if c3f > 0:
                specs[0] = RefPairSpec("BC23", 1, c3f=c3f)
            else:
                LOGGER.warning("BC23 undefined without dipolar term, using BC2")
        return specs


@dataclass
class ThresholdSolution:
    mbar: np.ndarray
    m_at_xmax: float
    channel_values: Optional[np.ndarray]
    condition: float
    residual: float
    x_max: float
    method: str = "nodal"

    def as_dict(self):
        return {
            "x_max": self.x_max,
            "M": self.m_at_xmax,
            "mbar": [float(value) for value in self.mbar],
            "condition": self.condition,
            "residual": self.residual,
            "method": self.method,
        }


class _CoupledSystem:
    """Right-hand sides of u'' = W u and of its two-potential form"""

    def __init__(self, request):
        self.n = request.channels.n
        self.centrifugal = centrifugal_vector(request.channels)
        self.coupling = request.intensity * np.asarray(
            anisotropy_matrix(request.channels)
        )
        self.specs = request.channel_specs()
        self.wronskians = np.array([wronskian(spec) for spec in self.specs])
        self.reference_c3 = np.array(
            [spec.c3f if spec.bc == "BC23" else 0.0 for spec in self.specs]
        )
        self.fraction = request.grid.wavelength_fraction
        self.segment_ratio = request.grid.segment_ratio

    def apply_w(self, x, U):
        diagonal = self.centrifugal / x**2 - 1.0 / x**6
        return diagonal[:, None] * U - self.coupling @ U / x**3

    def apply_delta(self, x, U):
        diagonal = self.reference_c3 / x**3 - 1.0 / x**6
        return diagonal[:, None] * U - self.coupling @ U / x**3

    def pairs(self, x):
        values = np.array([eval_pair(spec, x) for spec in self.specs])
        return values.T

    def max_step(self, x):
        diagonal = self.centrifugal / x**2 - 1.0 / x**6 - np.diag(self.coupling) / x**3
        return self.fraction * 2.0 * math.pi / math.sqrt(np.max(np.abs(diagonal)))

    def linear_rhs(self, columns):
        n = self.n

        def rhs(x, y):
            Y = y.reshape(2 * n, columns)
            return np.vstack([Y[n:], self.apply_w(x, Y[:n])]).ravel()

        return rhs

    def gauge_rhs(self, columns):
        n = self.n

        def rhs(x, y):
            Y = y.reshape(2 * n, columns)
            phi, psi, _, _ = self.pairs(x)
            U = phi[:, None] * Y[:n] - psi[:, None] * Y[n:]
            S = self.apply_delta(x, U) / self.wronskians[:, None]
            return np.vstack([-psi[:, None] * S, -phi[:, None] * S]).ravel()

        return rhs

    def riccati_rhs(self):
        """R' = -(Phi - R Psi) W^-1 Delta (Phi - Psi R) for R = D C^-1"""
        n = self.n

        def rhs(x, r):
            R = r.reshape(n, n)
            phi, psi, _, _ = self.pairs(x)
            P = np.diag(phi) - psi[:, None] * R
            Q = np.diag(phi) - R * psi[None, :]
            S = self.apply_delta(x, P) / self.wronskians[:, None]
            return (-Q @ S).ravel()

        return rhs

    def natural_scale(self, x):
        """Size of R_ij at x: sqrt(phi_i phi_j / psi_i psi_j)"""
        phi, psi, _, _ = self.pairs(x)
        ratio = np.sqrt(np.abs(phi) / np.maximum(np.abs(psi), 1e-300))
        ratio = np.maximum(ratio, 1.0)
        return np.outer(ratio, ratio)

    def to_gauge(self, x, Y):
        phi, psi, dphi, dpsi = (value[:, None] for value in self.pairs(x))
        U, dU = Y[: self.n], Y[self.n :]
        W = self.wronskians[:, None]
        return np.vstack([(U * dpsi - dU * psi) / W, (U * dphi - dU * phi) / W])


def _boundaries(x_from, x_to, ratio, stops):
    """Segment ends from x_from to x_to: geometric steps plus the requested stops"""
    points = {float(x_to)}
    lower, upper = sorted((x_from, x_to))
    current = lower * ratio
    while current < upper:
        points.add(current)
        current *= ratio
    points.update(float(stop) for stop in stops if lower < stop < upper)
    points.discard(float(x_from))
    return sorted(points, reverse=bool(x_to < x_from))


def _row_scale(Y):
    """Largest entry of every row; rows that are still zero take the block maximum"""
    scale = np.max(np.abs(Y), axis=1)
    empty = scale == 0
    if np.any(empty):
        scale[empty] = max(float(np.max(scale)), 1e-300)
    return scale


def _orthonormalize(Y):
    """Orthonormal basis of the column span in row-scaled coordinates"""
    scale = _row_scale(Y)
    Q, _ = linalg.qr(Y / scale[:, None], mode="economic")
    return scale[:, None] * Q


def _propagate(system, kind, x_from, x_to, Y, stops, rtol, renormalize):
    """
    Propagate a block of solutions segment by segment

    :param renormalize: "qr" keeps the span with a row-scaled orthonormal basis,
                        "scale" rescales columns by powers of two and tracks the
                        exponents, None leaves the block untouched

    :returns: (final block, final exponents, {stop: (block, exponents)})
    """
    columns = Y.shape[1]
    rhs = system.linear_rhs(columns) if kind == "linear" else system.gauge_rhs(columns)
    exponents = np.zeros(columns, dtype=int)
    if renormalize == "scale":
        _, shift = np.frexp(np.max(np.abs(Y), axis=0))
        Y = np.ldexp(Y, -shift)
        exponents = exponents + shift

    recorded = {}
    wanted = {float(stop) for stop in stops}
    if float(x_from) in wanted:
        recorded[float(x_from)] = (Y.copy(), exponents.copy())

    x = float(x_from)
    for x_next in _boundaries(x_from, x_to, system.segment_ratio, stops):
        scale = _row_scale(Y)
        atol = np.repeat(1e-3 * rtol * scale, columns)
        max_step = system.max_step(min(x, x_next)) if kind == "linear" else np.inf
        sol = solve_ivp(
            rhs,
            (x, x_next),
            Y.ravel(),
            method="DOP853",
            rtol=rtol,
            atol=atol,
            max_step=max_step,
        )
        if sol.status != 0:
            msg = f"coupled integration failed near x={sol.t[-1]}: {sol.message}"
            raise IntegrationError(msg, location=float(sol.t[-1]))
        Y = sol.y[:, -1].reshape(Y.shape)
        x = x_next

        if x in wanted:
            recorded[x] = (Y.copy(), exponents.copy())

        if renormalize == "qr":
            Y = _orthonormalize(Y)
        elif renormalize == "scale":
            _, shift = np.frexp(np.max(np.abs(Y), axis=0))
            Y = np.ldexp(Y, -shift)
            exponents = exponents + shift

    return Y, exponents, recorded


def boundary_init(request, j):
    """
    Initial states of the pair (f^j_+, f^j_-) at x_max

    :param request: `SolveRequest`
    :param j: channel index, 1 <= j <= n

    :returns: tuple of arrays (plus, minus), each [values..., derivatives...]
    """
    n = request.channels.n
    if not 1 <= j <= n:
        msg = f"channel index must be in [1, {n}], got {j}"
        raise DomainError(msg)

    spec = request.channel_specs()[j - 1]
    pair = eval_pair(spec, request.x_max)
    plus = np.zeros(2 * n)
    minus = np.zeros(2 * n)
    plus[j - 1], plus[n + j - 1] = pair.phi, pair.dphi
    minus[j - 1], minus[n + j - 1] = pair.psi, pair.dpsi
    return plus, minus


def initial_states(request):
    """All 2n initial states as columns: f^1_+ ... f^n_+, f^1_- ... f^n_-"""
    n = request.channels.n
    pairs = [boundary_init(request, j) for j in range(1, n + 1)]
    plus = np.stack([pair[0] for pair in pairs], axis=1)
    minus = np.stack([pair[1] for pair in pairs], axis=1)
    return np.hstack([plus, minus])


def integrate_inward(request, states):
    """
    Propagate solutions from x_max to the nodal positions

    :param request: `SolveRequest`
    :param states: (2n, K) initial values and derivatives at x_max, one column per
                   solution

    :returns: (n, K) array, entry [i, s] = channel i of solution s at the nodal
              position of channel i
    """
    system = _CoupledSystem(request)
    n = request.channels.n
    states = np.asarray(states, dtype=float)
    if states.shape[0] != 2 * n:
        msg = f"states need {2 * n} rows, got {states.shape[0]}"
        raise DomainError(msg)

    positions = request.nodal_positions
    _, _, recorded = _propagate(
        system,
        "linear",
        request.x_max,
        float(np.min(positions)),
        states,
        positions,
        request.grid.rtol,
        "scale",
    )

    values = np.empty((n, states.shape[1]))
    for i, position in enumerate(positions):
        block, exponents = recorded[float(position)]
        values[i] = np.ldexp(block[i], exponents)
    return values


def _equilibrated_solve(matrix, rhs):
    """Solve with row and column equilibration; returns (solution, condition)"""
    columns = np.linalg.norm(matrix, axis=0)
    columns[columns == 0] = 1.0
    scaled = matrix / columns
    rows = np.max(np.abs(scaled), axis=1)
    rows[rows == 0] = 1.0
    scaled = scaled / rows[:, None]
    condition = float(np.linalg.cond(scaled))
    # broadcast over the columns of a matrix right-hand side
    shape = (-1,) + (1,) * (np.ndim(rhs) - 1)
    try:
        solution = linalg.solve(scaled, rhs / rows.reshape(shape))
    except (linalg.LinAlgError, ValueError) as err:
        msg = f"singular nodal system: {err}"
        raise PoleEvent(msg, condition=condition)
    return solution / columns.reshape(shape), condition


def solve_nodal_system(values):
    """
    Mixing coefficients making f^1_+ - sum Mbar_j f^j_- vanish at the nodes

    :param values: (n, 2n) output of `integrate_inward` for `initial_states`

    :returns: tuple (mbar, condition, residual)
    """
    n = values.shape[0]
    rhs = values[:, 0]
    minus = values[:, n:]
    mbar, condition = _equilibrated_solve(minus, rhs)

    terms = np.abs(minus * mbar[None, :])
    scale = np.maximum(np.abs(rhs), np.max(terms, axis=1))
    scale[scale == 0] = 1.0
    residual = float(np.max(np.abs(minus @ mbar - rhs) / scale))
    return mbar, condition, residual


def _regular_start(request, system):
    """Regular solutions (values, derivatives) at the outermost nodal position"""
    n = request.channels.n
    positions = request.nodal_positions
    lower, upper = float(np.min(positions)), float(np.max(positions))
    if upper == lower:
        return upper, np.vstack([np.zeros((n, n)), np.eye(n)]), 0.0

    fundamental = np.eye(2 * n)
    final, _, recorded = _propagate(
        system,
        "linear",
        lower,
        upper,
        fundamental,
        positions,
        request.grid.rtol,
        None,
    )
    constraints = np.array(
        [recorded[float(position)][0][i] for i, position in enumerate(positions)]
    )
    basis = linalg.null_space(constraints)
    if basis.shape[1] != n:
        msg = f"nodal constraints leave {basis.shape[1]} regular solutions, expected {n}"
        raise DomainError(msg)
    residual = float(np.max(np.abs(constraints @ basis)))
    return upper, final @ basis, residual


def _riccati_form(Y, n):
    """R = D C^-1 when C is well conditioned, else None"""
    C, D = Y[:n], Y[n:]
    try:
        solution, condition = _equilibrated_solve(C.T, D.T)
    except PoleEvent:
        return None
    if condition > CONDITION_RICCATI or not np.all(np.isfinite(solution)):
        return None
    return solution.T


def _pole_signs(Y, n):
    """Signs of det C and of the numerator det C * R_11 of a block [C; D]"""
    bordered = np.zeros((n + 1, n + 1))
    bordered[:n, :n] = Y[:n]
    bordered[0, n] = 1.0
    bordered[n, :n] = -Y[n]
    det_sign, _ = np.linalg.slogdet(Y[:n])
    numerator_sign, _ = np.linalg.slogdet(bordered)
    return det_sign, numerator_sign


def _crosses_pole(start, end, n):
    """
    Whether R_11 diverges an odd number of times between two blocks of one basis

    det C flips sign at every divergence of R; a flip shared by the numerator
    belongs to another channel and leaves R_11 finite.
    """
    det_start, numerator_start = _pole_signs(start, n)
    det_end, numerator_end = _pole_signs(end, n)
    return det_start != det_end and numerator_start == numerator_end


def _riccati_segment(system, x, x_next, R, rtol):
    """Propagate R over one segment; returns (R, None) or (None, failure point)"""
    scale = np.maximum(system.natural_scale(x), system.natural_scale(x_next)).ravel()

    def runaway(t, r):
        return RICCATI_LIMIT - np.max(np.abs(r) / scale)

    runaway.terminal = True

    sol = solve_ivp(
        system.riccati_rhs(),
        (x, x_next),
        R.ravel(),
        method="DOP853",
        rtol=rtol,
        atol=1e-3 * rtol * scale,
        events=runaway,
    )
    if sol.status != 0 or not np.all(np.isfinite(sol.y)):
        return None, float(sol.t[-1])
    return sol.y[:, -1].reshape(R.shape), None


def _p_column(Y, n):
    """(Mbar, condition) of the span element with unit p-wave growth"""
    unit = np.zeros(n)
    unit[0] = 1.0
    try:
        beta, condition = _equilibrated_solve(Y[:n], unit)
    except PoleEvent:
        return np.full(n, np.nan), math.inf
    if condition > CONDITION_POLE or not np.all(np.isfinite(beta)):
        return np.full(n, np.nan), condition
    return Y[n:] @ beta, condition


def _gauge_sweep(system, x_from, Y, grid, rtol):
    """
    Carry the regular span in gauge form from x_from through an ascending grid

    The span is held as R = D C^-1, whose entries keep their channel powers and
    stay accurate where the closed channels outgrow the p-channel. A segment in
    which R diverges is crossed with the orthonormalized block [C; D].

    :returns: tuple ({x_max: (Mbar, condition)}, pole locations at or beyond
              the first grid point)
    """
    n = system.n
    stops = {float(x) for x in grid}
    R = _riccati_form(Y, n)
    records = {}
    poles = []

    x = float(x_from)
    for x_next in _boundaries(x_from, grid[-1], system.segment_ratio, grid):
        failed_at = None
        if R is not None:
            R_next, failed_at = _riccati_segment(system, x, x_next, R, rtol)
            if R_next is None:
                LOGGER.debug("Riccati form diverges near x={}".format(failed_at))
                Y = np.vstack([np.eye(n), R])
            R = R_next

        if R is None:
            start = Y
            Y, _, _ = _propagate(system, "gauge", x, x_next, Y, (), rtol, None)
            if _crosses_pole(start, Y, n) and x >= grid[0]:
                inside = failed_at is not None and x <= failed_at <= x_next
                poles.append(failed_at if inside else math.sqrt(x * x_next))
            Y = _orthonormalize(Y)
            R = _riccati_form(Y, n)

        if x_next in stops:
            if R is not None:
                records[x_next] = (R[:, 0].copy(), 1.0)
            else:
                records[x_next] = _p_column(Y, n)
        x = x_next

    return records, poles


def regular_sweep(request, x_max_grid):
    """
    Threshold solutions at every x_max of a grid from one outward propagation

    :param request: `SolveRequest` (its x_max is ignored)
    :param x_max_grid: ascending x_max values beyond the gauge radius

    :returns: tuple (list of `ThresholdSolution`, x_max locations where M
              diverges); M is nan at grid points sitting on a divergence
    """
    grid = np.asarray(x_max_grid, dtype=float)
    gauge_radius = request.grid.gauge_radius
    positions = request.nodal_positions
    if np.any(np.diff(grid) <= 0):
        msg = "x_max grid must be strictly ascending"
        raise DomainError(msg)
    if grid[0] <= gauge_radius or gauge_radius <= np.max(positions):
        msg = (
            f"gauge radius {gauge_radius} must separate the nodal positions "
            f"{np.max(positions)} from the x_max grid starting at {grid[0]}"
        )
        raise DomainError(msg)

    system = _CoupledSystem(request)
    rtol = request.grid.rtol
    x_start, Y, start_residual = _regular_start(request, system)
    Y, _, _ = _propagate(system, "linear", x_start, gauge_radius, Y, (), rtol, "qr")
    gauge = _orthonormalize(system.to_gauge(gauge_radius, Y))
    records, poles = _gauge_sweep(system, gauge_radius, gauge, grid, rtol)

    solutions = []
    for x_max in grid:
        mbar, condition = records[float(x_max)]
        solutions.append(
            ThresholdSolution(
                mbar=mbar,
                m_at_xmax=float(mbar[0]),
                channel_values=None,
                condition=condition,
                residual=start_residual,
                x_max=float(x_max),
                method="regular",
            )
        )
    LOGGER.debug("Regular trace points: {}, poles: {}".format(len(solutions), poles))
    return solutions, poles


def regular_trace(request, x_max_grid):
    """
    Threshold solutions at every x_max of a grid

    :raises PoleEvent: when M diverges at one of the grid points

    :returns: list of `ThresholdSolution`
    """
    solutions, _ = regular_sweep(request, x_max_grid)
    for solution in solutions:
        if not math.isfinite(solution.m_at_xmax):
            msg = f"regular solutions lose the p-wave growth at x_max={solution.x_max}"
            raise PoleEvent(
                msg, location=solution.x_max, condition=solution.condition
            )
    return solutions


def threshold_solution(request):
    """
    Solve the coupled threshold problem for one x_max

    :param request: `SolveRequest`

    :returns: `ThresholdSolution`
    """
    if request.grid.mode == "fast":
        return regular_trace(request, [request.x_max])[0]

    states = initial_states(request)
    values = integrate_inward(request, states)
    mbar, condition, residual = solve_nodal_system(values)
    LOGGER.debug("Nodal condition: {}".format(condition))

    if condition > CONDITION_SUBDIVIDE and request.x_max > request.grid.gauge_radius:
        LOGGER.debug("Nodal system ill-conditioned, matching outward solutions")
        matched = regular_trace(request, [request.x_max])[0]
        if matched.condition < condition:
            matched.channel_values = values
            return matched

    if condition > CONDITION_POLE:
        msg = f"nodal system singular (condition {condition:.3e}) at x_max={request.x_max}"
        raise PoleEvent(msg, location=request.x_max, condition=condition)

    return ThresholdSolution(
        mbar=mbar,
        m_at_xmax=float(mbar[0]),
        channel_values=values,
        condition=condition,
        residual=residual,
        x_max=request.x_max,
        method="nodal",
    )


def with_x_max(request, x_max):
    return replace(request, x_max=float(x_max))
