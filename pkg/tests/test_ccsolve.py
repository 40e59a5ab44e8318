import logging

import numpy as np
import pytest

from pwave_volume import ccsolve
from pwave_volume.ccsolve import GridControl, NodalLine, SolveRequest
from pwave_volume.errors import DomainError
from pwave_volume.potentials import ChannelSet
from pwave_volume.scan import vdw_pair


def _request(
    n=1, intensity=6.0, x00=0.147, x_max=20.0, mode="faithful", rtol=1e-11, **kwargs
):
    return SolveRequest(
        channels=ChannelSet(m=kwargs.pop("m", 0), n=n),
        intensity=intensity,
        nodal=kwargs.pop("nodal", NodalLine(x00)),
        x_max=x_max,
        grid=GridControl(mode=mode, rtol=rtol),
        **kwargs,
    )


def test_nodal_position_is_linear():
    nodal = NodalLine(0.15, gamma_E=0.1, gamma_L=0.01, gamma_I=0.002)
    assert ccsolve.nodal_position(nodal, 0.0, 3, 6.0) == pytest.approx(
        0.15 + 0.12 + 0.012
    )
    assert ccsolve.nodal_position(nodal, 1.0, 0, 0.0) == pytest.approx(0.25)
    with pytest.raises(DomainError):
        ccsolve.nodal_position(NodalLine(0.1, gamma_E=1.0), -1.0, 1, 0.0)


def test_request_positions_per_channel():
    request = _request(n=2, nodal=NodalLine(0.147, gamma_L=0.001))
    assert request.nodal_positions == pytest.approx([0.149, 0.159])
    assert request.p_wave_c3 == pytest.approx(1.6)


@pytest.mark.parametrize(
    "kwargs",
    [{"bc": "BC2k"}, {"intensity": -1.0}, {"x_max": 0.1}],
)
def test_request_validation(kwargs):
    with pytest.raises(DomainError):
        _request(**kwargs)


def test_grid_control_validation():
    with pytest.raises(DomainError):
        GridControl(mode="slow")
    with pytest.raises(DomainError):
        GridControl(segment_ratio=1.0)


def test_channel_specs_for_bc23(caplog):
    specs = _request(n=2, bc="BC23").channel_specs()
    assert (specs[0].bc, specs[0].c3f) == ("BC23", pytest.approx(1.6))
    assert specs[1].bc == "BC2"

    with caplog.at_level(logging.WARNING):
        fallback = _request(intensity=0.0, bc="BC23").channel_specs()
    assert fallback[0].bc == "BC2"
    assert "BC23 undefined" in caplog.text


def test_boundary_init_layout():
    request = _request(n=2, x_max=10.0)
    plus, minus = ccsolve.boundary_init(request, 2)
    assert plus.tolist() == [0.0, 1e4, 0.0, 4e3]
    assert minus.tolist() == pytest.approx([0.0, 1e-3, 0.0, -3e-4])
    with pytest.raises(DomainError):
        ccsolve.boundary_init(request, 3)
    assert ccsolve.initial_states(request).shape == (4, 4)


def _field_free_m(x00, x_max):
    phi0, psi0, _, _ = vdw_pair(1, x00)
    phi, psi, dphi, dpsi = vdw_pair(1, x_max)
    u = psi0 * phi - phi0 * psi
    du = psi0 * dphi - phi0 * dpsi
    return (u * 2.0 * x_max - du * x_max**2) / (u * -1.0 / x_max**2 - du / x_max)


@pytest.mark.parametrize("mode", ["faithful", "fast"])
def test_field_free_single_channel(mode):
    solution = ccsolve.threshold_solution(_request(intensity=0.0, mode=mode))
    assert solution.m_at_xmax == pytest.approx(_field_free_m(0.147, 20.0), rel=1e-7)
    assert solution.method == ("regular" if mode == "fast" else "nodal")


def test_states_normalization_does_not_matter():
    request = _request(n=2)
    states = ccsolve.initial_states(request)
    mbar, _, residual = ccsolve.solve_nodal_system(
        ccsolve.integrate_inward(request, states)
    )
    scaled, _, _ = ccsolve.solve_nodal_system(
        ccsolve.integrate_inward(request, 3.0 * states)
    )
    assert scaled == pytest.approx(mbar, rel=1e-8)
    assert residual < 1e-8


def test_integrate_inward_checks_shape():
    with pytest.raises(DomainError):
        ccsolve.integrate_inward(_request(n=2), np.eye(3))


def test_regular_trace_validation():
    request = _request(mode="fast")
    with pytest.raises(DomainError):
        ccsolve.regular_trace(request, [30.0, 20.0])
    with pytest.raises(DomainError):
        ccsolve.regular_trace(request, [1.5, 20.0])


def test_trace_agrees_with_single_solves():
    request = _request(mode="fast", x_max=50.0)
    trace = ccsolve.regular_trace(request, [20.0, 50.0, 100.0])
    single = ccsolve.threshold_solution(request)
    assert trace[1].m_at_xmax == pytest.approx(single.m_at_xmax, rel=1e-7)
    assert [s.x_max for s in trace] == [20.0, 50.0, 100.0]


def test_fast_solve_is_deterministic():
    request = _request(n=2, mode="fast", x_max=40.0)
    first = ccsolve.threshold_solution(request)
    second = ccsolve.threshold_solution(request)
    assert first.m_at_xmax == second.m_at_xmax


def test_dipolar_growth_at_large_distance():
    solution = ccsolve.threshold_solution(_request(mode="fast", x_max=500.0))
    assert solution.m_at_xmax / 500.0**2 == pytest.approx(-1.6 / 6.0, rel=1e-2)


def test_with_x_max_replaces_only_distance():
    request = _request()
    moved = ccsolve.with_x_max(request, 80)
    assert moved.x_max == 80.0
    assert moved.nodal == request.nodal


@pytest.mark.slow
@pytest.mark.parametrize("nodal", [NodalLine(0.147), NodalLine(0.147, gamma_L=0.0005)])
def test_fast_and_faithful_agree(nodal):
    faithful = ccsolve.threshold_solution(_request(n=2, x_max=50.0, nodal=nodal))
    fast = ccsolve.threshold_solution(
        _request(n=2, x_max=50.0, nodal=nodal, mode="fast")
    )
    assert fast.m_at_xmax == pytest.approx(faithful.m_at_xmax, rel=1e-6)


def test_pole_parity_of_gauge_blocks():
    start = np.vstack([np.eye(2), np.diag([2.0, 3.0])])
    signs = ccsolve._pole_signs(start, 2)
    assert signs == (1.0, 1.0)

    through_pole = np.vstack([np.diag([-1.0, 1.0]), np.diag([2.0, 3.0])])
    assert ccsolve._crosses_pole(start, through_pole, 2)

    closed_channel_node = np.vstack([np.diag([1.0, -1.0]), np.diag([2.0, 3.0])])
    assert not ccsolve._crosses_pole(start, closed_channel_node, 2)


def test_riccati_form_of_regular_block():
    block = np.vstack([np.diag([2.0, 4.0]), np.array([[1.0, 2.0], [3.0, 4.0]])])
    R = ccsolve._riccati_form(block, 2)
    assert R == pytest.approx(np.array([[0.5, 0.5], [1.5, 1.0]]))
    singular = np.vstack([np.diag([1.0, 0.0]), np.eye(2)])
    assert ccsolve._riccati_form(singular, 2) is None


def test_boundaries_run_in_both_directions():
    inward = ccsolve._boundaries(20.0, 1.0, 2.0, [7.5])
    outward = ccsolve._boundaries(1.0, 20.0, 2.0, [7.5])
    assert 7.5 in inward and 20.0 not in inward
    assert inward[-1] == 1.0 and outward[-1] == 20.0
    assert inward == sorted(inward, reverse=True)
    assert outward == sorted(outward)


@pytest.mark.slow
@pytest.mark.parametrize("n", [3, 4])
def test_multichannel_trace_is_stable_under_tolerance(n):
    x_values = np.geomspace(20.0, 500.0, 12)
    coarse = ccsolve.regular_trace(
        _request(n=n, x00=0.1475, mode="fast", x_max=500.0, rtol=1e-10), x_values
    )
    fine = ccsolve.regular_trace(
        _request(n=n, x00=0.1475, mode="fast", x_max=500.0, rtol=1e-12), x_values
    )
    for a, b in zip(coarse, fine):
        assert np.isfinite(a.m_at_xmax)
        assert a.m_at_xmax == pytest.approx(b.m_at_xmax, rel=1e-8)


@pytest.mark.slow
@pytest.mark.parametrize("n", [3, 4])
def test_fast_and_faithful_agree_with_many_channels(n):
    faithful = ccsolve.threshold_solution(_request(n=n, x00=0.1475, x_max=50.0))
    fast = ccsolve.threshold_solution(
        _request(n=n, x00=0.1475, x_max=50.0, mode="fast")
    )
    assert fast.m_at_xmax == pytest.approx(faithful.m_at_xmax, rel=1e-6)


@pytest.mark.slow
def test_weak_field_channel_coupling_is_negligible():
    single = ccsolve.threshold_solution(
        _request(n=1, intensity=1e-3, x_max=50.0, mode="fast")
    )
    coupled = ccsolve.threshold_solution(
        _request(n=3, intensity=1e-3, x_max=50.0, mode="fast")
    )
    assert coupled.m_at_xmax == pytest.approx(single.m_at_xmax, rel=1e-3)
