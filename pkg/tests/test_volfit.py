import logging

import numpy as np
import pytest

from pwave_volume import volfit
from pwave_volume.errors import DomainError, IllConditionedError, PoleEvent, RankError
from pwave_volume.levy_keller import linear_relation_analytic, m_expansion
from pwave_volume.scan import field_free_exact, field_free_poles
from pwave_volume.volfit import MTrace, fit_expansion


def _synthetic_trace(V, M0, noise=0.0, seed=3):
    x = volfit.default_x_max_grid()
    expansion = m_expansion(V, "BC2", M0=M0)
    M = expansion.evaluate(x) + 0.3 * np.log(x) / x**2 - 0.2 / x**2
    if noise:
        M = M * (1.0 + noise * np.random.default_rng(seed).standard_normal(x.size))
    trace = MTrace(x_max=x, M=M, m=0, intensity=6.0, x00=0.147, n=3, bc="BC2")
    return trace, expansion


def test_default_grid():
    grid = volfit.default_x_max_grid()
    assert grid.size == 50
    assert grid[0] == pytest.approx(20.0)
    assert grid[-1] == pytest.approx(500.0)
    with pytest.raises(DomainError):
        volfit.default_x_max_grid(500.0, 20.0)


def test_basis_choice():
    assert volfit.basis_for("BC2", 0) == volfit.FULL_BASIS
    assert volfit.basis_for("BC23", 1) == volfit.FULL_BASIS
    assert volfit.basis_for("BC23", 0) == volfit.BC23_M0_BASIS


def test_trace_validation():
    with pytest.raises(DomainError):
        MTrace(x_max=[1.0, 2.0], M=[0.0], m=0, intensity=0.0, x00=0.1, n=1, bc="BC2")
    with pytest.raises(DomainError):
        MTrace(x_max=[2.0, 1.0], M=[0.0, 0.0], m=0, intensity=0.0, x00=0.1, n=1, bc="BC2")


def test_fit_recovers_synthetic_coefficients(adiabatic_m0):
    trace, expansion = _synthetic_trace(adiabatic_m0, M0=0.8)
    fit = fit_expansion(trace)
    assert fit.accepted
    assert fit.coefficients["x^2"] == pytest.approx(expansion.coefficient("x^2"), rel=1e-6)
    for tag in ("x", "ln(x)", "1"):
        assert fit.coefficients[tag] == pytest.approx(expansion.coefficient(tag), abs=1e-3)
    assert fit.volume == pytest.approx(0.8, abs=1e-3)
    assert fit.eta == pytest.approx(expansion.coefficient("1/x"), abs=0.1)
    assert fit.as_dict()["volume"] == fit.volume


def test_fit_flags_large_residual(adiabatic_m0, caplog):
    trace, _ = _synthetic_trace(adiabatic_m0, M0=0.8, noise=1e-2)
    with caplog.at_level(logging.WARNING):
        fit = fit_expansion(trace)
    assert not fit.accepted
    assert "above threshold" in caplog.text


def test_fit_refusals(adiabatic_m0):
    trace, _ = _synthetic_trace(adiabatic_m0, M0=0.8)
    with pytest.raises(IllConditionedError):
        fit_expansion(trace, condition_limit=10.0)
    with pytest.raises(DomainError):
        fit_expansion(trace, tags=("x^2", "x^7"))

    short = MTrace(
        x_max=trace.x_max[:10], M=trace.M[:10], m=0, intensity=6.0, x00=0.147, n=1, bc="BC2"
    )
    with pytest.raises(DomainError):
        fit_expansion(short)

    trace.resonant = True
    trace.poles.append(120.0)
    with pytest.raises(PoleEvent):
        fit_expansion(trace)


def test_reference_model():
    assert volfit.reference_model(0, 6.0, 1).model == "diabatic"
    assert volfit.reference_model(0, 6.0, 3).model == "adiabatic"


def test_linear_relation_recovers_line(adiabatic_m0):
    alpha, beta = linear_relation_analytic(adiabatic_m0)
    volumes = np.linspace(-3.0, 4.0, 12)
    relation = volfit.linear_relation(volumes, alpha * volumes + beta)
    assert relation.alpha == pytest.approx(alpha, rel=1e-10)
    assert relation.beta == pytest.approx(beta, rel=1e-10)
    assert relation.r_squared == pytest.approx(1.0)


def test_linear_relation_refusals():
    with pytest.raises(DomainError):
        volfit.linear_relation([1.0, 2.0], [1.0, 2.0])
    with pytest.raises(DomainError):
        volfit.linear_relation(np.arange(12.0), np.arange(11.0))
    with pytest.raises(RankError):
        volfit.linear_relation(np.full(12, 0.5), np.arange(12.0))


@pytest.mark.slow
@pytest.mark.parametrize("x00", [0.143, 0.145, 0.147, 0.153, 0.155])
def test_weak_field_volume_tends_to_field_free(x00):
    result = volfit.extract_volume(0, 1e-3, x00)
    assert not result.pole
    assert result.volume == pytest.approx(field_free_exact(1, x00).a_power, rel=1e-2)


@pytest.mark.slow
def test_weak_field_shift_is_linear_next_to_field_free_pole():
    # 0.140 sits next to a field-free p-wave pole, where the dipolar shift is largest
    (pole,) = field_free_poles(1, 0.135, 0.1421)
    assert pole == pytest.approx(0.140, abs=1e-3)

    field_free = field_free_exact(1, 0.140).a_power
    shifts = {}
    for intensity in (1e-4, 1e-3):
        result = volfit.extract_volume(0, intensity, 0.140)
        assert not result.pole
        shifts[intensity] = result.volume - field_free
    assert shifts[1e-4] == pytest.approx(0.0, abs=1e-2 * abs(field_free))
    assert shifts[1e-3] / shifts[1e-4] == pytest.approx(10.0, rel=0.2)


@pytest.mark.slow
def test_three_channel_trace_matches_adiabatic_tail(adiabatic_m0):
    expansion = m_expansion(adiabatic_m0, "BC2")
    trace = volfit.m_trace(0, 6.0, 0.1475, n=3)
    fit = fit_expansion(trace)
    assert fit.accepted
    assert fit.coefficients["x^2"] == pytest.approx(expansion.coefficient("x^2"), rel=1e-2)
    assert fit.coefficients["x"] == pytest.approx(expansion.coefficient("x"), rel=0.1)
    assert fit.coefficients["ln(x)"] == pytest.approx(expansion.coefficient("ln(x)"), rel=0.1)


@pytest.mark.slow
def test_bc23_reports_bc2_equivalent():
    bc2 = volfit.extract_volume(0, 6.0, 0.147)
    bc23 = volfit.extract_volume(0, 6.0, 0.147, bc="BC23", bc2_equivalent=True)
    assert bc23.bc2_equivalent == pytest.approx(bc2.volume, rel=1e-2, abs=1e-2)


def _resonant_trace(M, poles):
    x = np.array([20.0, 40.0, 80.0, 160.0, 320.0])
    trace = MTrace(x_max=x, M=M, m=0, intensity=6.0, x00=0.147, n=3, bc="BC2")
    trace.resonant = True
    trace.poles.extend(poles)
    return trace


@pytest.mark.parametrize(
    "M, poles, sign",
    [
        ([5.0, 40.0, np.nan, -30.0, -8.0], [100.0], -1.0),
        ([-5.0, -40.0, np.nan, 30.0, 8.0], [100.0], 1.0),
        ([5.0, 40.0, 900.0, np.nan, np.nan], [300.0], -1.0),
        ([np.nan] * 5, [100.0], 1.0),
    ],
)
def test_pole_side_follows_crossing(M, poles, sign):
    assert volfit.pole_side(_resonant_trace(M, poles)) == sign


def test_resonant_volume_takes_crossing_side(monkeypatch):
    trace = _resonant_trace([-5.0, -40.0, np.nan, 30.0, 8.0], [100.0])
    monkeypatch.setattr(volfit, "m_trace", lambda *args: trace)
    result = volfit.extract_volume(0, 6.0, 0.147, n=3)
    assert result.pole
    assert result.volume == np.inf
    assert result.location == 100.0


def _volumes(x00_values, n=3, bc="BC2"):
    return [volfit.extract_volume(0, 6.0, float(x00), n=n, bc=bc) for x00 in x00_values]


@pytest.mark.slow
def test_leading_coefficients_do_not_depend_on_x00(adiabatic_m0):
    expansion = m_expansion(adiabatic_m0, "BC2")
    results = _volumes([0.1445, 0.1465, 0.1475, 0.1485, 0.1512])
    assert not any(result.pole for result in results)
    for tag, rel in (("x^2", 1e-2), ("x", 0.1), ("ln(x)", 0.1)):
        values = np.array([result.fit.coefficients[tag] for result in results])
        assert np.mean(values) == pytest.approx(expansion.coefficient(tag), rel=rel)
        assert np.std(values) <= 1e-2 * abs(np.mean(values))


@pytest.mark.slow
def test_volume_shift_between_pairs_is_constant():
    x00_values = np.linspace(0.1460, 0.1490, 10)
    bc2 = _volumes(x00_values)
    bc23 = _volumes(x00_values, bc="BC23")
    shifts = np.array([b.volume - a.volume for a, b in zip(bc2, bc23)])
    assert np.all(np.isfinite(shifts))
    assert np.mean(shifts) == pytest.approx(-0.339, rel=0.1)
    assert np.std(shifts) <= 0.02 * abs(np.mean(shifts))


@pytest.mark.slow
def test_fitted_eta_follows_volume_linearly():
    results = _volumes(np.linspace(0.1458, 0.1492, 12))
    relation = volfit.linear_relation(
        [result.volume for result in results], [result.eta for result in results]
    )
    assert relation.r_squared >= 0.999
    assert relation.alpha == pytest.approx(-1.0667, rel=0.05)


@pytest.mark.slow
def test_volume_settles_with_four_channels():
    three = volfit.extract_volume(0, 6.0, 0.1475, n=3)
    four = volfit.extract_volume(0, 6.0, 0.1475, n=4)
    assert four.volume == pytest.approx(three.volume, rel=1e-2)
