import numpy as np
import pytest

from pwave_volume import levy_keller, potentials, scan, volfit
from pwave_volume.cli import repro
from pwave_volume.errors import DomainError, IllConditionedError
from pwave_volume.volfit import FitResult, VolumeResult


@pytest.mark.parametrize("intensity", repro.TABLE2_INTENSITIES)
def test_table2_oracle_agrees(intensity):
    columns, records = repro.table2(intensities=(intensity,))
    assert columns[-1] == "max_rel_dev"
    assert len(records) == 4
    for record in records:
        assert record["max_rel_dev"] < 1e-6, record


def _synthetic_volume(m, intensity, x00, n=1, bc="BC2", x_max_grid=None, grid=None):
    V = potentials.multipole_model("adiabatic", m, intensity)
    volume = 100.0 * (x00 - 0.147)
    c3f = None
    if bc == "BC23":
        c3f = abs(V.c3)
        volume += levy_keller.delta_m0(V.c3, V.c4, c3f)
    expansion = levy_keller.m_expansion(V, bc, c3f=c3f, M0=volume)
    fit = FitResult(coefficients=expansion.as_dict(), residual_rms=0.0, condition=1.0)
    return VolumeResult(volume=fit.volume, eta=fit.eta, fit=fit)


def test_table3_recovers_analytic_relations(monkeypatch):
    monkeypatch.setattr(volfit, "extract_volume", _synthetic_volume)
    columns, records = repro.table3(6.0)
    assert columns == ["quantity", "bc", "analytic", "fitted"]
    by_key = {(r["quantity"], r["bc"]): r for r in records}

    alpha = by_key[("alpha", "BC2")]
    assert alpha["fitted"] == pytest.approx(alpha["analytic"], rel=1e-9)
    assert alpha["analytic"] == pytest.approx(-1.06667, abs=1e-5)
    beta = by_key[("beta", "BC2")]
    assert beta["fitted"] == pytest.approx(beta["analytic"], rel=1e-9)
    assert by_key[("x^2", "BC2")]["fitted"] == pytest.approx(-0.266667, abs=1e-6)

    shift = by_key[("delta_M0", "BC23-BC2")]
    assert shift["fitted"] == pytest.approx(shift["analytic"], abs=1e-12)
    assert shift["analytic"] == pytest.approx(-0.33885, abs=1e-4)


def test_table3_pairs_shift_by_x00(monkeypatch):
    lo, hi = scan.QUASI_PERIOD
    x00_values = np.linspace(lo, hi, 26)[1:-1]
    failing = {"BC2": set(x00_values[:3]), "BC23": set(x00_values[-3:])}

    def flaky_volume(m, intensity, x00, n=1, bc="BC2", x_max_grid=None, grid=None):
        if x00 in failing[bc]:
            raise IllConditionedError("fit refused", condition=1e13)
        return _synthetic_volume(m, intensity, x00, n, bc, x_max_grid, grid)

    monkeypatch.setattr(volfit, "extract_volume", flaky_volume)
    _, records = repro.table3(6.0, x00_values=x00_values)
    shift = records[-1]
    assert shift["quantity"] == "delta_M0"
    assert shift["fitted"] == pytest.approx(shift["analytic"], abs=1e-12)


def test_table3_reports_too_few_points(monkeypatch):
    monkeypatch.setattr(volfit, "extract_volume", _synthetic_volume)
    with pytest.raises(DomainError, match="need 10"):
        repro.table3(6.0, x00_values=np.linspace(0.143, 0.151, 6))


def test_fig1_columns():
    columns, rows = repro.fig1([0.145, 0.147])
    assert columns == ["x00", "l=0", "l=1", "l=3"]
    assert rows[0]["l=1"] == pytest.approx(scan.field_free_exact(1, 0.145).value)


def test_fig2_one_column_per_channel_count(monkeypatch):
    def fake_scan(m, intensity, x00_grid, settings):
        curve = scan.ScanCurve(
            axis=[0.143, 0.145], values=[float(settings.n), -1.0], provenance={}
        )
        return curve, [scan.Resonance(position=0.144, bracket=(0.143, 0.145))]

    monkeypatch.setattr(scan, "scan_x00", fake_scan)
    columns, records, resonances = repro.fig2(0, 6.0, n_max=2)
    assert columns == ["x00", "M0_n1", "M0_n2"]
    assert records[0]["M0_n2"] == 2.0
    assert [r.label for r in resonances] == [1]
