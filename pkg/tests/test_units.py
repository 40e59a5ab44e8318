import math

import pytest
from scipy import constants

from pwave_volume import units
from pwave_volume.errors import DomainError


def test_unit_system_natural_units():
    u = units.make_unit_system(mu=0.5, C6=1.0, alpha1=1.0, alpha2=1.0, hbar=1.0, c=1.0)
    assert u.sigma == pytest.approx(1.0)
    assert u.epsilon == pytest.approx(1.0)
    assert u.beta_intensity == pytest.approx(1.0 / (12.0 * math.pi))


def test_unit_system_from_atomic_length():
    u = units.unit_system_from_atomic(43.45, 4700.0, 300.0, 300.0)
    mass_ratio = units.AMU / constants.m_e
    expected = (2.0 * 43.45 * mass_ratio * 4700.0) ** 0.25
    assert u.sigma / units.BOHR == pytest.approx(expected, rel=1e-8)


def test_intensity_and_dipole_strength_agree():
    u = units.unit_system_from_atomic(43.45, 4700.0, 300.0, 300.0)
    intensity = 2.5e9
    via_dipole = units.dipole_strength_to_ru(units.dipole_strength(intensity, u), u)
    assert via_dipole == pytest.approx(units.intensity_to_ru(intensity, u), rel=1e-12)


def test_conversions_invert():
    u = units.make_unit_system(1e-26, 1e-76, 1e-29, 2e-29)
    assert units.length_from_ru(units.length_to_ru(3e-9, u), u) == pytest.approx(3e-9)
    assert units.energy_from_ru(units.energy_to_ru(1e-30, u), u) == pytest.approx(1e-30)
    assert units.intensity_from_ru(6.0, u) == pytest.approx(6.0 * u.beta_intensity)


@pytest.mark.parametrize("bad", [0.0, -1.0, math.inf])
def test_unit_system_rejects_bad_inputs(bad):
    with pytest.raises(DomainError):
        units.make_unit_system(bad, 1.0, 1.0, 1.0)


def test_negative_intensity_rejected():
    u = units.make_unit_system(0.5, 1.0, 1.0, 1.0, hbar=1.0, c=1.0)
    with pytest.raises(DomainError):
        units.dipole_strength(-1.0, u)
