import pytest

from pwave_volume.cli.config import CACHE_ENV, CONFIG_ENV
from pwave_volume.potentials import multipole_model


@pytest.fixture
def adiabatic_m0():
    """Adiabatic p-wave potential at I=6, m=0"""
    return multipole_model("adiabatic", 0, 6.0)


@pytest.fixture
def cache_env(tmp_path, monkeypatch):
    directory = tmp_path / "cache"
    monkeypatch.setenv(CACHE_ENV, str(directory))
    monkeypatch.delenv(CONFIG_ENV, raising=False)
    return directory
