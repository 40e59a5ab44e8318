import logging

import pytest

from pwave_volume.cli import config
from pwave_volume.cli.config import RunConfig, config_hash, load_config, parse_config_text
from pwave_volume.errors import ConfigError


def test_defaults_without_file(monkeypatch):
    monkeypatch.delenv(config.CONFIG_ENV, raising=False)
    loaded = load_config()
    assert loaded == RunConfig()
    assert loaded.mode == "fast"
    assert loaded.points == 150


def test_parse_comments_and_types():
    values = parse_config_text(
        "# scan setup\n"
        "points = 200\n"
        "\n"
        "intensity=6.5   # reduced\n"
        "seedless = true\n"
        "c3f =\n"
        "bc = BC23\n"
    )
    assert values == {
        "points": 200,
        "intensity": 6.5,
        "seedless": True,
        "c3f": None,
        "bc": "BC23",
    }


@pytest.mark.parametrize(
    "text, key",
    [
        ("colour = red", "colour"),
        ("points = many", "points"),
        ("points = 2.5", "points"),
        ("seedless = 1", "seedless"),
        ("x00 =", "x00"),
    ],
)
def test_parse_rejects(text, key):
    with pytest.raises(ConfigError) as info:
        parse_config_text(text)
    assert info.value.key == key


def test_parse_requires_assignment():
    with pytest.raises(ConfigError):
        parse_config_text("points 200")


@pytest.mark.parametrize(
    "kwargs, key",
    [
        ({"bc": "BC2k"}, "bc"),
        ({"n": 0}, "n"),
        ({"points": 1}, "points"),
        ({"x00_lo": 0.2, "x00_hi": 0.1}, "x00_lo"),
    ],
)
def test_run_config_validation(kwargs, key):
    with pytest.raises(ConfigError) as info:
        RunConfig(**kwargs)
    assert info.value.key == key


def test_flags_override_file(tmp_path, caplog):
    path = tmp_path / "run.conf"
    path.write_text("points = 200\nm = 1\n")
    with caplog.at_level(logging.WARNING):
        loaded = load_config(str(path), {"points": 40, "n": None})
    assert loaded.points == 40
    assert loaded.m == 1
    assert loaded.n == 1
    assert "overrides config value points" in caplog.text


def test_config_path_from_environment(tmp_path, monkeypatch):
    path = tmp_path / "env.conf"
    path.write_text("x00 = 0.147\n")
    monkeypatch.setenv(config.CONFIG_ENV, str(path))
    assert load_config().x00 == 0.147


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "absent.conf"))


def test_unknown_override():
    with pytest.raises(ConfigError):
        load_config(None, {"colour": "red"})


def test_hash_ignores_plumbing():
    base = RunConfig()
    assert config_hash(base) == config_hash(RunConfig(cache_dir="/tmp/x", seedless=True))
    assert config_hash(base) != config_hash(RunConfig(points=151))
    assert len(config_hash(base)) == 64


def test_config_keys_cover_fields():
    keys = config.config_keys()
    assert "x00" in keys and "cache_dir" in keys
    assert len(keys) == len(set(keys))
