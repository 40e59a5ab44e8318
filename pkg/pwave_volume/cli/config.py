"""Run configuration: flat key=value files merged with command-line flags"""

import hashlib
import json
import logging
import os
from dataclasses import asdict, dataclass, fields, replace
from typing import Optional, Union, get_args, get_origin, get_type_hints

import yaml

from pwave_volume.errors import ConfigError

LOGGER = logging.getLogger(__name__)

CONFIG_ENV = "PWAVE_VOLUME_CONFIG"
CACHE_ENV = "PWAVE_VOLUME_CACHE"

# keys that do not change computed results
_UNHASHED = ("cache_dir", "seedless", "log_level")


@dataclass(frozen=True)
class RunConfig:
    # physical request
    m: int = 0
    intensity: float = 6.0
    x00: float = 0.1495
    n: int = 1
    bc: str = "BC2"
    model: str = "adiabatic"
    c3f: Optional[float] = None
    gamma_E: float = 0.0
    gamma_L: float = 0.0
    gamma_I: float = 0.0
    # threshold solve and fit
    x_max: float = 500.0
    xmax_lo: float = 20.0
    xmax_hi: float = 500.0
    xmax_points: int = 50
    mode: str = "fast"
    rtol: float = 1e-11
    residual_threshold: float = 1e-5
    # scans
    x00_lo: float = 0.142152
    x00_hi: float = 0.152135
    points: int = 150
    intensity_lo: float = 0.0
    intensity_hi: float = 10.0
    n_max: int = 4
    workers: int = 1
    # units
    mu_amu: Optional[float] = None
    c6_au: Optional[float] = None
    alpha1_au: Optional[float] = None
    alpha2_au: Optional[float] = None
    intensity_si: Optional[float] = None
    # output and plumbing
    format: str = "csv"
    cache_dir: Optional[str] = None
    seedless: bool = False
    log_level: str = "WARNING"

    def __post_init__(self):
        choices = {
            "bc": ("BC2", "BC23"),
            "model": ("diabatic", "adiabatic", "nonadiabatic"),
            "mode": ("fast", "faithful"),
            "format": ("csv", "json"),
            "log_level": ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"),
        }
        for key, allowed in choices.items():
            if getattr(self, key) not in allowed:
                msg = f"{key} must be one of {allowed}, got {getattr(self, key)!r}"
                raise ConfigError(msg, key=key)

        for key in ("n", "n_max", "workers"):
            if getattr(self, key) < 1:
                msg = f"{key} must be >= 1, got {getattr(self, key)}"
                raise ConfigError(msg, key=key)
        for key in ("xmax_points", "points"):
            if getattr(self, key) < 2:
                msg = f"{key} must be >= 2, got {getattr(self, key)}"
                raise ConfigError(msg, key=key)
        for lo, hi in (
            ("xmax_lo", "xmax_hi"),
            ("x00_lo", "x00_hi"),
            ("intensity_lo", "intensity_hi"),
        ):
            if not getattr(self, lo) < getattr(self, hi):
                msg = f"{lo} must be below {hi}"
                raise ConfigError(msg, key=lo)


def _field_types():
    return get_type_hints(RunConfig)


def _coerce(key, raw, kind):
    """Convert a raw text value to the declared field type"""
    optional = False
    if get_origin(kind) is Union:
        optional = type(None) in get_args(kind)
        kind = next(arg for arg in get_args(kind) if arg is not type(None))

    text = raw.strip() if isinstance(raw, str) else raw
    if isinstance(text, str):
        scalar = yaml.safe_load(text) if text else None
    else:
        scalar = text

    if scalar is None:
        if optional:
            return None
        msg = f"{key} needs a value of type {kind.__name__}"
        raise ConfigError(msg, key=key)

    try:
        if kind is bool:
            if not isinstance(scalar, bool):
                raise TypeError(scalar)
            return scalar
        if kind is int:
            if isinstance(scalar, bool) or int(scalar) != scalar:
                raise TypeError(scalar)
            return int(scalar)
        if kind is float:
            if isinstance(scalar, bool):
                raise TypeError(scalar)
            return float(scalar)
        return str(text) if isinstance(text, str) else str(scalar)
    except (TypeError, ValueError):
        msg = f"{key} expects {kind.__name__}, got {raw!r}"
        raise ConfigError(msg, key=key)


def parse_config_text(text):
    """
    Parse flat key=value lines

    :param text: file contents; `#` starts a comment, blank lines are ignored

    :returns: dict of coerced values
    """
    types = _field_types()
    values = {}
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            msg = f"line {number}: expected key=value, got {line!r}"
            raise ConfigError(msg)
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in types:
            msg = f"unknown configuration key {key!r}"
            raise ConfigError(msg, key=key)
        values[key] = _coerce(key, raw, types[key])
    return values


def load_config(path=None, overrides=None):
    """
    Resolve the run configuration: defaults < config file < flags

    :param path: config file; defaults to $PWAVE_VOLUME_CONFIG when set
    :param overrides: flag values, None entries are ignored

    :returns: `RunConfig`
    """
    path = path or os.environ.get(CONFIG_ENV)
    values = {}
    if path:
        LOGGER.debug("Config file: {}".format(path))
        try:
            with open(path, encoding="utf8") as fh:
                values = parse_config_text(fh.read())
        except OSError as err:
            msg = f"cannot read config file {path}: {err}"
            raise ConfigError(msg)

    types = _field_types()
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in types:
            msg = f"unknown configuration key {key!r}"
            raise ConfigError(msg, key=key)
        if key in values and values[key] != value:
            LOGGER.warning(
                "Flag overrides config value {}={!r} with {!r}".format(
                    key, values[key], value
                )
            )
        values[key] = value

    return replace(RunConfig(), **values)


def config_hash(config):
    """SHA-256 of the canonical JSON of the result-relevant configuration"""
    payload = {
        key: value for key, value in asdict(config).items() if key not in _UNHASHED
    }
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf8")).hexdigest()


def config_keys():
    return [item.name for item in fields(RunConfig)]
