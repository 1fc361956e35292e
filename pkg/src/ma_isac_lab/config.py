"""Flat key=value experiment configuration in engineering units.

Config files carry one `key = value` pair per line with `#` comments, powers
in dBm, the radar cross section in dBsm, angles in degrees, and lengths in
meters or wavelengths as the key name states. Parsing is strict: unknown keys
and malformed values fail up front with the offending field named, never
midway through a sweep.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

from .errors import ConfigError
from .geometry import SceneConstants

__all__ = [
    "ExperimentConfig",
    "dbm_to_watts",
    "dbsm_to_m2",
    "parse_config",
    "load_config",
    "convert_units",
]


def dbm_to_watts(value: float) -> float:
    return 10.0 ** ((value - 30.0) / 10.0)


def dbsm_to_m2(value: float) -> float:
    return 10.0 ** (value / 10.0)


@dataclass(frozen=True)
class ExperimentConfig:
    """Scene values, algorithm knobs, and sweep grids for the experiment runs."""

    wavelength_m: float = 0.05
    sensing_power_dbm: float = 30.0
    comm_power_dbm: float = 20.0
    noise_sensing_dbm: float = -90.0
    noise_comm_dbm: float = -90.0
    noise_eve_dbm: float = -90.0
    snapshots: int = 16
    rcs_dbsm: float = 10.0
    dist_bc_m: float = 70.0
    dist_be_m: float = 70.0
    legit_theta_deg: float = 120.0
    legit_phi_deg: float = 90.0
    eve_theta_deg: float = 120.0
    eve_phi_deg: float = 120.0
    region_side_wavelengths: float = 5.0
    min_spacing_wavelengths: float = 0.5
    num_transmit: int = 16
    num_receive: int = 16

    delta_sensing: float = 1e-4
    delta_sensing_inner: float = 1e-5
    delta_beam: float = 1e-6
    delta_block: float = 1e-4
    delta_comm: float = 1e-4
    restarts: int = 5
    estimate_trials: int = 20
    line_points: int = 100
    hull_grid: int = 5
    eval_grid: int = 21
    mle_grid_step: float = 0.005
    region_scale: float = 3.0
    mse_trials: int = 200
    sweep_trials: int = 10
    an_draws: int = 100
    an_split: float = 0.5
    robust_halfwidth_deg: float = 2.0
    max_outer_sensing: int = 100
    max_outer_comm: int = 80

    sensing_power_sweep_dbm: tuple = (10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0)
    comm_power_sweep_dbm: tuple = (10.0, 15.0, 20.0, 25.0, 30.0)
    estimate_theta_sweep_deg: tuple = (118.0, 119.0, 120.0, 121.0, 122.0)
    azimuth_width_sweep_deg: tuple = (10.0, 20.0, 30.0, 40.0)
    ma_count_sweep: tuple = (4, 9, 16)
    region_size_sweep_wavelengths: tuple = (2.0, 3.0, 4.0, 5.0)

    seed: int = 0
    threads: int = 1

    @property
    def region_side(self) -> float:
        return self.region_side_wavelengths * self.wavelength_m

    @property
    def min_spacing(self) -> float:
        return self.min_spacing_wavelengths * self.wavelength_m


_INT_FIELDS = frozenset(
    name for field in fields(ExperimentConfig) if field.type == "int"
    for name in [field.name]
)
_TUPLE_FIELDS = frozenset(
    name for field in fields(ExperimentConfig) if field.type == "tuple"
    for name in [field.name]
)
_ALL_FIELDS = frozenset(field.name for field in fields(ExperimentConfig))


def _parse_value(key: str, raw: str):
    try:
        if key in _TUPLE_FIELDS:
            parts = [p.strip() for p in raw.split(",") if p.strip()]
            if not parts:
                raise ValueError("empty list")
            if key == "ma_count_sweep":
                return tuple(int(p) for p in parts)
            return tuple(float(p) for p in parts)
        if key in _INT_FIELDS:
            return int(raw)
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"config field {key!r}: cannot parse {raw!r} ({exc})") from exc


def parse_config(text: str) -> ExperimentConfig:
    """Config from flat key=value text; `#` starts a comment anywhere on a line."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"config line {lineno}: expected key = value, got {line!r}")
        key, raw = (part.strip() for part in body.split("=", 1))
        if key not in _ALL_FIELDS:
            raise ConfigError(f"config line {lineno}: unknown config key {key!r}")
        if key in values:
            raise ConfigError(f"config line {lineno}: duplicate config key {key!r}")
        values[key] = _parse_value(key, raw)
    return ExperimentConfig(**values)


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path!r}: {exc}") from exc
    return parse_config(text)


def convert_units(config: ExperimentConfig) -> SceneConstants:
    """Scene constants in SI units from the engineering-unit config."""
    return SceneConstants(
        wavelength=config.wavelength_m,
        sensing_power=dbm_to_watts(config.sensing_power_dbm),
        comm_power=dbm_to_watts(config.comm_power_dbm),
        noise_sensing=dbm_to_watts(config.noise_sensing_dbm),
        noise_comm=dbm_to_watts(config.noise_comm_dbm),
        noise_eve=dbm_to_watts(config.noise_eve_dbm),
        snapshots=config.snapshots,
        rcs=dbsm_to_m2(config.rcs_dbsm),
        dist_bc=config.dist_bc_m,
        dist_be=config.dist_be_m,
    )
