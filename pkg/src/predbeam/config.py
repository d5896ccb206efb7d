"""Experiment configuration and its ``key = value`` text format.

Every field of :class:`ExperimentConfig` is a valid key. Lines starting
with ``#`` and blank lines are ignored; sequences are comma-separated;
booleans accept true/false/yes/no/1/0. Unknown keys are errors.
"""
from __future__ import annotations

import dataclasses
import typing
from dataclasses import dataclass
from pathlib import Path

from .channel import ChannelParams, db_to_linear, dbm_to_watts
from .errors import ConfigError
from .mobility import MobilityConfig, RsuLocation
from .nn.clrnet import ClrnetArch

PAPER_SCALE = {"realizations": 2000, "train_set_size": 10000}


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 2022
    num_vehicles: int = 8
    window: int = 6

    # mobility
    slot_duration: float = 0.02
    process_noise_std: float = 0.05
    init_mean_x: float = 25.0
    init_mean_y: float = 10.0
    init_std: float = 1.0
    velocity_min: float = 8.0
    velocity_max: float = 8.25
    resample_velocity: bool = True
    rsu_x: float = 0.0
    rsu_y: float = 0.0

    # channel (dB / dBm at this boundary, linear inside)
    num_tx_antennas: int = 32
    num_rx_antennas: int = 32
    ref_path_loss_db: float = -65.0
    ref_distance: float = 1.0
    path_loss_exp: float = 3.0
    noise_power_dbm: float = -80.0
    total_power_dbm: float = 20.0

    # sensing
    nmse: float = 0.7
    per_vehicle_bias: bool = False

    # network and training
    conv_filters: int = 4
    lstm_hidden: int = 8
    standardize: bool = False
    precision: str = "float64"
    train_set_size: int = 2000
    max_iterations: int = 10000
    batch_size: int = 128
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    validation_fraction: float = 0.1
    eval_every: int = 100
    early_stop_patience: int = 30
    training_mode: str = "matched"

    # evaluation
    realizations: int = 200
    nmse_grid: tuple[float, ...] = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
    power_grid_dbm: tuple[float, ...] = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0)
    sweep_power_nmse: float = 0.7

    def __post_init__(self):
        if not self.nmse_grid or not self.power_grid_dbm:
            raise ConfigError("grids must be non-empty")
        for name in ("num_vehicles", "window", "train_set_size", "max_iterations",
                     "batch_size", "realizations", "eval_every"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ConfigError("validation_fraction must be in [0, 1)")
        if self.precision not in ("float64", "float32"):
            raise ConfigError("precision must be float64 or float32")
        if self.training_mode not in ("matched", "mixed"):
            raise ConfigError("training_mode must be matched or mixed")
        if min(self.nmse_grid) < 0 or self.nmse < 0:
            raise ConfigError("nmse values must be non-negative")

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def mobility(self) -> MobilityConfig:
        return MobilityConfig(
            slot_duration=self.slot_duration,
            process_noise_std=self.process_noise_std,
            init_mean=(self.init_mean_x, self.init_mean_y),
            init_std=self.init_std,
            velocity_range=(self.velocity_min, self.velocity_max),
            resample_velocity=self.resample_velocity,
        )

    def rsu(self) -> RsuLocation:
        return RsuLocation(self.rsu_x, self.rsu_y)

    def channel(self, power_dbm: float | None = None) -> ChannelParams:
        p = self.total_power_dbm if power_dbm is None else power_dbm
        return ChannelParams(
            num_tx_antennas=self.num_tx_antennas,
            num_rx_antennas=self.num_rx_antennas,
            ref_path_loss=float(db_to_linear(self.ref_path_loss_db)),
            ref_distance=self.ref_distance,
            path_loss_exp=self.path_loss_exp,
            noise_power=float(dbm_to_watts(self.noise_power_dbm)),
            total_power=float(dbm_to_watts(p)),
        )

    def arch(self) -> ClrnetArch:
        return ClrnetArch(self.num_vehicles, self.window, self.conv_filters, self.lstm_hidden)

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            lines.append(f"{f.name} = {_format_value(value)}")
        return "\n".join(lines) + "\n"


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(repr(v) for v in value)
    return repr(value) if isinstance(value, float) else str(value)


_HINTS = typing.get_type_hints(ExperimentConfig)
_TRUE = {"true", "yes", "1", "on"}
_FALSE = {"false", "no", "0", "off"}


def parse_value(key: str, raw: str):
    if key not in _HINTS:
        raise ConfigError(f"unknown config key {key!r}")
    kind = _HINTS[key]
    raw = raw.strip()
    try:
        if kind is bool:
            low = raw.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is str:
            return raw
        # tuple[float, ...]
        items = [s for s in (p.strip() for p in raw.split(",")) if s]
        return tuple(float(s) for s in items)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {exc}") from exc


def parse_config_text(text: str) -> dict:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        values[key] = parse_value(key, raw)
    return values


def load_config(path=None, overrides: dict | None = None, paper_scale: bool = False) -> ExperimentConfig:
    """Defaults, then the file, then the paper-scale sizes, then overrides."""
    values = {}
    if path is not None:
        values.update(parse_config_text(Path(path).read_text()))
    if paper_scale:
        values.update(PAPER_SCALE)
    for key, value in (overrides or {}).items():
        values[key] = parse_value(key, value) if isinstance(value, str) else value
    unknown = set(values) - set(_HINTS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return ExperimentConfig(**values)
