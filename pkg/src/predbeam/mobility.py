"""Vehicle kinematics along a straight road and RSU-relative geometry."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometry, InvalidArgument

# Episodes with any vehicle this close to the RSU are regenerated.
MIN_RSU_DISTANCE = 0.5
_MAX_REJECTIONS = 1000


@dataclass(frozen=True)
class RsuLocation:
    x: float = 0.0
    y: float = 0.0


@dataclass(frozen=True)
class VehicleState:
    """Position in meters and the x-velocity (m/s) used for the next step."""

    x: float
    y: float
    vx: float


@dataclass(frozen=True)
class MobilityConfig:
    slot_duration: float = 0.02
    process_noise_std: float = 0.05
    init_mean: tuple[float, float] = (25.0, 10.0)
    init_std: float = 1.0
    velocity_range: tuple[float, float] = (8.0, 8.25)
    # False keeps each vehicle's first velocity draw for the whole episode.
    resample_velocity: bool = True

    def __post_init__(self):
        if not self.slot_duration > 0:
            raise InvalidArgument("slot_duration must be positive")
        if self.process_noise_std < 0 or self.init_std < 0:
            raise InvalidArgument("standard deviations must be non-negative")
        lo, hi = self.velocity_range
        if lo > hi:
            raise InvalidArgument("velocity_range low must not exceed high")


@dataclass(frozen=True)
class TrajectoryHistory:
    """K x N arrays; column n is time slot n."""

    x: np.ndarray
    y: np.ndarray
    vx: np.ndarray
    true_angles: np.ndarray
    true_dists: np.ndarray

    @property
    def num_vehicles(self) -> int:
        return self.x.shape[0]

    @property
    def num_slots(self) -> int:
        return self.x.shape[1]

    def state(self, k: int, n: int) -> VehicleState:
        return VehicleState(float(self.x[k, n]), float(self.y[k, n]), float(self.vx[k, n]))


def sample_initial_state(cfg: MobilityConfig, rng: np.random.Generator) -> VehicleState:
    dx, dy = rng.normal(0.0, 1.0, size=2) * cfg.init_std
    vx = rng.uniform(*cfg.velocity_range)
    return VehicleState(cfg.init_mean[0] + dx, cfg.init_mean[1] + dy, float(vx))


def step(state: VehicleState, cfg: MobilityConfig, rng: np.random.Generator) -> VehicleState:
    """Advance one slot: L <- L + [vx, 0] dT + g, g ~ N(0, sigma_g^2 I)."""
    gx, gy = rng.normal(0.0, 1.0, size=2) * cfg.process_noise_std
    vx = rng.uniform(*cfg.velocity_range) if cfg.resample_velocity else state.vx
    return VehicleState(state.x + state.vx * cfg.slot_duration + gx, state.y + gy, float(vx))


def distance_of(state, rsu: RsuLocation):
    return math.hypot(state.x - rsu.x, state.y - rsu.y)


def angle_of(state, rsu: RsuLocation) -> float:
    d = distance_of(state, rsu)
    if d == 0.0:
        raise DegenerateGeometry("vehicle coincides with the RSU")
    # clip guards the last ulp of |dx| / d exceeding 1
    return math.acos(min(1.0, max(-1.0, (state.x - rsu.x) / d)))


def angles_and_distances(x, y, rsu: RsuLocation):
    """Vectorised angle_of / distance_of over coordinate arrays."""
    dx = np.asarray(x, dtype=float) - rsu.x
    dy = np.asarray(y, dtype=float) - rsu.y
    d = np.hypot(dx, dy)
    if np.any(d == 0.0):
        raise DegenerateGeometry("vehicle coincides with the RSU")
    return np.arccos(np.clip(dx / d, -1.0, 1.0)), d


def _simulate_once(k_vehicles, n_slots, cfg, rng):
    x = np.empty((k_vehicles, n_slots))
    y = np.empty_like(x)
    vx = np.empty_like(x)
    for k in range(k_vehicles):
        s = sample_initial_state(cfg, rng)
        for n in range(n_slots):
            if n:
                s = step(s, cfg, rng)
            x[k, n], y[k, n], vx[k, n] = s.x, s.y, s.vx
    return x, y, vx


def simulate_trajectories(
    k_vehicles: int,
    n_slots: int,
    cfg: MobilityConfig,
    rsu: RsuLocation,
    rng: np.random.Generator,
) -> TrajectoryHistory:
    """Independent per-vehicle chains of :func:`step`.

    The whole episode is redrawn (from the same stream) whenever a vehicle
    comes within MIN_RSU_DISTANCE of the RSU.
    """
    if k_vehicles < 1 or n_slots < 1:
        raise InvalidArgument("need at least one vehicle and one slot")
    for _ in range(_MAX_REJECTIONS):
        x, y, vx = _simulate_once(k_vehicles, n_slots, cfg, rng)
        if np.all(np.hypot(x - rsu.x, y - rsu.y) >= MIN_RSU_DISTANCE):
            angles, dists = angles_and_distances(x, y, rsu)
            return TrajectoryHistory(x, y, vx, angles, dists)
    raise DegenerateGeometry(
        f"no episode kept clear of the RSU after {_MAX_REJECTIONS} attempts"
    )
