"""Additive-Gaussian angle sensing and predictor input windows."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidArgument, NotEnoughHistory


@dataclass(frozen=True)
class NoiseModel:
    """Estimation-error level calibrated to a target NMSE.

    sigma_e**2 == nmse * angle_second_moment. With ``per_vehicle_bias`` the
    error is drawn once per vehicle and reused across slots instead of being
    redrawn for every observation.
    """

    nmse: float
    angle_second_moment: float
    per_vehicle_bias: bool = False

    @property
    def sigma_e(self) -> float:
        return math.sqrt(self.nmse * self.angle_second_moment)


@dataclass(frozen=True)
class AngleHistory:
    """K x tau window of noisy estimates; column j holds slot n-1-j."""

    values: np.ndarray
    slot_index: int
    window: int

    def __post_init__(self):
        if self.window < 1 or self.values.shape[-1] != self.window:
            raise InvalidArgument("history width must equal window >= 1")
        if not np.all(np.isfinite(self.values)):
            raise InvalidArgument("history entries must be finite")


def calibrate_noise(nmse: float, angle_samples, per_vehicle_bias: bool = False) -> NoiseModel:
    samples = np.asarray(angle_samples, dtype=float).ravel()
    if samples.size == 0:
        raise InvalidArgument("calibration needs at least one angle sample")
    if not nmse >= 0:
        raise InvalidArgument("nmse must be non-negative")
    return NoiseModel(float(nmse), float(np.mean(samples * samples)), per_vehicle_bias)


def sensing_errors(shape, noise: NoiseModel, rng: np.random.Generator) -> np.ndarray:
    """Error draws for a K x n_slots block of observations.

    Standard normals are always drawn for the full block and then scaled, so
    the random stream is consumed identically at every NMSE.
    """
    z = rng.standard_normal(shape)
    if noise.per_vehicle_bias:
        z = np.repeat(z[..., :1], shape[-1], axis=-1)
    return noise.sigma_e * z


def estimate_angles(true_angles, noise: NoiseModel, rng: np.random.Generator) -> np.ndarray:
    """theta + N(0, sigma_e^2), independent across vehicles. Not clamped."""
    true_angles = np.asarray(true_angles, dtype=float)
    return true_angles + noise.sigma_e * rng.standard_normal(true_angles.shape)


def assemble_history(estimates_by_slot: Sequence, n: int, tau: int) -> AngleHistory:
    """Stack slots n-1, n-2, ..., n-tau into a K x tau matrix."""
    if tau < 1:
        raise InvalidArgument("tau must be at least 1")
    if n - tau < 0 or n > len(estimates_by_slot):
        raise NotEnoughHistory(
            f"slot {n} needs {tau} earlier slots, have {min(n, len(estimates_by_slot))}"
        )
    cols = [np.asarray(estimates_by_slot[n - 1 - j], dtype=float) for j in range(tau)]
    return AngleHistory(np.stack(cols, axis=-1), n, tau)
