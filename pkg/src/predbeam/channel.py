"""ULA steering vectors, path loss and downlink rate evaluation.

Angles are radians and powers are linear watts throughout; the dB/dBm
helpers at the bottom are for I/O boundaries only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument


@dataclass(frozen=True)
class ChannelParams:
    """Link budget of the RSU downlink.

    Defaults: 32x32 array, -65 dB reference loss at 1 m, exponent 3,
    -80 dBm noise and 20 dBm total transmit power.
    """

    num_tx_antennas: int = 32
    num_rx_antennas: int = 32
    ref_path_loss: float = 10 ** -6.5
    ref_distance: float = 1.0
    path_loss_exp: float = 3.0
    noise_power: float = 1e-11
    total_power: float = 0.1

    def __post_init__(self):
        if self.num_tx_antennas < 1 or self.num_rx_antennas < 1:
            raise InvalidArgument("antenna counts must be positive")
        for name in ("ref_path_loss", "ref_distance", "path_loss_exp", "noise_power"):
            if not getattr(self, name) > 0:
                raise InvalidArgument(f"{name} must be positive")
        if not self.total_power >= 0:
            raise InvalidArgument("total_power must be non-negative")

    @property
    def tx_gain(self) -> float:
        return math.sqrt(self.num_tx_antennas)

    @property
    def array_gain(self) -> float:
        """Total two-way array gain sqrt(Nt * Nr) of the sensing echo."""
        return math.sqrt(self.num_tx_antennas * self.num_rx_antennas)


def _check_antennas(n_antennas):
    if int(n_antennas) != n_antennas or n_antennas < 1:
        raise InvalidArgument(f"n_antennas must be a positive integer, got {n_antennas!r}")
    return int(n_antennas)


def _check_angles(theta):
    theta = np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(theta)):
        raise InvalidArgument("angles must be finite")
    return theta


def steering_matrix(thetas, n_antennas: int) -> np.ndarray:
    """Stack of steering vectors, shape ``thetas.shape + (n_antennas,)``."""
    n = _check_antennas(n_antennas)
    thetas = _check_angles(thetas)
    m = np.arange(n)
    phase = -np.pi * np.multiply.outer(np.cos(thetas), m)
    return np.exp(1j * phase) / math.sqrt(n)


def tx_steering(theta: float, n_antennas: int) -> np.ndarray:
    """Transmit steering vector; entry m is exp(-j*pi*m*cos(theta)) / sqrt(N)."""
    if np.ndim(theta) != 0:
        raise InvalidArgument("theta must be a scalar")
    return steering_matrix(theta, n_antennas)


def rx_steering(theta: float, n_antennas: int) -> np.ndarray:
    # Same ULA response as the transmit side, sized by the receive array.
    return tx_steering(theta, n_antennas)


def beam_alignment_gain(theta_true, theta_point, n_antennas: int):
    """|a(theta_true)^H a(theta_point)|^2, evaluated by direct inner product.

    Broadcasts over array arguments. Returns a float for scalar input.
    """
    a = steering_matrix(theta_true, n_antennas)
    b = steering_matrix(theta_point, n_antennas)
    inner = np.sum(np.conj(a) * b, axis=-1)
    gain = inner.real ** 2 + inner.imag ** 2
    return float(gain) if np.ndim(gain) == 0 else gain


def dirichlet_gain(theta_true, theta_point, n_antennas: int):
    """Closed-form squared Dirichlet kernel; used as an oracle in tests."""
    n = _check_antennas(n_antennas)
    psi = np.cos(_check_angles(theta_true)) - np.cos(_check_angles(theta_point))
    half = np.pi * psi / 2
    den = n * np.sin(half)
    small = np.abs(np.sin(half)) < 1e-8
    safe = np.where(small, 1.0, den)
    ratio = np.where(small, _dirichlet_series(half, n), np.sin(n * half) / safe)
    out = ratio ** 2
    return float(out) if np.ndim(out) == 0 else out


def _dirichlet_series(x, n):
    # sin(n x) / (n sin x) ~ 1 - (n^2 - 1) x^2 / 6 near the removable singularity;
    # x is reduced modulo pi so the series also covers the aliased peaks.
    k = np.round(x / np.pi)
    r = x - k * np.pi
    sign = np.where((k * (n - 1)) % 2 == 0, 1.0, -1.0)
    return sign * (1.0 - (n * n - 1) * r * r / 6.0)


def path_loss(d, params: ChannelParams):
    """alpha0 * (d / d0)^-zeta."""
    d = np.asarray(d, dtype=float)
    if not np.all(d > 0):
        raise InvalidArgument("distance must be positive")
    out = params.ref_path_loss * (d / params.ref_distance) ** (-params.path_loss_exp)
    return float(out) if np.ndim(out) == 0 else out


def user_snr(theta_true, theta_point, d, p, params: ChannelParams):
    """Per-user SNR under the asymptotic-orthogonality simplification."""
    p = np.asarray(p, dtype=float)
    if not np.all(p >= 0):
        raise InvalidArgument("power must be non-negative")
    gain = beam_alignment_gain(theta_true, theta_point, params.num_tx_antennas)
    out = p * params.num_tx_antennas * path_loss(d, params) * gain / params.noise_power
    return float(out) if np.ndim(out) == 0 else out


def beamformer_from_angle(theta_point: float, p: float, params: ChannelParams) -> np.ndarray:
    """sqrt(p) * a(theta_point); squared norm equals p."""
    if not p >= 0:
        raise InvalidArgument("power must be non-negative")
    return math.sqrt(p) * tx_steering(theta_point, params.num_tx_antennas)


def user_sinr(user_index: int, thetas_true, beams, dists, params: ChannelParams) -> float:
    """SINR of one user with the full inter-user interference sum.

    ``beams`` is a K x Nt array (one beamformer per row).
    """
    thetas_true = _check_angles(thetas_true).reshape(-1)
    beams = np.atleast_2d(np.asarray(beams, dtype=complex))
    dists = np.asarray(dists, dtype=float).reshape(-1)
    k_users = thetas_true.size
    if beams.shape != (k_users, params.num_tx_antennas) or dists.size != k_users:
        raise InvalidArgument("inconsistent lengths for thetas, beams and dists")
    if not 0 <= user_index < k_users:
        raise InvalidArgument(f"user_index {user_index} out of range for K={k_users}")
    a = tx_steering(float(thetas_true[user_index]), params.num_tx_antennas)
    scale = params.num_tx_antennas * path_loss(float(dists[user_index]), params)
    received = np.abs(beams @ np.conj(a)) ** 2 * scale
    signal = received[user_index]
    interference = received.sum() - signal
    return float(signal / (interference + params.noise_power))


def sum_rate(thetas_true, thetas_point, dists, powers, params: ChannelParams):
    """Downlink sum-rate sum_k log2(1 + SNR_k) in bits/s/Hz.

    Inputs of shape (..., K) give a result of shape (...).
    """
    thetas_true = np.asarray(thetas_true, dtype=float)
    shape = thetas_true.shape
    if any(np.shape(x) != shape for x in (thetas_point, dists, powers)):
        raise InvalidArgument("sum_rate inputs must share one shape")
    snr = user_snr(thetas_true, thetas_point, dists, powers, params)
    out = np.sum(np.log2(1.0 + np.asarray(snr)), axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def dbm_to_watts(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def watts_to_dbm(w):
    return 10.0 * np.log10(np.asarray(w, dtype=float)) + 30.0


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)
