import math

import numpy as np
import pytest

from predbeam.errors import DegenerateGeometry, InvalidArgument
from predbeam.mobility import (
    MobilityConfig,
    RsuLocation,
    VehicleState,
    angle_of,
    distance_of,
    sample_initial_state,
    simulate_trajectories,
    step,
)

RSU = RsuLocation()
STILL = MobilityConfig(process_noise_std=0.0, init_std=0.0, velocity_range=(8.0, 8.0))


def rng(seed=0):
    return np.random.default_rng(seed)


def test_degenerate_initial_state():
    s = sample_initial_state(STILL, rng())
    assert (s.x, s.y, s.vx) == (25.0, 10.0, 8.0)


def test_initial_state_statistics():
    cfg = MobilityConfig()
    g = rng(1)
    states = [sample_initial_state(cfg, g) for _ in range(100_000)]
    xy = np.array([(s.x, s.y) for s in states])
    vx = np.array([s.vx for s in states])
    band = 3 * cfg.init_std / math.sqrt(len(states))
    assert abs(xy[:, 0].mean() - 25.0) < band
    assert abs(xy[:, 1].mean() - 10.0) < band
    assert vx.min() >= 8.0 and vx.max() <= 8.25


def test_step_without_motion_or_noise():
    cfg = MobilityConfig(process_noise_std=0.0, velocity_range=(0.0, 0.0))
    s = step(VehicleState(3.0, 4.0, 0.0), cfg, rng())
    assert (s.x, s.y) == (3.0, 4.0)


def test_step_advances_by_v_dt():
    cfg = MobilityConfig(process_noise_std=0.0)
    s = step(VehicleState(25.0, 10.0, 8.0), cfg, rng())
    assert s.x == pytest.approx(25.16, abs=1e-12)
    assert s.y == 10.0
    assert 8.0 <= s.vx <= 8.25


def test_step_noise_variance():
    sigma = 0.3
    cfg = MobilityConfig(process_noise_std=sigma, velocity_range=(0.0, 0.0))
    g = rng(2)
    moves = np.array([(lambda s: (s.x, s.y))(step(VehicleState(0.0, 5.0, 0.0), cfg, g)) for _ in range(100_000)])
    moves[:, 1] -= 5.0
    np.testing.assert_allclose(moves.var(axis=0), sigma ** 2, rtol=0.05)


def test_constant_velocity_flag():
    cfg = MobilityConfig(process_noise_std=0.0, resample_velocity=False)
    s = step(VehicleState(0.0, 1.0, 8.1), cfg, rng())
    assert s.vx == 8.1


def test_angle_of_reference_points():
    assert angle_of(VehicleState(5.0, 0.0, 0.0), RSU) == 0.0
    assert angle_of(VehicleState(0.0, 5.0, 0.0), RSU) == pytest.approx(math.pi / 2, abs=1e-15)
    assert angle_of(VehicleState(25.0, 10.0, 0.0), RSU) == pytest.approx(0.3805063771123649, abs=1e-12)
    shifted = RsuLocation(3.0, -2.0)
    assert angle_of(VehicleState(8.0, -2.0, 0.0), shifted) == 0.0
    with pytest.raises(DegenerateGeometry):
        angle_of(VehicleState(0.0, 0.0, 0.0), RSU)


def test_distance_of():
    assert distance_of(VehicleState(0.0, 3.0, 0.0), RSU) == 3.0
    assert distance_of(VehicleState(25.0, 10.0, 0.0), RSU) == pytest.approx(26.92582403567252, abs=1e-12)
    a = distance_of(VehicleState(7.0, -1.0, 0.0), RsuLocation(1.0, 2.0))
    b = distance_of(VehicleState(17.0, 9.0, 0.0), RsuLocation(11.0, 12.0))
    assert a == b


def test_deterministic_arithmetic_progression():
    h = simulate_trajectories(3, 10, STILL, RSU, rng())
    np.testing.assert_allclose(h.x, 25.0 + 0.16 * np.arange(10)[None, :].repeat(3, 0), atol=1e-12)
    assert np.all(h.y == 10.0)


def test_same_seed_identical():
    cfg = MobilityConfig()
    a = simulate_trajectories(8, 7, cfg, RSU, rng(42))
    b = simulate_trajectories(8, 7, cfg, RSU, rng(42))
    for f in ("x", "y", "vx", "true_angles", "true_dists"):
        np.testing.assert_array_equal(getattr(a, f), getattr(b, f))


def test_angle_nonincreasing_moving_away():
    cfg = MobilityConfig(process_noise_std=0.0)
    h = simulate_trajectories(8, 50, cfg, RSU, rng(3))
    assert np.all(np.diff(h.true_angles, axis=1) <= 0)
    # y is constant without process noise
    assert np.all(h.y == h.y[:, :1])


def test_kinematic_consistency_and_geometry():
    cfg = MobilityConfig(process_noise_std=0.0)
    h = simulate_trajectories(4, 20, cfg, RSU, rng(4))
    np.testing.assert_allclose(np.diff(h.x, axis=1), h.vx[:, :-1] * cfg.slot_duration, atol=1e-12)
    for k in range(4):
        for n in range(20):
            s = h.state(k, n)
            assert h.true_angles[k, n] == pytest.approx(angle_of(s, RSU), abs=1e-15)
            assert h.true_dists[k, n] == pytest.approx(distance_of(s, RSU), abs=1e-12)
    assert np.all((h.true_angles >= 0) & (h.true_angles <= math.pi))
    assert np.all(h.true_dists > 0)


def test_rejects_episode_through_rsu():
    cfg = MobilityConfig(init_mean=(0.0, 0.0), init_std=0.0, process_noise_std=0.0, velocity_range=(0.0, 0.0))
    with pytest.raises(DegenerateGeometry):
        simulate_trajectories(1, 2, cfg, RSU, rng())


def test_config_validation():
    with pytest.raises(InvalidArgument):
        MobilityConfig(slot_duration=0.0)
    with pytest.raises(InvalidArgument):
        MobilityConfig(velocity_range=(2.0, 1.0))
    with pytest.raises(InvalidArgument):
        simulate_trajectories(0, 3, MobilityConfig(), RSU, rng())
