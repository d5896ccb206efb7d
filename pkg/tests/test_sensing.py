import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from predbeam.errors import InvalidArgument, NotEnoughHistory
from predbeam.mobility import MobilityConfig, RsuLocation, simulate_trajectories
from predbeam.sensing import NoiseModel, assemble_history, calibrate_noise, estimate_angles, sensing_errors


def test_zero_nmse_is_noiseless():
    nm = calibrate_noise(0.0, [0.3, 0.4])
    assert nm.sigma_e == 0.0
    x = np.array([0.1, 0.2, 3.0])
    np.testing.assert_array_equal(estimate_angles(x, nm, np.random.default_rng(0)), x)


def test_calibration_unit_moment():
    assert calibrate_noise(0.25, [1.0, 1.0, 1.0]).sigma_e == pytest.approx(0.5, abs=1e-15)


def test_calibration_on_trajectory_corpus():
    g = np.random.default_rng(9)
    corpus = np.concatenate(
        [simulate_trajectories(8, 7, MobilityConfig(), RsuLocation(), g).true_angles.ravel() for _ in range(50)]
    )
    nm = calibrate_noise(0.7, corpus)
    brute = math.sqrt(0.7 * sum(t * t for t in corpus) / len(corpus))
    assert nm.sigma_e == pytest.approx(brute, rel=1e-12)
    assert nm.sigma_e ** 2 == pytest.approx(nm.nmse * nm.angle_second_moment, rel=1e-12)


def test_calibration_rejects_empty():
    with pytest.raises(InvalidArgument):
        calibrate_noise(0.5, [])


def test_estimation_error_statistics():
    nm = NoiseModel(0.5, 0.08)
    truth = np.full(1_000_000, 0.4)
    err = estimate_angles(truth, nm, np.random.default_rng(1)) - truth
    assert err.var() == pytest.approx(nm.sigma_e ** 2, rel=0.01)
    assert abs(err.mean()) < 3 * nm.sigma_e / math.sqrt(err.size)


def test_errors_independent_across_vehicles():
    nm = NoiseModel(1.0, 1.0)
    e = sensing_errors((200_000, 2), nm, np.random.default_rng(2))
    assert abs(np.corrcoef(e[:, 0], e[:, 1])[0, 1]) < 4 / math.sqrt(e.shape[0])


def test_estimates_not_clamped():
    nm = NoiseModel(100.0, 1.0)
    out = estimate_angles(np.full(1000, 0.1), nm, np.random.default_rng(3))
    assert out.min() < 0 and out.max() > math.pi


def test_bias_mode_repeats_over_slots():
    e = sensing_errors((3, 5), NoiseModel(1.0, 1.0, per_vehicle_bias=True), np.random.default_rng(4))
    assert np.all(e == e[:, :1])


def test_history_single_column():
    slots = [np.array([0.1, 0.2]), np.array([0.3, 0.4])]
    h = assemble_history(slots, 2, 1)
    np.testing.assert_array_equal(h.values, [[0.3], [0.4]])


def test_history_ordering_most_recent_first():
    slots = [np.full(3, float(n)) for n in range(10)]
    h = assemble_history(slots, 8, 4)
    np.testing.assert_array_equal(h.values[0], [7.0, 6.0, 5.0, 4.0])
    assert h.slot_index == 8 and h.window == 4


def test_history_constant_slots():
    slots = [np.array([0.5, 0.6])] * 6
    h = assemble_history(slots, 6, 6)
    assert np.all(h.values == h.values[:, :1])


def test_history_needs_enough_slots():
    with pytest.raises(NotEnoughHistory):
        assemble_history([np.zeros(2)] * 3, 2, 3)


@given(st.integers(1, 6), st.integers(0, 4))
def test_history_is_a_reindexing(tau, extra):
    g = np.random.default_rng(tau * 10 + extra)
    slots = [g.normal(size=3) for _ in range(tau + extra)]
    n = tau + extra
    h = assemble_history(slots, n, tau)
    used = np.concatenate(slots[n - tau : n])
    np.testing.assert_array_equal(np.sort(h.values.ravel()), np.sort(used))
