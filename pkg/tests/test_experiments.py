import math

import numpy as np
import pytest

from predbeam.config import ExperimentConfig, load_config, parse_config_text
from predbeam.errors import ConfigError, TrainingDiverged
from predbeam.experiments import (
    CSV_HEADER,
    EVAL_STREAM,
    TRAIN_STREAM,
    SweepResult,
    emit_results,
    evaluate,
    generate_dataset,
    noise_model,
    power_for_rate,
    read_csv,
    simulate_episodes,
    sweep_power,
    train,
)
from predbeam.predictors import MODEL_BASED, PERFECT

TINY = ExperimentConfig(train_set_size=300, max_iterations=150, realizations=60, eval_every=50,
                        early_stop_patience=0, nmse_grid=(0.2, 0.7), power_grid_dbm=(0.0, 10.0, 20.0))


def test_zero_nmse_dataset_is_true_angles():
    ds = generate_dataset(TINY, 0.0)
    ep = simulate_episodes(TINY, TINY.train_set_size, TRAIN_STREAM)
    tau = TINY.window
    for j in range(tau):
        np.testing.assert_array_equal(ds.inputs[:, :, j], ep.angles[:, :, tau - 1 - j])
    np.testing.assert_array_equal(ds.labels, ep.angles[:, :, tau])


def test_dataset_deterministic():
    from predbeam.experiments import _episodes

    a = generate_dataset(TINY, 0.5)
    _episodes.cache_clear()
    b = generate_dataset(TINY, 0.5)
    np.testing.assert_array_equal(a.inputs, b.inputs)
    np.testing.assert_array_equal(a.labels, b.labels)


def test_label_gap_is_one_slot_motion():
    cfg = TINY.replace(process_noise_std=0.0)
    ds = generate_dataset(cfg, 0.0)
    ep = simulate_episodes(cfg, cfg.train_set_size, TRAIN_STREAM)
    tau = cfg.window
    # angle change over one slot: |d theta| = v dT sin(theta) / d to first order
    motion = ep.vx[:, :, tau - 1] * cfg.slot_duration * np.sin(ep.angles[:, :, tau - 1]) / ep.dists[:, :, tau - 1]
    gap = np.abs(ds.labels - ds.inputs[:, :, 0])
    assert gap.mean() == pytest.approx(motion.mean(), rel=1e-2)


def test_noise_calibration_uses_training_corpus():
    ep = simulate_episodes(TINY, TINY.train_set_size, TRAIN_STREAM)
    nm = noise_model(TINY, 0.7)
    assert nm.sigma_e == pytest.approx(math.sqrt(0.7 * np.mean(ep.angles ** 2)), rel=1e-12)


def test_mixed_mode_cycles_noise_levels():
    ds = generate_dataset(TINY.replace(training_mode="mixed"))
    assert ds.nmse == (0.2, 0.7)


def test_train_descends_and_is_deterministic():
    ds = generate_dataset(TINY, 0.3)
    a = train(TINY, ds)
    b = train(TINY, ds)
    assert a.final_train_loss < a.initial_train_loss
    assert a.loss_trace == b.loss_trace
    assert a.model.metadata["nmse"] == [0.3]


def test_train_reports_divergence():
    ds = generate_dataset(TINY, 0.3)
    with pytest.raises(TrainingDiverged) as info:
        train(TINY.replace(learning_rate=1e200, max_iterations=50), ds)
    assert len(info.value.trace) >= 1


def test_noiseless_training_reaches_small_rmse():
    cfg = ExperimentConfig()
    result = train(cfg, generate_dataset(cfg, 0.0))
    assert result.val_rmse() < 0.01


def test_perfect_rate_independent_of_nmse():
    a = evaluate(TINY, 0.1, 20.0, (PERFECT, MODEL_BASED))
    b = evaluate(TINY, 0.9, 20.0, (PERFECT, MODEL_BASED))
    assert a[0].mean_sum_rate == b[0].mean_sum_rate
    assert a[1].mean_sum_rate > b[1].mean_sum_rate


def test_pinned_vehicles_perfect_anchor():
    cfg = TINY.replace(init_std=0.0, process_noise_std=0.0, velocity_min=0.0, velocity_max=0.0)
    (r,) = evaluate(cfg, 0.5, 20.0, (PERFECT,))
    assert r.mean_sum_rate == pytest.approx(5.765499798425163, abs=1e-9)
    assert r.std_sum_rate == pytest.approx(0.0, abs=1e-12)


def test_standard_error_shrinks_with_realizations():
    small = evaluate(TINY.replace(realizations=400), 0.7, 20.0, (MODEL_BASED,))[0]
    large = evaluate(TINY.replace(realizations=800), 0.7, 20.0, (MODEL_BASED,))[0]
    assert 0.55 < large.std_error / small.std_error < 0.87


def test_evaluate_requires_model_for_clrnet():
    from predbeam.errors import InvalidArgument

    with pytest.raises(InvalidArgument):
        evaluate(TINY, 0.5, 20.0)


def test_emit_results_header_only(tmp_path):
    csv_path, cfg_path = emit_results([], tmp_path, TINY)
    assert csv_path.read_text() == ",".join(CSV_HEADER) + "\n"
    assert load_config(cfg_path) == TINY


def test_emit_results_round_trip_and_order(tmp_path):
    rows = [
        SweepResult(0.7, 20.0, "perfect", 5.1234567890123456, 0.1, 200, 1),
        SweepResult(0.1, 20.0, "perfect", 1 / 3, 0.2, 200, 1),
        SweepResult(0.7, 5.0, "clrnet", math.pi, 1e-17, 200, 1),
        SweepResult(0.7, 0.0, "clrnet", math.e, 0.0, 200, 1),
        SweepResult(0.3, 20.0, "model_based", 2.0, 0.3, 200, 1),
    ]
    path, _ = emit_results(rows, tmp_path, TINY)
    back = read_csv(path)
    assert [(r.method, r.nmse, r.power_dbm) for r in back] == [
        ("clrnet", 0.7, 0.0), ("clrnet", 0.7, 5.0), ("model_based", 0.3, 20.0),
        ("perfect", 0.1, 20.0), ("perfect", 0.7, 20.0),
    ]
    assert set(back) == set(rows)


def test_power_for_rate_interpolates():
    rows = [SweepResult(0.7, p, "x", r, 0, 1, 0) for p, r in [(0, 1.0), (10, 3.0), (20, 7.0)]]
    assert power_for_rate(rows, "x", 5.0) == pytest.approx(15.0)
    assert power_for_rate(rows, "x", 9.0) == math.inf


def test_sweep_power_rates_increase():
    results, model = sweep_power(TINY)
    for method in ("perfect", "model_based", "clrnet"):
        rates = [r.mean_sum_rate for r in sorted(results, key=lambda r: r.power_dbm) if r.method == method]
        assert np.all(np.diff(rates) > 0)


def test_config_text_round_trip_and_errors(tmp_path):
    cfg = ExperimentConfig(seed=5, nmse_grid=(0.25, 0.5), resample_velocity=False)
    assert ExperimentConfig(**parse_config_text(cfg.to_text())) == cfg
    with pytest.raises(ConfigError):
        parse_config_text("bogus_key = 3")
    with pytest.raises(ConfigError):
        parse_config_text("seed 3")
    p = tmp_path / "c.txt"
    p.write_text("# comment\nseed = 9\nnmse_grid = 0.1, 0.2\n\nstandardize = yes\n")
    cfg = load_config(p, {"seed": "11"}, paper_scale=True)
    assert (cfg.seed, cfg.nmse_grid, cfg.standardize) == (11, (0.1, 0.2), True)
    assert (cfg.realizations, cfg.train_set_size) == (2000, 10000)
