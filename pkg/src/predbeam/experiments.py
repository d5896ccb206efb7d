"""Dataset generation, CLRNet training and Monte-Carlo sum-rate sweeps.

Random streams: every episode draws from its own generator seeded with
``(seed, stream, index)``, so episodes are reproducible one by one and the
same episode (trajectory and standard-normal sensing draws) is reused at
every NMSE and power level. Only the noise scale changes between grid
points.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import __version__
from .channel import dbm_to_watts, sum_rate
from .config import ExperimentConfig
from .errors import InvalidArgument, TrainingDiverged
from .mobility import MobilityConfig, RsuLocation, simulate_trajectories
from .nn.clrnet import backward, clrnet_forward, init_params, mse_loss
from .nn.model import ClrnetModel, Normalization
from .nn.optim import OptimizerState, optimizer_step
from .predictors import CLRNET, METHODS, MODEL_BASED, PERFECT, predict_clrnet, predict_model_based, predict_perfect
from .sensing import AngleHistory, NoiseModel, calibrate_noise

log = logging.getLogger(__name__)

TRAIN_STREAM = 1
EVAL_STREAM = 2
TRAINER_STREAM = 3

CSV_HEADER = ("nmse", "power_dbm", "method", "mean_sum_rate", "std_sum_rate", "realizations", "seed")


@dataclass(frozen=True)
class EpisodeBatch:
    """Simulated episodes of tau+1 slots; slot tau is the prediction target.

    Arrays are (episodes, K, tau+1) except ``unit_noise`` which is
    (episodes, K, tau): standard-normal sensing draws for slots 0..tau-1.
    """

    angles: np.ndarray
    dists: np.ndarray
    vx: np.ndarray
    unit_noise: np.ndarray

    def __len__(self):
        return self.angles.shape[0]


@lru_cache(maxsize=16)
def _episodes(seed, stream, count, k, tau, mob: MobilityConfig, rsu: RsuLocation, per_vehicle_bias):
    angles = np.empty((count, k, tau + 1))
    dists = np.empty_like(angles)
    vx = np.empty_like(angles)
    noise = np.empty((count, k, tau))
    for i in range(count):
        rng = np.random.default_rng([seed, stream, i])
        traj = simulate_trajectories(k, tau + 1, mob, rsu, rng)
        angles[i], dists[i], vx[i] = traj.true_angles, traj.true_dists, traj.vx
        z = rng.standard_normal((k, tau))
        noise[i] = np.repeat(z[:, :1], tau, axis=1) if per_vehicle_bias else z
    for a in (angles, dists, vx, noise):
        a.flags.writeable = False
    return EpisodeBatch(angles, dists, vx, noise)


def simulate_episodes(cfg: ExperimentConfig, count: int, stream: int) -> EpisodeBatch:
    return _episodes(
        cfg.seed, stream, count, cfg.num_vehicles, cfg.window,
        cfg.mobility(), cfg.rsu(), cfg.per_vehicle_bias,
    )


def noise_model(cfg: ExperimentConfig, rho: float) -> NoiseModel:
    """Calibrate sigma_E on the true angles of the training trajectory corpus."""
    corpus = simulate_episodes(cfg, cfg.train_set_size, TRAIN_STREAM)
    return calibrate_noise(rho, corpus.angles, cfg.per_vehicle_bias)


def noisy_windows(episodes: EpisodeBatch, sigma_e) -> np.ndarray:
    """(episodes, K, tau) inputs with column j = estimate of slot tau-1-j.

    ``sigma_e`` may be a scalar or one value per episode.
    """
    tau = episodes.unit_noise.shape[-1]
    scale = np.reshape(np.asarray(sigma_e, dtype=float), (-1, 1, 1))
    est = episodes.angles[:, :, :tau] + scale * episodes.unit_noise
    return est[:, :, ::-1].copy()


@dataclass(frozen=True)
class TrainingExample:
    input: AngleHistory
    label: np.ndarray


@dataclass(frozen=True)
class Dataset:
    inputs: np.ndarray  # (N, K, tau), most recent slot first
    labels: np.ndarray  # (N, K) true angles at the target slot
    nmse: tuple[float, ...]
    angle_second_moment: float

    def __len__(self):
        return self.labels.shape[0]

    def examples(self):
        tau = self.inputs.shape[-1]
        for x, y in zip(self.inputs, self.labels):
            yield TrainingExample(AngleHistory(x, tau, tau), y)


def generate_dataset(cfg: ExperimentConfig, rho: float | None = None) -> Dataset:
    """``train_set_size`` examples from independent tau+1 slot episodes.

    With ``rho=None`` and ``training_mode == "mixed"`` the NMSE cycles over
    ``nmse_grid`` example by example; otherwise every example uses ``rho``
    (default ``cfg.nmse``).
    """
    episodes = simulate_episodes(cfg, cfg.train_set_size, TRAIN_STREAM)
    moment = calibrate_noise(0.0, episodes.angles).angle_second_moment
    if rho is None and cfg.training_mode == "mixed":
        grid = np.asarray(cfg.nmse_grid, dtype=float)
        rhos = grid[np.arange(len(episodes)) % grid.size]
        nmse = tuple(float(r) for r in grid)
    else:
        rho = cfg.nmse if rho is None else rho
        if rho < 0:
            raise InvalidArgument("nmse must be non-negative")
        rhos = np.full(len(episodes), float(rho))
        nmse = (float(rho),)
    sigma = np.sqrt(rhos * moment)
    return Dataset(noisy_windows(episodes, sigma), episodes.angles[:, :, -1].copy(), nmse, moment)


@dataclass
class TrainResult:
    model: ClrnetModel
    loss_trace: list  # mini-batch loss per iteration, radians^2
    val_trace: list = field(default_factory=list)  # (iteration, validation loss)
    initial_train_loss: float = math.nan
    final_train_loss: float = math.nan
    final_val_loss: float = math.nan

    def val_rmse(self) -> float:
        # J = mean squared error / 2 per vector, so per-angle MSE is 2J/K
        return math.sqrt(2.0 * self.final_val_loss / self.model.arch.num_vehicles)


def _split(n, fraction, rng):
    order = rng.permutation(n)
    n_val = int(round(n * fraction))
    if n_val >= n:
        n_val = n - 1
    return order[n_val:], order[:n_val]


def train(cfg: ExperimentConfig, dataset: Dataset, progress=None) -> TrainResult:
    """Mini-batch Adam on the MSE objective for ``max_iterations`` updates."""
    if len(dataset) == 0:
        raise InvalidArgument("cannot train on an empty dataset")
    dtype = np.dtype(cfg.precision)
    arch = cfg.arch()
    rng = np.random.default_rng([cfg.seed, TRAINER_STREAM])
    train_idx, val_idx = _split(len(dataset), cfg.validation_fraction, rng)
    x_train, y_train = dataset.inputs[train_idx], dataset.labels[train_idx]

    if cfg.standardize:
        norm = Normalization(
            float(x_train.mean()), float(x_train.std()) or 1.0,
            float(y_train.mean()), float(y_train.std()) or 1.0,
        )
    else:
        norm = Normalization()
    xs = norm.encode_inputs(dataset.inputs).astype(dtype)
    ys = norm.encode_labels(dataset.labels).astype(dtype)
    # losses are reported in radians^2 whatever the label scaling
    loss_scale = norm.output_std ** 2

    params = init_params(arch, rng, dtype)
    state = OptimizerState(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon)

    def full_loss(p, idx):
        if idx.size == 0:
            return math.nan
        out, _ = clrnet_forward(xs[idx], p, arch)
        return mse_loss(out, ys[idx]) * loss_scale

    initial = full_loss(params, train_idx)
    trace, val_trace = [], []
    best = (math.inf, params, 0)
    stale = 0
    perm, cursor = rng.permutation(train_idx), 0
    batch = min(cfg.batch_size, train_idx.size)
    for it in range(1, cfg.max_iterations + 1):
        if cursor + batch > perm.size:
            perm, cursor = rng.permutation(train_idx), 0
        idx = perm[cursor : cursor + batch]
        cursor += batch
        out, tape = clrnet_forward(xs[idx], params, arch)
        loss = mse_loss(out, ys[idx]) * loss_scale
        trace.append(loss)
        if not math.isfinite(loss):
            raise TrainingDiverged(f"non-finite loss at iteration {it}", trace)
        try:
            params, state = optimizer_step(params, backward(tape, ys[idx], params, arch), state)
        except TrainingDiverged as exc:
            raise TrainingDiverged(str(exc), trace) from None
        if val_idx.size and (it % cfg.eval_every == 0 or it == cfg.max_iterations):
            val = full_loss(params, val_idx)
            val_trace.append((it, val))
            if progress:
                progress(it, loss, val)
            if val < best[0]:
                best, stale = (val, params, it), 0
            else:
                stale += 1
            if cfg.early_stop_patience and stale >= cfg.early_stop_patience:
                log.info("early stop at iteration %d (best %d)", it, best[2])
                break

    if cfg.early_stop_patience and best[0] < math.inf:
        params = best[1]
    model = ClrnetModel(
        arch, params, norm,
        {
            "seed": cfg.seed,
            "nmse": list(dataset.nmse),
            "angle_second_moment": dataset.angle_second_moment,
            "iterations": len(trace),
            "train_set_size": len(dataset),
            "training_mode": cfg.training_mode,
            "precision": cfg.precision,
            "version": __version__,
        },
    )
    return TrainResult(
        model, trace, val_trace, initial,
        full_loss(params, train_idx), full_loss(params, val_idx),
    )


@dataclass(frozen=True)
class SweepResult:
    nmse: float
    power_dbm: float
    method: str
    mean_sum_rate: float
    std_sum_rate: float
    realizations: int
    seed: int

    @property
    def std_error(self) -> float:
        return self.std_sum_rate / math.sqrt(self.realizations)


def predict_all(cfg: ExperimentConfig, episodes: EpisodeBatch, rho: float, methods, model=None) -> dict:
    """Angles for the target slot, per method, shape (episodes, K)."""
    sigma = noise_model(cfg, rho).sigma_e
    windows = noisy_windows(episodes, sigma)
    tau = cfg.window
    out = {}
    for method in methods:
        if method == PERFECT:
            out[method] = predict_perfect(episodes.angles[:, :, tau]).values
        elif method == MODEL_BASED:
            # true velocity and distance at slot n-1, latest estimate
            out[method] = predict_model_based(
                windows[:, :, 0], episodes.vx[:, :, tau - 1], episodes.dists[:, :, tau - 1], cfg.slot_duration
            ).values
        elif method == CLRNET:
            if model is None:
                raise InvalidArgument("the clrnet method needs a trained model")
            out[method] = predict_clrnet(windows, model).values
        else:
            raise InvalidArgument(f"unknown method {method!r}")
    return out


def evaluate(cfg: ExperimentConfig, rho: float, power_dbm: float, methods=METHODS, model=None,
             predictions=None) -> list[SweepResult]:
    """Mean and standard deviation of the sum-rate over ``cfg.realizations`` episodes.

    Every vehicle gets P/K. Rates are scored against the true slot-n angles
    and distances.
    """
    methods = tuple(methods)
    if (CLRNET in methods) != (model is not None) and predictions is None:
        raise InvalidArgument("supply a model exactly when the clrnet method is requested")
    episodes = simulate_episodes(cfg, cfg.realizations, EVAL_STREAM)
    if predictions is None:
        predictions = predict_all(cfg, episodes, rho, methods, model)
    params = cfg.channel(power_dbm)
    k = cfg.num_vehicles
    truth = episodes.angles[:, :, cfg.window]
    dists = episodes.dists[:, :, cfg.window]
    powers = np.full_like(truth, params.total_power / k)
    results = []
    for method in methods:
        rates = sum_rate(truth, predictions[method], dists, powers, params)
        std = float(np.std(rates, ddof=1)) if rates.size > 1 else 0.0
        results.append(SweepResult(float(rho), float(power_dbm), method, float(np.mean(rates)), std,
                                   int(rates.size), cfg.seed))
    return results


def angle_rmse(cfg: ExperimentConfig, rho: float, methods, model=None) -> dict:
    """Per-method RMSE of predicted versus true target-slot angles on the evaluation episodes."""
    episodes = simulate_episodes(cfg, cfg.realizations, EVAL_STREAM)
    preds = predict_all(cfg, episodes, rho, methods, model)
    truth = episodes.angles[:, :, cfg.window]
    return {m: float(np.sqrt(np.mean((p - truth) ** 2))) for m, p in preds.items()}


def train_for_nmse(cfg: ExperimentConfig, rho: float | None, progress=None) -> TrainResult:
    return train(cfg, generate_dataset(cfg, rho), progress)


def sweep_nmse(cfg: ExperimentConfig, models: dict | None = None, progress=None):
    """Sum-rate versus NMSE at the configured total power.

    ``models`` maps rho -> ClrnetModel; missing entries are trained (one per
    rho, or one shared model in mixed mode). Returns (results, models).
    """
    models = dict(models or {})
    results = []
    shared = None
    for rho in cfg.nmse_grid:
        model = models.get(rho)
        if model is None:
            if cfg.training_mode == "mixed":
                if shared is None:
                    shared = train_for_nmse(cfg, None, progress).model
                model = shared
            else:
                log.info("training CLRNet for nmse=%g", rho)
                model = train_for_nmse(cfg, rho, progress).model
            models[rho] = model
        results.extend(evaluate(cfg, rho, cfg.total_power_dbm, METHODS, model))
    return results, models


def sweep_power(cfg: ExperimentConfig, model: ClrnetModel | None = None, progress=None):
    """Sum-rate versus total power at ``sweep_power_nmse``. Returns (results, model)."""
    rho = cfg.sweep_power_nmse
    if model is None:
        mode_rho = None if cfg.training_mode == "mixed" else rho
        model = train_for_nmse(cfg, mode_rho, progress).model
    episodes = simulate_episodes(cfg, cfg.realizations, EVAL_STREAM)
    preds = predict_all(cfg, episodes, rho, METHODS, model)
    results = []
    for p in cfg.power_grid_dbm:
        results.extend(evaluate(cfg, rho, p, METHODS, model, predictions=preds))
    return results, model


def sort_results(results):
    return sorted(results, key=lambda r: (r.method, r.nmse, r.power_dbm))


def write_csv(results, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in sort_results(results):
            w.writerow([repr(r.nmse), repr(r.power_dbm), r.method, repr(r.mean_sum_rate),
                        repr(r.std_sum_rate), r.realizations, r.seed])
    return path


def read_csv(path) -> list[SweepResult]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [
        SweepResult(float(r["nmse"]), float(r["power_dbm"]), r["method"], float(r["mean_sum_rate"]),
                    float(r["std_sum_rate"]), int(r["realizations"]), int(r["seed"]))
        for r in rows
    ]


def write_manifest(cfg: ExperimentConfig, out_dir, command: str) -> Path:
    path = Path(out_dir) / "manifest.txt"
    lines = [
        f"command = {command}",
        f"seed = {cfg.seed}",
        f"code_version = predbeam {__version__}",
        "",
        cfg.to_text(),
    ]
    path.write_text("\n".join(lines))
    return path


def emit_results(results, out_dir, cfg: ExperimentConfig, name: str = "results.csv") -> list[Path]:
    """Write the results CSV plus the resolved config snapshot next to it."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = write_csv(results, out_dir / name)
    cfg_path = out_dir / "config.txt"
    cfg_path.write_text(cfg.to_text())
    return [csv_path, cfg_path]


def power_for_rate(results, method: str, target: float) -> float:
    """Smallest power (dBm) at which ``method`` reaches ``target``, by linear
    interpolation between grid points; ``inf`` when never reached."""
    rows = sorted((r for r in results if r.method == method), key=lambda r: r.power_dbm)
    for lo, hi in zip(rows, rows[1:]):
        if lo.mean_sum_rate < target <= hi.mean_sum_rate:
            frac = (target - lo.mean_sum_rate) / (hi.mean_sum_rate - lo.mean_sum_rate)
            return lo.power_dbm + frac * (hi.power_dbm - lo.power_dbm)
    if rows and rows[0].mean_sum_rate >= target:
        return rows[0].power_dbm
    return math.inf


def total_power_watts(power_dbm: float) -> float:
    return float(dbm_to_watts(power_dbm))
