"""Angle predictors compared in the sum-rate experiments.

All three map what is known at slot n-1 to beam pointing angles for slot n:

* ``perfect``: the true slot-n angles (upper bound).
* ``model_based``: one-step geometric extrapolation of the latest estimate,
  given the true velocity and distance.
* ``clrnet``: the trained network applied to the tau-slot estimate window.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelParams, beamformer_from_angle
from .errors import DegenerateGeometry, InvalidArgument, ShapeMismatch
from .nn.model import ClrnetModel

PERFECT = "perfect"
MODEL_BASED = "model_based"
CLRNET = "clrnet"
METHODS = (PERFECT, MODEL_BASED, CLRNET)


@dataclass(frozen=True)
class PredictedAngles:
    values: np.ndarray
    method: str

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise InvalidArgument(f"{self.method} produced non-finite angles")


def predict_perfect(truth) -> PredictedAngles:
    return PredictedAngles(np.array(truth, dtype=float), PERFECT)


def predict_model_based(theta_est_prev, v_prev, d_prev, dT: float) -> PredictedAngles:
    """theta_P = arcsin(v dT sin(theta_E) / d) + theta_E, elementwise."""
    theta = np.asarray(theta_est_prev, dtype=float)
    v = np.asarray(v_prev, dtype=float)
    d = np.asarray(d_prev, dtype=float)
    if not np.all(d > 0):
        raise DegenerateGeometry("model-based prediction needs positive distances")
    arg = v * dT * np.sin(theta) / d
    if np.any(np.abs(arg) > 1.0):
        raise DegenerateGeometry("arcsin argument outside [-1, 1] in model-based prediction")
    return PredictedAngles(np.arcsin(arg) + theta, MODEL_BASED)


def predict_clrnet(history, model: ClrnetModel) -> PredictedAngles:
    values = getattr(history, "values", history)
    if np.shape(values)[-2:] != (model.arch.num_vehicles, model.arch.window):
        raise ShapeMismatch(
            f"history {np.shape(values)} does not match model K={model.arch.num_vehicles}, tau={model.arch.window}"
        )
    return PredictedAngles(np.asarray(model.predict(values)), CLRNET)


def beams_from_prediction(pred: PredictedAngles, powers, params: ChannelParams) -> np.ndarray:
    """K x Nt matrix whose row k is sqrt(p_k) a(theta_P[k])."""
    angles = np.asarray(pred.values, dtype=float).reshape(-1)
    powers = np.asarray(powers, dtype=float).reshape(-1)
    if angles.size != powers.size:
        raise InvalidArgument("one power per predicted angle is required")
    return np.stack([beamformer_from_angle(float(t), float(p), params) for t, p in zip(angles, powers)])
