"""Adaptive-moment (Adam) parameter updates."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import TrainingDiverged
from .clrnet import ClrnetParams


@dataclass
class OptimizerState:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    first_moment: dict = field(default_factory=dict)
    second_moment: dict = field(default_factory=dict)


def optimizer_step(params: ClrnetParams, grads: ClrnetParams, state: OptimizerState):
    """Return ``(new_params, new_state)``; inputs are left untouched."""
    g_arrays = grads.arrays()
    for name, g in g_arrays.items():
        if not np.all(np.isfinite(g)):
            raise TrainingDiverged(f"non-finite gradient in {name} at step {state.step + 1}")
    t = state.step + 1
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    new_params, m_out, v_out = {}, {}, {}
    for name, p in params.arrays().items():
        g = g_arrays[name]
        m = state.first_moment.get(name, np.zeros_like(p))
        v = state.second_moment.get(name, np.zeros_like(p))
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * (g * g)
        new_params[name] = p - state.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + state.epsilon)
        m_out[name], v_out[name] = m, v
    new_state = OptimizerState(
        state.learning_rate, state.beta1, state.beta2, state.epsilon, t, m_out, v_out
    )
    return ClrnetParams(**new_params), new_state
