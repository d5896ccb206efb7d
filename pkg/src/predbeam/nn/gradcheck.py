"""Central finite-difference check of the analytic CLRNet gradients."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clrnet import ClrnetArch, ClrnetParams, backward, clrnet_forward, init_params, mse_loss


@dataclass(frozen=True)
class GradCheckResult:
    max_relative_error: float
    per_param: dict  # name -> relative error of the worst draw


def numerical_gradient(params: ClrnetParams, arch: ClrnetArch, inputs, labels, step=1e-6):
    def loss():
        out, _ = clrnet_forward(inputs, params, arch)
        return mse_loss(out, labels)

    grads = {}
    for name, p in params.arrays().items():
        g = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            orig = p[idx]
            p[idx] = orig + step
            up = loss()
            p[idx] = orig - step
            down = loss()
            p[idx] = orig
            g[idx] = (up - down) / (2 * step)
        grads[name] = g
    return grads


def relative_error(a, b) -> float:
    """||a - b|| / (||a|| + ||b||), zero when both vanish."""
    den = np.linalg.norm(a) + np.linalg.norm(b)
    return 0.0 if den == 0 else float(np.linalg.norm(a - b) / den)


def gradient_check(
    n_draws: int = 20,
    arch: ClrnetArch | None = None,
    batch: int = 3,
    step: float = 1e-6,
    seed: int = 0,
) -> GradCheckResult:
    """Compare backprop against central differences on random small nets.

    Each draw samples fresh weights (biases included), inputs and labels.
    The error for a parameter array is the norm-relative error above.
    """
    arch = arch or ClrnetArch(num_vehicles=4, window=2, conv_filters=2)
    rng = np.random.default_rng(seed)
    worst: dict[str, float] = {}
    for _ in range(n_draws):
        params = init_params(arch, rng)
        for name in ("conv_b", "lstm_b", "fc_b"):
            arr = getattr(params, name)
            arr[:] = rng.uniform(-0.5, 0.5, size=arr.shape)
        x = rng.normal(0.5, 1.0, size=(batch, arch.num_vehicles, arch.window))
        y = rng.normal(0.0, 1.0, size=(batch, arch.num_vehicles))
        _, tape = clrnet_forward(x, params, arch)
        analytic = backward(tape, y, params, arch).arrays()
        numeric = numerical_gradient(params, arch, x, y, step)
        for name in analytic:
            err = relative_error(analytic[name], numeric[name])
            worst[name] = max(worst.get(name, 0.0), err)
    return GradCheckResult(max(worst.values()), worst)
