"""Convolutional-LSTM angle predictor with hand-written backpropagation.

Per time step, the K angle estimates of one slot are laid out as a
(K/2) x 2 map (row-major over vehicle index, zero-padded when K is odd),
passed through F valid 2x2 filters + ReLU, flattened filter-major, and fed
to a single LSTM cell. The last hidden state goes through a linear layer
with K outputs. The window is fed oldest slot first.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from ..errors import InvalidArgument, ShapeMismatch
from ..sensing import AngleHistory

PARAM_NAMES = ("conv_w", "conv_b", "lstm_w", "lstm_u", "lstm_b", "fc_w", "fc_b")


@dataclass(frozen=True)
class ClrnetArch:
    num_vehicles: int = 8
    window: int = 6
    conv_filters: int = 4
    lstm_hidden: int = 8
    conv_kernel: tuple[int, int] = field(default=(2, 2), init=False)

    def __post_init__(self):
        if self.num_vehicles < 3:
            raise InvalidArgument("need K >= 3 for a 2x2 valid convolution")
        if self.window < 1 or self.conv_filters < 1 or self.lstm_hidden < 1:
            raise InvalidArgument("window, conv_filters and lstm_hidden must be positive")

    @property
    def padded_vehicles(self) -> int:
        return self.num_vehicles + self.num_vehicles % 2

    @property
    def map_rows(self) -> int:
        return self.padded_vehicles // 2

    @property
    def conv_out_rows(self) -> int:
        return self.map_rows - 1

    @property
    def feature_dim(self) -> int:
        return self.conv_filters * self.conv_out_rows

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        f, h, d, k = self.conv_filters, self.lstm_hidden, self.feature_dim, self.num_vehicles
        return {
            "conv_w": (f, 2, 2),
            "conv_b": (f,),
            "lstm_w": (4 * h, d),
            "lstm_u": (4 * h, h),
            "lstm_b": (4 * h,),
            "fc_w": (k, h),
            "fc_b": (k,),
        }


@dataclass
class ClrnetParams:
    """Trainable weights. LSTM gate blocks are stacked as [input, forget, cell, output]."""

    conv_w: np.ndarray
    conv_b: np.ndarray
    lstm_w: np.ndarray
    lstm_u: np.ndarray
    lstm_b: np.ndarray
    fc_w: np.ndarray
    fc_b: np.ndarray

    def arrays(self) -> dict[str, np.ndarray]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def copy(self) -> "ClrnetParams":
        return ClrnetParams(**{k: v.copy() for k, v in self.arrays().items()})

    def astype(self, dtype) -> "ClrnetParams":
        return ClrnetParams(**{k: v.astype(dtype) for k, v in self.arrays().items()})

    def check(self, arch: ClrnetArch) -> None:
        for name, shape in arch.param_shapes().items():
            got = getattr(self, name).shape
            if got != shape:
                raise ShapeMismatch(f"{name} has shape {got}, architecture needs {shape}")
            if not np.all(np.isfinite(getattr(self, name))):
                raise InvalidArgument(f"{name} contains non-finite values")

    @classmethod
    def zeros(cls, arch: ClrnetArch, dtype=np.float64) -> "ClrnetParams":
        return cls(**{k: np.zeros(s, dtype=dtype) for k, s in arch.param_shapes().items()})


def init_params(arch: ClrnetArch, rng: np.random.Generator, dtype=np.float64) -> ClrnetParams:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and zero biases."""
    fan_in = {
        "conv_w": 4,
        "lstm_w": arch.feature_dim,
        "lstm_u": arch.lstm_hidden,
        "fc_w": arch.lstm_hidden,
    }
    out = {}
    for name, shape in arch.param_shapes().items():
        if name in fan_in:
            bound = 1.0 / np.sqrt(fan_in[name])
            out[name] = rng.uniform(-bound, bound, size=shape).astype(dtype)
        else:
            out[name] = np.zeros(shape, dtype=dtype)
    return ClrnetParams(**out)


@dataclass
class ForwardTape:
    """Activations cached by :func:`clrnet_forward` for :func:`backward`.

    Time-indexed lists run in feed order (oldest slot first).
    """

    windows: np.ndarray  # (B, tau, R-1, 2, 2) conv input patches
    conv_pre: np.ndarray  # (B, tau, F, R-1) pre-ReLU
    features: np.ndarray  # (B, tau, D)
    gates: list  # per step: (i, f, g, o), each (B, H)
    cells: list  # c_0 .. c_tau, each (B, H)
    hiddens: list  # h_0 .. h_tau
    output: np.ndarray  # (B, K)
    batched: bool


def _sigmoid(z):
    # split form avoids overflow in exp for large |z|
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _slot_windows(x, arch: ClrnetArch):
    """(..., K) -> (..., R-1, 2, 2) stack of 2x2 patches of the reshaped map."""
    if x.shape[-1] != arch.num_vehicles:
        raise ShapeMismatch(f"slot input has {x.shape[-1]} entries, expected {arch.num_vehicles}")
    if arch.padded_vehicles != arch.num_vehicles:
        pad = [(0, 0)] * (x.ndim - 1) + [(0, 1)]
        x = np.pad(x, pad)
    grid = x.reshape(x.shape[:-1] + (arch.map_rows, 2))
    return np.stack([grid[..., i : i + 2, :] for i in range(arch.conv_out_rows)], axis=-3)


def _conv(windows, params):
    # (..., R-1, 2, 2) x (F, 2, 2) -> (..., F, R-1)
    pre = np.einsum("...irc,frc->...fi", windows, params.conv_w)
    return pre + params.conv_b[:, None]


def conv_forward(slot_input, params: ClrnetParams, arch: ClrnetArch) -> np.ndarray:
    """Conv + ReLU + flatten for one slot vector (or a batch, leading axes)."""
    x = np.asarray(slot_input, dtype=params.conv_w.dtype)
    pre = _conv(_slot_windows(x, arch), params)
    return np.maximum(pre, 0.0).reshape(pre.shape[:-2] + (arch.feature_dim,))


def _lstm_gates(features, prev_hidden, params):
    h = params.lstm_u.shape[1]
    z = features @ params.lstm_w.T + prev_hidden @ params.lstm_u.T + params.lstm_b
    i = _sigmoid(z[..., :h])
    f = _sigmoid(z[..., h : 2 * h])
    g = np.tanh(z[..., 2 * h : 3 * h])
    o = _sigmoid(z[..., 3 * h :])
    return i, f, g, o


def lstm_step(features, prev_hidden, prev_cell, params: ClrnetParams):
    """One LSTM cell update; returns (hidden, cell)."""
    features = np.asarray(features, dtype=params.lstm_w.dtype)
    if features.shape[-1] != params.lstm_w.shape[1]:
        raise ShapeMismatch("feature length does not match the LSTM input weights")
    if np.shape(prev_hidden)[-1] != params.lstm_u.shape[1] or np.shape(prev_cell) != np.shape(prev_hidden):
        raise ShapeMismatch("hidden/cell state size does not match the LSTM")
    i, f, g, o = _lstm_gates(features, prev_hidden, params)
    cell = f * prev_cell + i * g
    return o * np.tanh(cell), cell


def _as_batch(history, arch: ClrnetArch, dtype):
    values = history.values if isinstance(history, AngleHistory) else history
    x = np.asarray(values, dtype=dtype)
    batched = x.ndim == 3
    if x.ndim == 2:
        x = x[None]
    if x.ndim != 3 or x.shape[1:] != (arch.num_vehicles, arch.window):
        raise ShapeMismatch(
            f"history shape {np.shape(values)} does not match K={arch.num_vehicles}, tau={arch.window}"
        )
    return x, batched


def clrnet_forward(history, params: ClrnetParams, arch: ClrnetArch):
    """Predict next-slot angles from a K x tau window (or a B x K x tau batch).

    Returns ``(prediction, tape)``; prediction has shape (K,) or (B, K).
    """
    x, batched = _as_batch(history, arch, params.fc_w.dtype)
    b = x.shape[0]
    # column tau-1 is the oldest slot and is fed first
    seq = x[:, :, ::-1].transpose(0, 2, 1)  # (B, tau, K)
    windows = _slot_windows(seq, arch)
    conv_pre = _conv(windows, params)
    features = np.maximum(conv_pre, 0.0).reshape(b, arch.window, arch.feature_dim)

    h = np.zeros((b, arch.lstm_hidden), dtype=x.dtype)
    c = np.zeros_like(h)
    hiddens, cells, gates = [h], [c], []
    for t in range(arch.window):
        i, f, g, o = _lstm_gates(features[:, t], h, params)
        c = f * c + i * g
        h = o * np.tanh(c)
        gates.append((i, f, g, o))
        cells.append(c)
        hiddens.append(h)
    out = h @ params.fc_w.T + params.fc_b
    tape = ForwardTape(windows, conv_pre, features, gates, cells, hiddens, out, batched)
    return (out if batched else out[0]), tape


def mse_loss(predictions, labels) -> float:
    """(1 / 2N) * sum_i ||label_i - prediction_i||^2 over a batch of N vectors."""
    p = np.atleast_2d(np.asarray(predictions, dtype=float))
    y = np.atleast_2d(np.asarray(labels, dtype=float))
    if p.shape != y.shape:
        raise ShapeMismatch(f"predictions {p.shape} vs labels {y.shape}")
    return float(np.sum((p - y) ** 2) / (2 * p.shape[0]))


def backward(tape: ForwardTape, labels, params: ClrnetParams, arch: ClrnetArch) -> ClrnetParams:
    """Exact gradient of :func:`mse_loss` over the taped batch (BPTT)."""
    y = np.asarray(labels, dtype=tape.output.dtype)
    if y.ndim == 1:
        y = y[None]
    if y.shape != tape.output.shape:
        raise ShapeMismatch(f"labels {y.shape} do not match taped output {tape.output.shape}")
    if len(tape.gates) != arch.window or tape.hiddens[-1].shape[1] != params.fc_w.shape[1]:
        raise ShapeMismatch("tape was not produced with these parameters/architecture")
    n = y.shape[0]
    hdim = arch.lstm_hidden
    grads = ClrnetParams.zeros(arch, dtype=tape.output.dtype)

    d_out = (tape.output - y) / n
    grads.fc_w[:] = d_out.T @ tape.hiddens[-1]
    grads.fc_b[:] = d_out.sum(axis=0)
    dh = d_out @ params.fc_w
    dc = np.zeros_like(dh)
    d_features = np.empty_like(tape.features)

    for t in reversed(range(arch.window)):
        i, f, g, o = tape.gates[t]
        c, c_prev, h_prev = tape.cells[t + 1], tape.cells[t], tape.hiddens[t]
        tanh_c = np.tanh(c)
        dc = dc + dh * o * (1.0 - tanh_c * tanh_c)
        dz = np.empty((n, 4 * hdim), dtype=dh.dtype)
        dz[:, :hdim] = dc * g * i * (1.0 - i)
        dz[:, hdim : 2 * hdim] = dc * c_prev * f * (1.0 - f)
        dz[:, 2 * hdim : 3 * hdim] = dc * i * (1.0 - g * g)
        dz[:, 3 * hdim :] = dh * tanh_c * o * (1.0 - o)
        grads.lstm_w += dz.T @ tape.features[:, t]
        grads.lstm_u += dz.T @ h_prev
        grads.lstm_b += dz.sum(axis=0)
        d_features[:, t] = dz @ params.lstm_w
        dh = dz @ params.lstm_u
        dc = dc * f

    d_pre = d_features.reshape(tape.conv_pre.shape) * (tape.conv_pre > 0)
    grads.conv_w[:] = np.einsum("btfi,btirc->frc", d_pre, tape.windows)
    grads.conv_b[:] = d_pre.sum(axis=(0, 1, 3))
    return grads
