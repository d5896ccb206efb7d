"""A trained CLRNet bundled with its input/output standardisation."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .clrnet import ClrnetArch, ClrnetParams, clrnet_forward


@dataclass(frozen=True)
class Normalization:
    """Affine maps applied around the network: x' = (x - m) / s, y = m + s * y'.

    The identity (zeros and ones) feeds raw radians.
    """

    input_mean: float = 0.0
    input_std: float = 1.0
    output_mean: float = 0.0
    output_std: float = 1.0

    @property
    def is_identity(self) -> bool:
        return (self.input_mean, self.input_std, self.output_mean, self.output_std) == (0.0, 1.0, 0.0, 1.0)

    def encode_inputs(self, x):
        return x if self.is_identity else (x - self.input_mean) / self.input_std

    def encode_labels(self, y):
        return y if self.is_identity else (y - self.output_mean) / self.output_std

    def decode_outputs(self, y):
        return y if self.is_identity else self.output_mean + self.output_std * y


@dataclass
class ClrnetModel:
    arch: ClrnetArch
    params: ClrnetParams
    normalization: Normalization = field(default_factory=Normalization)
    metadata: dict = field(default_factory=dict)

    def predict(self, history) -> np.ndarray:
        values = getattr(history, "values", history)
        out, _ = clrnet_forward(self.normalization.encode_inputs(np.asarray(values, dtype=float)), self.params, self.arch)
        return self.normalization.decode_outputs(out)
