"""Text (JSON) checkpoints for CLRNet weights.

Layout, all keys sorted::

    format         "predbeam-clrnet"
    version        integer, currently 1
    dtype          "float64" or "float32"
    arch           num_vehicles, window, conv_filters, lstm_hidden
    normalization  input_mean, input_std, output_mean, output_std
    metadata       free-form training info (seed, nmse, iterations, ...)
    params         name -> {"shape": [...], "data": [row-major floats]}

Floats are written with repr precision so a load/save cycle is lossless.
"""
from __future__ import annotations

import json
from dataclasses import asdict
from typing import NamedTuple

import numpy as np

from ..errors import CorruptPayload, ShapeMismatch, VersionMismatch
from .clrnet import PARAM_NAMES, ClrnetArch, ClrnetParams
from .model import ClrnetModel, Normalization

FORMAT_NAME = "predbeam-clrnet"
FORMAT_VERSION = 1
_ARCH_KEYS = ("num_vehicles", "window", "conv_filters", "lstm_hidden")


class Checkpoint(NamedTuple):
    params: ClrnetParams
    arch: ClrnetArch
    metadata: dict
    normalization: Normalization


def save_params(params: ClrnetParams, arch: ClrnetArch, metadata=None, normalization=None) -> bytes:
    params.check(arch)
    normalization = normalization or Normalization()
    doc = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "dtype": str(params.fc_w.dtype),
        "arch": {k: getattr(arch, k) for k in _ARCH_KEYS},
        "normalization": asdict(normalization),
        "metadata": metadata or {},
        "params": {
            name: {"shape": list(arr.shape), "data": [float(v) for v in arr.ravel()]}
            for name, arr in params.arrays().items()
        },
    }
    return (json.dumps(doc, sort_keys=True, indent=1) + "\n").encode("utf-8")


def load_params(payload: bytes) -> Checkpoint:
    try:
        doc = json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptPayload(f"checkpoint is not valid JSON text: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_NAME:
        raise CorruptPayload("not a CLRNet checkpoint")
    if doc.get("version") != FORMAT_VERSION:
        raise VersionMismatch(f"checkpoint version {doc.get('version')!r}, expected {FORMAT_VERSION}")
    try:
        dtype = np.dtype(doc["dtype"])
        arch = ClrnetArch(**{k: int(doc["arch"][k]) for k in _ARCH_KEYS})
        normalization = Normalization(**{k: float(v) for k, v in doc["normalization"].items()})
        metadata = dict(doc["metadata"])
        raw = doc["params"]
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptPayload(f"checkpoint is missing or has malformed fields: {exc}") from exc
    if set(raw) != set(PARAM_NAMES):
        raise ShapeMismatch(f"checkpoint parameters {sorted(raw)} do not match {sorted(PARAM_NAMES)}")
    arrays = {}
    for name, expected in arch.param_shapes().items():
        shape = tuple(raw[name]["shape"])
        data = np.asarray(raw[name]["data"], dtype=dtype)
        if shape != expected or data.size != int(np.prod(shape)):
            raise ShapeMismatch(f"{name}: stored shape {shape} / {data.size} values, expected {expected}")
        arrays[name] = data.reshape(shape)
    params = ClrnetParams(**arrays)
    params.check(arch)
    return Checkpoint(params, arch, metadata, normalization)


def save_model(model: ClrnetModel) -> bytes:
    return save_params(model.params, model.arch, model.metadata, model.normalization)


def load_model(payload: bytes) -> ClrnetModel:
    ck = load_params(payload)
    return ClrnetModel(ck.arch, ck.params, ck.normalization, ck.metadata)
