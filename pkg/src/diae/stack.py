"""Greedy multi-layer training, forward encoding and model persistence.

Layers are trained one at a time: layer 0 on the raw data, each subsequent
layer on the deterministic encoding of its predecessor's output; there is no
joint pass afterwards.  The same one-hot label matrix is reused as the
supervision target at every depth.

Model files are a fixed binary format (see :func:`save_model`): magic
``DIAE``, a format version byte, the layer count, per-layer activation tag
and matrix payloads (dims as 32-bit little-endian unsigned, entries as
row-major little-endian float64), then length-prefixed UTF-8 metadata
key/value pairs.  Round-trips are bit-exact and platform independent.
"""

from __future__ import annotations

import hashlib
import os
import struct
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .activations import Activation
from .layer import (
    AdmmState,
    LayerWeights,
    TrainConfig,
    encode,
    layer_config_for,
    train_layer,
)
from .validation import DimensionMismatchError, as_matrix

__all__ = [
    "StackModel",
    "ModelFormatError",
    "train_stack",
    "encode_stack",
    "save_model",
    "load_model",
    "dataset_fingerprint",
]

MAGIC = b"DIAE"
FORMAT_VERSION = 1

_ACTIVATION_TAGS = {"identity": 0, "tanh": 1}
_TAG_ACTIVATIONS = {v: k for k, v in _ACTIVATION_TAGS.items()}


class ModelFormatError(ValueError):
    """Raised when a model file is malformed or truncated."""


@dataclass
class StackModel:
    """Ordered layers of a greedy stack plus training metadata."""

    layers: list[LayerWeights]
    widths: list[int]
    meta: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.layers:
            raise ValueError("a stack needs at least one layer")
        if [w.n_hidden for w in self.layers] != list(self.widths):
            raise DimensionMismatchError("widths do not match layer hidden sizes")
        for k in range(1, len(self.layers)):
            if self.layers[k].n_features != self.layers[k - 1].n_hidden:
                raise DimensionMismatchError(
                    f"layer {k} expects {self.layers[k].n_features} inputs but "
                    f"layer {k - 1} produces {self.layers[k - 1].n_hidden}"
                )

    @property
    def n_features(self) -> int:
        return self.layers[0].n_features

    @property
    def n_components(self) -> int:
        return self.layers[-1].n_hidden


def dataset_fingerprint(data: np.ndarray, labels=None) -> str:
    """Short stable hash of a dataset, recorded in model metadata."""
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(data, dtype=np.float64).tobytes())
    if labels is not None:
        h.update(np.ascontiguousarray(labels, dtype=np.int64).tobytes())
    return h.hexdigest()[:16]


def _check_widths(widths, n_features: int) -> list[int]:
    widths = [int(w) for w in widths]
    if not widths:
        raise ValueError("widths must be non-empty")
    if widths[0] >= n_features:
        raise ValueError(
            f"first width {widths[0]} must be smaller than the input dimension {n_features}"
        )
    for a, b in zip(widths, widths[1:]):
        if b >= a:
            raise ValueError(f"widths must be strictly decreasing, got {widths}")
    if min(widths) < 1:
        raise ValueError("widths must be positive")
    return widths


def train_stack(data, labels, widths, configs, state_callback=None) -> StackModel:
    """Greedily train a stack of layers.

    ``configs`` is either a single :class:`TrainConfig` (replicated per layer
    with the seed offset by the layer index) or a sequence with one config
    per layer.  Returns the trained model; per-layer final losses and the
    configuration that produced each layer are recorded in ``meta``.  When
    given, ``state_callback(layer_index, state)`` receives each layer's
    training state as it completes (used e.g. to write trace files).
    """
    X = as_matrix(data, "data")
    L = as_matrix(labels, "labels")
    widths = _check_widths(widths, X.shape[0])

    if isinstance(configs, TrainConfig):
        layer_cfgs = [layer_config_for(configs, k) for k in range(len(widths))]
    else:
        layer_cfgs = list(configs)
        if len(layer_cfgs) != len(widths):
            raise ValueError(
                f"got {len(layer_cfgs)} configs for {len(widths)} layers"
            )

    meta: dict[str, str] = {
        "format": "diae-stack",
        "n_features": str(X.shape[0]),
        "n_samples": str(X.shape[1]),
        "n_classes": str(L.shape[0]),
        "widths": ",".join(str(w) for w in widths),
        "dataset_fingerprint": dataset_fingerprint(X, None),
    }

    layers: list[LayerWeights] = []
    current = X
    for k, (h, cfg) in enumerate(zip(widths, layer_cfgs)):
        weights, state = train_layer(current, L, h, cfg)
        layers.append(weights)
        current = encode(weights, current)
        _record_layer_meta(meta, k, cfg, state)
        if state_callback is not None:
            state_callback(k, state)
    return StackModel(layers=layers, widths=widths, meta=meta)


def _record_layer_meta(meta: dict[str, str], k: int, cfg: TrainConfig,
                       state: AdmmState) -> None:
    prefix = f"layer{k}."
    meta[prefix + "lam"] = repr(cfg.lam)
    meta[prefix + "mu"] = repr(cfg.mu)
    meta[prefix + "max_iter"] = str(cfg.max_iter)
    meta[prefix + "tol"] = repr(cfg.tol)
    meta[prefix + "damping"] = repr(cfg.damping)
    meta[prefix + "seed"] = str(cfg.seed)
    meta[prefix + "bregman_rule"] = cfg.bregman_rule
    meta[prefix + "activation"] = cfg.activation
    meta[prefix + "n_iter"] = str(state.n_iter)
    if state.trace:
        last = state.trace[-1]
        meta[prefix + "final_recon_loss"] = repr(last.recon_loss)
        meta[prefix + "final_disc_loss"] = repr(last.disc_loss)
        meta[prefix + "final_constraint_residual"] = repr(last.constraint_residual)
        meta[prefix + "final_objective"] = repr(last.objective)
    if len(state.trace) >= 2:
        prev, last = state.trace[-2].objective, state.trace[-1].objective
        rel = abs(last - prev) / max(prev, 1e-12)
        meta[prefix + "final_rel_change"] = repr(rel)
    else:
        meta[prefix + "final_rel_change"] = "nan"


def encode_stack(model: StackModel, data) -> np.ndarray:
    """Apply every layer's deterministic encoding in order.

    Accepts an empty batch (zero columns) and returns an empty matrix with
    the top layer's row count.
    """
    current = as_matrix(data, "data", allow_empty_cols=True)
    if current.shape[0] != model.n_features:
        raise DimensionMismatchError(
            f"data has {current.shape[0]} rows but model expects {model.n_features}"
        )
    for weights in model.layers:
        current = encode(weights, current)
    return current


# ---------------------------------------------------------------------------
# Persistence


def _atomic_write(path: str, payload: bytes) -> None:
    """Write to a temp file in the target directory, then rename into place."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _pack_matrix(m: np.ndarray) -> bytes:
    rows, cols = m.shape
    return struct.pack("<II", rows, cols) + np.ascontiguousarray(m, dtype="<f8").tobytes()


def serialize_model(model: StackModel) -> bytes:
    out = [MAGIC, struct.pack("<BI", FORMAT_VERSION, len(model.layers))]
    for w in model.layers:
        out.append(struct.pack("<Bd", _ACTIVATION_TAGS[w.activation.kind],
                               w.activation.clamp))
        out.append(_pack_matrix(w.encoder))
        out.append(_pack_matrix(w.decoder))
        out.append(_pack_matrix(w.class_map))
    items = sorted(model.meta.items())
    out.append(struct.pack("<I", len(items)))
    for key, value in items:
        kb = key.encode("utf-8")
        vb = str(value).encode("utf-8")
        out.append(struct.pack("<I", len(kb)) + kb + struct.pack("<I", len(vb)) + vb)
    return b"".join(out)


def save_model(model: StackModel, path) -> None:
    """Serialize and atomically write a model file."""
    _atomic_write(str(path), serialize_model(model))


class _Reader:
    def __init__(self, payload: bytes):
        self.payload = payload
        self.offset = 0

    def take(self, n: int) -> bytes:
        if self.offset + n > len(self.payload):
            raise ModelFormatError(
                f"model file truncated: wanted {n} bytes at offset {self.offset}, "
                f"only {len(self.payload) - self.offset} remain"
            )
        chunk = self.payload[self.offset:self.offset + n]
        self.offset += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def matrix(self) -> np.ndarray:
        rows, cols = self.unpack("<II")
        if rows < 1 or cols < 1:
            raise ModelFormatError(f"invalid matrix header {rows}x{cols}")
        raw = self.take(rows * cols * 8)
        return np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(rows, cols)


def deserialize_model(payload: bytes) -> StackModel:
    reader = _Reader(payload)
    if reader.take(len(MAGIC)) != MAGIC:
        raise ModelFormatError("not a model file: bad magic bytes")
    version, n_layers = reader.unpack("<BI")
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format version {version}")
    if n_layers < 1:
        raise ModelFormatError("model file declares zero layers")
    layers = []
    for _ in range(n_layers):
        tag, clamp = reader.unpack("<Bd")
        if tag not in _TAG_ACTIVATIONS:
            raise ModelFormatError(f"unknown activation tag {tag}")
        activation = Activation(kind=_TAG_ACTIVATIONS[tag], clamp=clamp)
        encoder = reader.matrix()
        decoder = reader.matrix()
        class_map = reader.matrix()
        layers.append(LayerWeights(encoder, decoder, class_map, activation))
    (n_pairs,) = reader.unpack("<I")
    meta: dict[str, str] = {}
    for _ in range(n_pairs):
        (klen,) = reader.unpack("<I")
        key = reader.take(klen).decode("utf-8")
        (vlen,) = reader.unpack("<I")
        meta[key] = reader.take(vlen).decode("utf-8")
    if reader.offset != len(payload):
        raise ModelFormatError(
            f"{len(payload) - reader.offset} trailing bytes after model payload"
        )
    widths = [w.n_hidden for w in layers]
    return StackModel(layers=layers, widths=widths, meta=meta)


def load_model(path) -> StackModel:
    """Read and validate a model file written by :func:`save_model`."""
    with open(path, "rb") as f:
        payload = f.read()
    return deserialize_model(payload)
