"""Checkpoint format: magic "DATSE1", a length-prefixed JSON metadata block
(dims, gate order, named array shapes, format version), then the raw
little-endian float32 array data concatenated in declared order."""

import json
import struct

import numpy as np

from ..errors import CheckpointError
from .layers import GATE_ORDER, DenseLayer, LstmLayer
from .model import ModelParams, ModelSize
from .tensor import Tensor

MAGIC = b"DATSE1"
FORMAT_VERSION = 1

# (name, kind) in serialization order; kind drives reconstruction
_LAYOUT = [
    ("encoder_fwd", "lstm"),
    ("encoder_bwd", "lstm"),
    ("decoder_fwd", "lstm"),
    ("decoder_bwd", "lstm"),
    ("decoder_proj", "dense"),
    ("disc_lstm", "lstm"),
    ("disc_proj", "dense"),
]


def _named_arrays(model: ModelParams):
    out = []
    for name, kind in _LAYOUT:
        layer = getattr(model, name)
        if kind == "lstm":
            out += [(f"{name}.w", layer.w.values), (f"{name}.u", layer.u.values), (f"{name}.b", layer.b.values)]
        else:
            out += [(f"{name}.w", layer.w.values), (f"{name}.b", layer.b.values)]
    out += [("feature_mean", model.feature_mean), ("feature_std", model.feature_std)]
    return out


def save_checkpoint(model: ModelParams, path):
    arrays = _named_arrays(model)
    meta = {
        "format_version": FORMAT_VERSION,
        "gate_order": GATE_ORDER,
        "dims": {
            "feature_dim": model.size.feature_dim,
            "enc_hidden": model.size.enc_hidden,
            "dec_hidden": model.size.dec_hidden,
            "disc_hidden": model.size.disc_hidden,
            "num_classes": model.size.num_classes,
        },
        "directions": {name: getattr(model, name).direction for name, kind in _LAYOUT if kind == "lstm"},
        "arrays": [{"name": n, "shape": list(a.shape)} for n, a in arrays],
    }
    blob = json.dumps(meta, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        for _, a in arrays:
            f.write(np.ascontiguousarray(a, dtype="<f4").tobytes())


def load_checkpoint(path) -> ModelParams:
    try:
        with open(path, "rb") as f:
            data = f.read()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if len(data) < len(MAGIC) + 4 or data[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: not a DATSE checkpoint (bad magic)")
    (meta_len,) = struct.unpack_from("<I", data, len(MAGIC))
    meta_start = len(MAGIC) + 4
    if len(data) < meta_start + meta_len:
        raise CheckpointError(f"{path}: truncated metadata block")
    try:
        meta = json.loads(data[meta_start : meta_start + meta_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt metadata ({exc})") from exc
    if meta.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(
            f"{path}: unsupported format version {meta.get('format_version')!r}"
        )
    if meta.get("gate_order") != GATE_ORDER:
        raise CheckpointError(f"{path}: unknown gate order {meta.get('gate_order')!r}")

    dims = meta["dims"]
    size = ModelSize(
        feature_dim=dims["feature_dim"],
        enc_hidden=dims["enc_hidden"],
        dec_hidden=dims["dec_hidden"],
        disc_hidden=dims["disc_hidden"],
        num_classes=dims["num_classes"],
    )
    offset = meta_start + meta_len
    values = {}
    for spec in meta["arrays"]:
        shape = tuple(spec["shape"])
        count = int(np.prod(shape)) if shape else 1
        end = offset + 4 * count
        if end > len(data):
            raise CheckpointError(f"{path}: truncated array data at {spec['name']}")
        arr = np.frombuffer(data[offset:end], dtype="<f4").reshape(shape).copy()
        values[spec["name"]] = arr
        offset = end
    if offset != len(data):
        raise CheckpointError(f"{path}: {len(data) - offset} trailing bytes")

    def lstm(name, input_dim, hidden_dim):
        try:
            w, u, b = values[f"{name}.w"], values[f"{name}.u"], values[f"{name}.b"]
        except KeyError as exc:
            raise CheckpointError(f"{path}: missing array {exc}") from exc
        if w.shape != (4 * hidden_dim, input_dim) or u.shape != (4 * hidden_dim, hidden_dim):
            raise CheckpointError(f"{path}: {name} shapes disagree with declared dims")
        return LstmLayer(
            input_dim, hidden_dim,
            Tensor(w, requires_grad=True), Tensor(u, requires_grad=True),
            Tensor(b, requires_grad=True),
            meta["directions"][name],
        )

    def dense(name, input_dim, output_dim):
        try:
            w, b = values[f"{name}.w"], values[f"{name}.b"]
        except KeyError as exc:
            raise CheckpointError(f"{path}: missing array {exc}") from exc
        if w.shape != (output_dim, input_dim):
            raise CheckpointError(f"{path}: {name} shapes disagree with declared dims")
        return DenseLayer(input_dim, output_dim, Tensor(w, requires_grad=True), Tensor(b, requires_grad=True))

    enc_out = 2 * size.enc_hidden
    return ModelParams(
        size=size,
        encoder_fwd=lstm("encoder_fwd", size.feature_dim, size.enc_hidden),
        encoder_bwd=lstm("encoder_bwd", size.feature_dim, size.enc_hidden),
        decoder_fwd=lstm("decoder_fwd", enc_out, size.dec_hidden),
        decoder_bwd=lstm("decoder_bwd", enc_out, size.dec_hidden),
        decoder_proj=dense("decoder_proj", 2 * size.dec_hidden, size.feature_dim),
        disc_lstm=lstm("disc_lstm", enc_out, size.disc_hidden),
        disc_proj=dense("disc_proj", size.disc_hidden, size.num_classes),
        feature_mean=values["feature_mean"],
        feature_std=values["feature_std"],
    )
