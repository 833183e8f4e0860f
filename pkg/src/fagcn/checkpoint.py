"""Self-describing binary checkpoint container.

Layout (all integers little-endian):

    bytes 0..10   magic b"FAGCNCKPT1\\n"
    bytes 11..18  uint64 header length H
    next H bytes  UTF-8 JSON header: {"kind": "model"|"baseline",
                  "config": {...}, "tensors": [{"name", "rows", "cols"}...]}
    remainder     float64 little-endian row-major data for each tensor,
                  concatenated in header order

The header JSON is serialized with sorted keys and no whitespace, so a
checkpoint's bytes are a pure function of its contents.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .attention import AttentionParams
from .errors import DataError
from .lstm import LstmDirectionParams
from .model import BaselineParams, ModelParams
from .tensor import Tensor
from .util import atomic_write_bytes

MAGIC = b"FAGCNCKPT1\n"

_LSTM_FIELDS = ("w_forget", "w_input", "w_cell", "w_output",
                "b_forget", "b_input", "b_cell", "b_output")


def save_checkpoint(path, config: dict, params: ModelParams | BaselineParams) -> None:
    """Serialize parameters plus the config that produced them."""
    kind = "baseline" if isinstance(params, BaselineParams) else "model"
    named = params.named_parameters()
    header = {
        "kind": kind,
        "config": config,
        "tensors": [{"name": name, "rows": t.rows, "cols": t.cols} for name, t in named],
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [MAGIC, struct.pack("<Q", len(blob)), blob]
    parts += [np.ascontiguousarray(t.data, dtype="<f8").tobytes() for _, t in named]
    atomic_write_bytes(path, b"".join(parts))


def _read_arrays(raw: bytes, path) -> tuple[dict, dict[str, np.ndarray]]:
    if not raw.startswith(MAGIC):
        raise DataError(f"{path}: not a checkpoint file (bad magic)")
    offset = len(MAGIC)
    if len(raw) < offset + 8:
        raise DataError(f"{path}: truncated checkpoint header")
    (header_len,) = struct.unpack_from("<Q", raw, offset)
    offset += 8
    if len(raw) < offset + header_len:
        raise DataError(f"{path}: truncated checkpoint header")
    try:
        header = json.loads(raw[offset:offset + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: corrupt checkpoint header: {exc}") from None
    offset += header_len
    for key in ("kind", "config", "tensors"):
        if key not in header:
            raise DataError(f"{path}: checkpoint header missing {key!r}")
    arrays: dict[str, np.ndarray] = {}
    for entry in header["tensors"]:
        rows, cols = int(entry["rows"]), int(entry["cols"])
        nbytes = rows * cols * 8
        if len(raw) < offset + nbytes:
            raise DataError(f"{path}: checkpoint data truncated at tensor {entry['name']!r}")
        flat = np.frombuffer(raw, dtype="<f8", count=rows * cols, offset=offset)
        arrays[entry["name"]] = flat.reshape(rows, cols).astype(np.float64)
        offset += nbytes
    if offset != len(raw):
        raise DataError(f"{path}: {len(raw) - offset} trailing bytes after tensor data")
    return header, arrays


def _take(arrays: dict[str, np.ndarray], name: str, path) -> Tensor:
    try:
        return Tensor(arrays.pop(name))
    except KeyError:
        raise DataError(f"{path}: checkpoint is missing tensor {name!r}") from None


def _lstm_from(arrays: dict[str, np.ndarray], prefix: str, path) -> LstmDirectionParams:
    return LstmDirectionParams(
        **{field: _take(arrays, f"{prefix}.{field}", path) for field in _LSTM_FIELDS})


def load_checkpoint(path) -> tuple[dict, ModelParams | BaselineParams]:
    """Read a checkpoint back into parameters and its stored config."""
    with open(path, "rb") as fh:
        raw = fh.read()
    header, arrays = _read_arrays(raw, path)
    config = header["config"]
    kind = header["kind"]
    if kind == "baseline":
        params: ModelParams | BaselineParams = BaselineParams(
            conv1_weight=_take(arrays, "baseline.conv1_weight", path),
            conv2_weight=_take(arrays, "baseline.conv2_weight", path))
    elif kind == "model":
        variant = config.get("variant")
        if variant == "self":
            att = AttentionParams("self", score_vector=_take(arrays, "attention.score_vector", path))
        elif variant == "context":
            att = AttentionParams("context", bilinear=_take(arrays, "attention.bilinear", path))
        elif variant == "none":
            att = AttentionParams("none")
        else:
            raise DataError(f"{path}: checkpoint config has invalid variant {variant!r}")
        params = ModelParams(
            embeddings=_take(arrays, "embeddings", path),
            lstm_fwd=_lstm_from(arrays, "lstm_fwd", path),
            lstm_bwd=_lstm_from(arrays, "lstm_bwd", path),
            attention=att,
            conv1_weight=_take(arrays, "conv1_weight", path),
            conv2_weight=_take(arrays, "conv2_weight", path))
    else:
        raise DataError(f"{path}: unknown checkpoint kind {kind!r}")
    if arrays:
        raise DataError(f"{path}: unexpected tensors in checkpoint: {sorted(arrays)}")
    return config, params
