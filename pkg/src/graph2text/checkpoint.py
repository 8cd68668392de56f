"""Flat binary weight checkpoints with a JSON header; save/load is bit-exact."""

from __future__ import annotations

import json
import struct

import numpy as np

from .autodiff import Tensor

_MAGIC = b"G2TCKPT1\n"


def save_checkpoint(path, params: dict, meta: dict | None = None) -> None:
    """Write named arrays (or Tensors) plus an optional metadata dict."""
    entries = []
    payload = bytearray()
    for name in sorted(params):
        value = params[name]
        array = value.data if isinstance(value, Tensor) else np.asarray(value)
        raw = np.ascontiguousarray(array).tobytes()
        entries.append({
            "name": name,
            "shape": list(array.shape),
            "dtype": array.dtype.str,
            "offset": len(payload),
            "nbytes": len(raw),
        })
        payload.extend(raw)
    header = json.dumps({"meta": meta or {}, "entries": entries}, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        fh.write(bytes(payload))


def load_checkpoint(path) -> tuple[dict, dict]:
    """Read back (name -> ndarray, meta)."""
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a checkpoint file")
        (header_len,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(header_len).decode("utf-8"))
        payload = fh.read()
    params = {}
    for entry in header["entries"]:
        start = entry["offset"]
        raw = payload[start:start + entry["nbytes"]]
        array = np.frombuffer(raw, dtype=np.dtype(entry["dtype"])).reshape(entry["shape"])
        params[entry["name"]] = array.copy()
    return params, header["meta"]
