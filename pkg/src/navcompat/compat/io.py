"""Binary model files.

Layout (little-endian)::

    b"ITCM" | u32 version | u32 n | n bytes JSON metadata
    then per tensor: u32 n | n bytes UTF-8 name | u32 rank | rank * u32 dims | float32 values

Values are stored as float32, so a loaded model equals the saved one rounded
to single precision.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .model import CompatModel, ModelConfig

MAGIC = b"ITCM"
FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    pass


def _u32(n: int) -> bytes:
    return struct.pack("<I", n)


def _blob(data: bytes) -> bytes:
    return _u32(len(data)) + data


def model_bytes(model: CompatModel) -> bytes:
    cfg = model.config
    names = list(model.params)
    meta = {
        "d_e": cfg.d_e, "d_h": cfg.d_h, "d_img": cfg.d_img, "d_proj": cfg.d_proj,
        "loss": cfg.loss, "vocab": list(cfg.vocab), "tensors": names,
        "frozen": sorted(model.frozen),
    }
    out = [MAGIC, _u32(FORMAT_VERSION), _blob(json.dumps(meta, sort_keys=True).encode("utf-8"))]
    for name in names:
        arr = np.asarray(model.params[name], dtype="<f4")
        out.append(_blob(name.encode("utf-8")))
        out.append(_u32(arr.ndim))
        out.extend(_u32(d) for d in arr.shape)
        out.append(np.ascontiguousarray(arr).tobytes())
    return b"".join(out)


def save_model(model: CompatModel, path: str | Path) -> None:
    Path(path).write_bytes(model_bytes(model))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ModelFormatError(f"truncated model file at byte {self.pos} (wanted {n} more)")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def blob(self) -> bytes:
        return self.take(self.u32())


def model_from_bytes(data: bytes) -> CompatModel:
    r = _Reader(data)
    if r.take(4) != MAGIC:
        raise ModelFormatError("not a model file (bad magic)")
    version = r.u32()
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format version {version}, expected {FORMAT_VERSION}")
    try:
        meta = json.loads(r.blob().decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"corrupt metadata: {exc}") from exc
    cfg = ModelConfig(tuple(meta["vocab"]), meta["d_e"], meta["d_h"], meta["d_img"],
                      meta.get("d_proj"), meta.get("loss", "focal"))
    expected = cfg.param_shapes()
    params = {}
    for _ in meta["tensors"]:
        name = r.blob().decode("utf-8")
        shape = tuple(r.u32() for _ in range(r.u32()))
        count = int(np.prod(shape, dtype=int))
        values = np.frombuffer(r.take(4 * count), dtype="<f4").reshape(shape)
        if expected.get(name) != shape:
            raise ModelFormatError(f"tensor {name} has shape {shape}, expected {expected.get(name)}")
        params[name] = values.astype(np.float64)
    if r.pos != len(data):
        raise ModelFormatError(f"{len(data) - r.pos} trailing bytes after last tensor")
    missing = set(expected) - set(params)
    if missing:
        raise ModelFormatError(f"missing tensors: {sorted(missing)}")
    return CompatModel(cfg, params, set(meta.get("frozen", [])))


def load_model(path: str | Path) -> CompatModel:
    return model_from_bytes(Path(path).read_bytes())
