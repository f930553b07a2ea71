"""Binary checkpoint format.

Layout: the 8-byte magic ``ARBSR001``; a little-endian uint64 header
length; a UTF-8 JSON header ``{"config": {...}, "params": [{"name",
"shape"}, ...]}``; then each parameter as raw little-endian float32 in
manifest order.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .config import ConfigError, ModelConfig
from .network import ArbNet

MAGIC = b"ARBSR001"
_LEN = struct.Struct("<Q")


class CheckpointError(ValueError):
    """Raised when a checkpoint file is malformed or does not match its model."""


def dumps(model: ArbNet, extra: dict | None = None) -> bytes:
    manifest = [{"name": name, "shape": list(p.shape)} for name, p in model.named_parameters()]
    header = {"config": model.config.to_dict(), "params": manifest}
    if extra:
        header["extra"] = extra
    raw = json.dumps(header, sort_keys=True).encode("utf-8")
    blobs = [p.value.astype("<f4").tobytes() for _, p in model.named_parameters()]
    return b"".join([MAGIC, _LEN.pack(len(raw)), raw, *blobs])


def save_checkpoint(model: ArbNet, path, extra: dict | None = None) -> None:
    data = dumps(model, extra)
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp.write_bytes(data)
        tmp.replace(path)
    except OSError as exc:
        raise OSError(f"failed to write checkpoint {path}: {exc}") from exc


def loads(data: bytes, dtype=None) -> ArbNet:
    if len(data) < len(MAGIC) or data[:len(MAGIC)] != MAGIC:
        raise CheckpointError("magic: not an ARBSR001 checkpoint")
    off = len(MAGIC)
    if len(data) < off + _LEN.size:
        raise CheckpointError("header_length: file truncated")
    (n,) = _LEN.unpack_from(data, off)
    off += _LEN.size
    if len(data) < off + n:
        raise CheckpointError("header: file truncated")
    try:
        header = json.loads(data[off:off + n].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"header: not valid UTF-8 JSON ({exc})") from None
    off += n
    try:
        config = ModelConfig.from_dict(header["config"])
    except KeyError:
        raise CheckpointError("config: missing from header") from None
    except (ConfigError, TypeError) as exc:
        raise CheckpointError(f"config: {exc}") from None
    manifest = header.get("params")
    if not isinstance(manifest, list):
        raise CheckpointError("params: missing manifest")

    model = ArbNet(config, dtype=dtype or np.float32)
    expected = list(model.named_parameters())
    if len(manifest) != len(expected):
        raise CheckpointError(
            f"params: manifest lists {len(manifest)} tensors, config implies {len(expected)}")
    for entry, (name, p) in zip(manifest, expected):
        if entry.get("name") != name:
            raise CheckpointError(f"params: expected {name!r}, found {entry.get('name')!r}")
        if tuple(entry.get("shape", ())) != p.shape:
            raise CheckpointError(
                f"{name}: shape {entry.get('shape')} does not match expected {list(p.shape)}")
        count = int(np.prod(p.shape))
        nbytes = 4 * count
        if len(data) < off + nbytes:
            raise CheckpointError(f"{name}: data truncated")
        values = np.frombuffer(data, dtype="<f4", count=count, offset=off).reshape(p.shape)
        p.value[...] = values
        off += nbytes
    if off != len(data):
        raise CheckpointError(f"trailing: {len(data) - off} unexpected bytes after last tensor")
    return model


def load_checkpoint(path, dtype=None) -> ArbNet:
    return loads(Path(path).read_bytes(), dtype=dtype)


def read_header(path) -> dict:
    data = Path(path).read_bytes()
    if data[:len(MAGIC)] != MAGIC:
        raise CheckpointError("magic: not an ARBSR001 checkpoint")
    (n,) = _LEN.unpack_from(data, len(MAGIC))
    off = len(MAGIC) + _LEN.size
    return json.loads(data[off:off + n].decode("utf-8"))
