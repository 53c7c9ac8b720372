"""Binary model checkpoints.

Layout (all integers little-endian):
    magic "SCAN" | u32 version | u32 config-JSON length | config JSON |
    u32 record count | records | u32 CRC32 of everything before it
Each record: u16 name length | name UTF-8 | u8 ndim | u32 dims... |
float32 payload.  Values are stored as 32-bit regardless of the in-memory
precision, so save -> load -> save is byte-identical.
"""

from __future__ import annotations

import json
import struct
import zlib

import numpy as np

from .model import ModelConfig, RecognizerModel

MAGIC = b"SCAN"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, model: RecognizerModel) -> None:
    parts = [MAGIC, struct.pack("<I", VERSION)]
    cfg = json.dumps(model.config.to_dict(), sort_keys=True).encode("utf-8")
    parts.append(struct.pack("<I", len(cfg)))
    parts.append(cfg)
    params = model.parameters()
    parts.append(struct.pack("<I", len(params)))
    for p in params:
        name = p.name.encode("utf-8")
        parts.append(struct.pack("<H", len(name)))
        parts.append(name)
        parts.append(struct.pack("<B", p.data.ndim))
        parts.append(struct.pack(f"<{p.data.ndim}I", *p.data.shape))
        parts.append(np.ascontiguousarray(p.data, dtype="<f4").tobytes())
    body = b"".join(parts)
    with open(path, "wb") as fh:
        fh.write(body)
        fh.write(struct.pack("<I", zlib.crc32(body)))


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise CheckpointError("truncated checkpoint")
        out = self.blob[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]


def read_checkpoint(path) -> tuple[ModelConfig, dict[str, np.ndarray]]:
    """Parse and checksum-verify a checkpoint without needing a model."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 12 or blob[:4] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    stored_crc = struct.unpack("<I", blob[-4:])[0]
    if zlib.crc32(blob[:-4]) != stored_crc:
        raise CheckpointError(f"{path}: checksum mismatch")
    r = _Reader(blob[4:-4])
    version = r.u32()
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    try:
        config = ModelConfig.from_dict(json.loads(r.take(r.u32()).decode("utf-8")))
    except (ValueError, KeyError, TypeError) as exc:
        raise CheckpointError(f"{path}: bad config block: {exc}") from exc
    values: dict[str, np.ndarray] = {}
    for _ in range(r.u32()):
        name = r.take(struct.unpack("<H", r.take(2))[0]).decode("utf-8")
        ndim = r.take(1)[0]
        shape = struct.unpack(f"<{ndim}I", r.take(4 * ndim))
        count = int(np.prod(shape)) if shape else 1
        values[name] = np.frombuffer(r.take(4 * count),
                                     dtype="<f4").reshape(shape)
    return config, values


def load_checkpoint(path, model: RecognizerModel) -> None:
    """Restore parameters into a model whose config matches exactly."""
    config, values = read_checkpoint(path)
    if config.to_dict() != model.config.to_dict():
        raise CheckpointError(f"{path}: config mismatch "
                              f"(stored {config.to_dict()}, "
                              f"model {model.config.to_dict()})")
    index = model.param_index()
    if set(values) != set(index):
        raise CheckpointError(f"{path}: parameter set mismatch")
    for name, value in values.items():
        p = index[name]
        if value.shape != p.data.shape:
            raise CheckpointError(f"{path}: shape mismatch for {name}")
        p.data = value
        p.m = np.zeros_like(p.data)
        p.v = np.zeros_like(p.data)
        p.step_count = 0


def load_model(path, seed: int = 0) -> RecognizerModel:
    """Build a fresh model from the stored config and load the weights."""
    config, _ = read_checkpoint(path)
    model = RecognizerModel(config, seed=seed)
    load_checkpoint(path, model)
    return model
