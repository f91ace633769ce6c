"""Versioned little-endian checkpoint for :class:`EncoderState`.

Layout::

    b"ENC1"  u32 version  32-byte sha256 config digest
    u32 json_len  json {"config": ..., "vocab": ...}
    u64 step  u32 n_tensors
    per tensor: u16 name_len, name (utf-8), u8 ndim, u32 dims..., float64 data
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import BadMagic, FormatError, IoFailure, TruncatedPayload, VersionMismatch
from ..formats import _atomic_write
from .model import EncoderConfig, EncoderState

MAGIC = b"ENC1"
VERSION = 1
_F64 = np.dtype("<f8")


def _tensors(state: EncoderState):
    for k in sorted(state.params):
        yield k, state.params[k]
    for k in sorted(state.adam_m):
        yield f"adam.m/{k}", state.adam_m[k]
    for k in sorted(state.adam_v):
        yield f"adam.v/{k}", state.adam_v[k]


def encode_checkpoint(state: EncoderState) -> bytes:
    meta = json.dumps({"config": state.config.to_json(), "vocab": state.vocab}, sort_keys=True).encode()
    parts = [MAGIC, struct.pack("<I", VERSION), state.config.digest(), struct.pack("<I", len(meta)), meta]
    tensors = list(_tensors(state))
    parts.append(struct.pack("<QI", state.step, len(tensors)))
    for name, arr in tensors:
        raw = name.encode()
        parts.append(struct.pack("<HB", len(raw), arr.ndim) + raw)
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(np.ascontiguousarray(arr, _F64).tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, buf, path):
        self.buf, self.pos, self.path = buf, 0, path

    def take(self, n):
        if self.pos + n > len(self.buf):
            raise TruncatedPayload(f"{self.path}: checkpoint truncated at byte {self.pos}")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt):
        s = struct.Struct(fmt)
        return s.unpack(self.take(s.size))


def decode_checkpoint(buf: bytes, path="<bytes>") -> EncoderState:
    r = _Reader(buf, path)
    magic = r.take(4)
    if magic != MAGIC:
        if magic[:3] == MAGIC[:3]:
            raise VersionMismatch(f"{path}: checkpoint format {magic!r}")
        raise BadMagic(f"{path}: not a checkpoint (magic {magic!r})")
    (version,) = r.unpack("<I")
    if version != VERSION:
        raise VersionMismatch(f"{path}: checkpoint version {version}, expected {VERSION}")
    digest = r.take(32)
    (n,) = r.unpack("<I")
    meta = json.loads(r.take(n).decode())
    config = EncoderConfig.from_json(meta["config"])
    if config.digest() != digest:
        raise FormatError(f"{path}: config digest mismatch")
    step, count = r.unpack("<QI")
    params, m, v = {}, {}, {}
    for _ in range(count):
        name_len, ndim = r.unpack("<HB")
        name = r.take(name_len).decode()
        shape = r.unpack(f"<{ndim}I") if ndim else ()
        size = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(r.take(size * 8), _F64).reshape(shape).copy()
        if name.startswith("adam.m/"):
            m[name[7:]] = arr
        elif name.startswith("adam.v/"):
            v[name[7:]] = arr
        else:
            params[name] = arr
    if r.pos != len(buf):
        raise FormatError(f"{path}: {len(buf) - r.pos} trailing bytes")
    return EncoderState(config, meta["vocab"], params, m, v, step)


def save_checkpoint(path, state: EncoderState) -> None:
    _atomic_write(path, encode_checkpoint(state))


def load_checkpoint(path) -> EncoderState:
    try:
        buf = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    return decode_checkpoint(buf, path)


def write_loss_log(path, history) -> None:
    lines = ["epoch,mean_loss"] + [f"{i + 1},{loss!r}" for i, loss in enumerate(history)]
    _atomic_write(path, ("\n".join(lines) + "\n").encode())
