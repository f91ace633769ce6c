"""Binary motion/IMU files and the JSONL dataset manifest.

MSEQ: ``b"MSQ1"``, then little-endian u32 n_frames, u32 n_joints (24),
u32 frame_rate in millihertz, then float32 positions ``[frame][joint][xyz]``.

ISEQ: ``b"ISQ1"``, the same header, a 24-byte observed mask (0/1 per
joint), then float32 ``[frame][joint][ax ay az gx gy gz]``.

Payloads are stored as float32, so a round trip is exact for values that
are representable in float32 (everything read from disk).
"""
from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BadMagic, DataError, FormatError, IoFailure, NonFiniteValue, TruncatedPayload, VersionMismatch
from .sequences import ImuSequence, MotionSequence
from .skeleton import N_JOINTS

MSEQ_MAGIC = b"MSQ1"
ISEQ_MAGIC = b"ISQ1"
_HEADER = struct.Struct("<4sIII")
_F32 = np.dtype("<f4")


def _rate_to_millihz(rate: float) -> int:
    mhz = int(round(rate * 1000))
    if mhz <= 0 or mhz >= 2**32:
        raise DataError(f"frame rate {rate} Hz not representable in millihertz")
    return mhz


def _check_magic(magic: bytes, expected: bytes, path):
    if magic == expected:
        return
    if magic[:3] == expected[:3]:
        raise VersionMismatch(f"{path}: format version {magic[3:]!r}, expected {expected[3:]!r}")
    raise BadMagic(f"{path}: bad magic {magic!r}, expected {expected!r}")


def _read_header(buf: bytes, expected: bytes, path):
    if len(buf) < _HEADER.size:
        if len(buf) >= 4:
            _check_magic(buf[:4], expected, path)
        raise TruncatedPayload(f"{path}: header truncated ({len(buf)} bytes)")
    magic, n_frames, n_joints, mhz = _HEADER.unpack_from(buf)
    _check_magic(magic, expected, path)
    if n_joints != N_JOINTS:
        raise FormatError(f"{path}: n_joints={n_joints}, expected {N_JOINTS}")
    if mhz == 0:
        raise FormatError(f"{path}: zero frame rate")
    return n_frames, mhz / 1000.0


def _payload(buf: bytes, offset: int, count: int, path) -> np.ndarray:
    need = offset + count * _F32.itemsize
    if len(buf) < need:
        raise TruncatedPayload(f"{path}: payload has {len(buf) - offset} bytes, header declares {count * 4}")
    if len(buf) > need:
        raise FormatError(f"{path}: {len(buf) - need} trailing bytes")
    data = np.frombuffer(buf, dtype=_F32, count=count, offset=offset).astype(np.float32)
    if not np.all(np.isfinite(data)):
        raise NonFiniteValue(f"{path}: payload contains non-finite values")
    return data


def _atomic_write(path, blob: bytes):
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp.write_bytes(blob)
        os.replace(tmp, path)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def encode_motion(seq: MotionSequence) -> bytes:
    frames = np.ascontiguousarray(seq.frames, dtype=_F32)
    if not np.all(np.isfinite(frames)):
        raise NonFiniteValue("motion values overflow float32")
    header = _HEADER.pack(MSEQ_MAGIC, frames.shape[0], N_JOINTS, _rate_to_millihz(seq.frame_rate))
    return header + frames.tobytes()


def decode_motion(buf: bytes, path="<bytes>") -> MotionSequence:
    n_frames, rate = _read_header(buf, MSEQ_MAGIC, path)
    data = _payload(buf, _HEADER.size, n_frames * N_JOINTS * 3, path)
    return MotionSequence(rate, data.reshape(n_frames, N_JOINTS, 3))


def encode_imu(seq: ImuSequence) -> bytes:
    frames = np.ascontiguousarray(seq.frames, dtype=_F32)
    if not np.all(np.isfinite(frames)):
        raise NonFiniteValue("imu values overflow float32")
    header = _HEADER.pack(ISEQ_MAGIC, frames.shape[0], N_JOINTS, _rate_to_millihz(seq.frame_rate))
    mask = np.asarray(seq.observed_mask, np.uint8).tobytes()
    return header + mask + frames.tobytes()


def decode_imu(buf: bytes, path="<bytes>") -> ImuSequence:
    n_frames, rate = _read_header(buf, ISEQ_MAGIC, path)
    off = _HEADER.size
    if len(buf) < off + N_JOINTS:
        raise TruncatedPayload(f"{path}: observed mask truncated")
    mask = np.frombuffer(buf, np.uint8, N_JOINTS, off)
    if np.any(mask > 1):
        raise FormatError(f"{path}: observed mask bytes must be 0 or 1")
    data = _payload(buf, off + N_JOINTS, n_frames * N_JOINTS * 6, path)
    return ImuSequence(rate, data.reshape(n_frames, N_JOINTS, 6), mask.astype(bool))


def _read_bytes(path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc


def write_motion(path, seq: MotionSequence) -> None:
    _atomic_write(path, encode_motion(seq))


def read_motion(path) -> MotionSequence:
    return decode_motion(_read_bytes(path), path)


def write_imu(path, seq: ImuSequence) -> None:
    _atomic_write(path, encode_imu(seq))


def read_imu(path) -> ImuSequence:
    return decode_imu(_read_bytes(path), path)


# --------------------------------------------------------------------------
# manifest

_RECORD_FIELDS = ("id", "texts", "motion_ref", "imu_ref", "label", "source", "generator_tag", "seed", "split")


@dataclass(frozen=True)
class TextMotionRecord:
    id: str
    texts: tuple
    motion_ref: str | None = None
    imu_ref: str | None = None
    label: str | None = None
    source: str = "real"
    generator_tag: str | None = None
    seed: int | None = None
    split: str | None = None
    extra: dict = field(default_factory=dict, compare=True, hash=False)

    def __post_init__(self):
        texts = tuple(self.texts)
        if not texts or not all(isinstance(t, str) for t in texts):
            raise DataError(f"record {self.id!r}: texts must be a non-empty list of strings")
        object.__setattr__(self, "texts", texts)
        if self.source not in ("real", "synthetic"):
            raise DataError(f"record {self.id!r}: source must be 'real' or 'synthetic'")
        if (self.motion_ref is None) == (self.imu_ref is None):
            raise DataError(f"record {self.id!r}: exactly one of motion_ref/imu_ref must be set")

    def to_json(self) -> dict:
        out = {}
        for name in _RECORD_FIELDS:
            value = getattr(self, name)
            if value is None:
                continue
            out[name] = list(value) if name == "texts" else value
        for k, v in self.extra.items():
            out.setdefault(k, v)
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "TextMotionRecord":
        known = {k: obj[k] for k in _RECORD_FIELDS if k in obj}
        extra = {k: v for k, v in obj.items() if k not in _RECORD_FIELDS}
        if "id" not in known or "texts" not in known:
            raise DataError(f"manifest record missing id/texts: {obj}")
        return cls(extra=extra, **known)

    def replace(self, **changes) -> "TextMotionRecord":
        kw = {name: getattr(self, name) for name in _RECORD_FIELDS}
        kw["extra"] = dict(self.extra)
        kw.update(changes)
        return TextMotionRecord(**kw)

    @property
    def ref(self) -> str:
        return self.motion_ref if self.motion_ref is not None else self.imu_ref


@dataclass
class DatasetManifest:
    """Ordered records plus free-form metadata (creation seed, tool version...).

    ``root`` is the directory relative paths resolve against.
    """

    records: list
    metadata: dict = field(default_factory=dict)
    root: Path | None = None

    def __post_init__(self):
        self.records = list(self.records)
        ids = [r.id for r in self.records]
        if len(set(ids)) != len(ids):
            seen, dup = set(), None
            for i in ids:
                if i in seen:
                    dup = i
                    break
                seen.add(i)
            raise DataError(f"duplicate record id {dup!r}")

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def split_tags(self) -> list:
        return sorted({r.split for r in self.records if r.split is not None})

    def resolve(self, record: TextMotionRecord) -> Path:
        path = Path(record.ref)
        if not path.is_absolute() and self.root is not None:
            path = Path(self.root) / path
        return path

    def load_motion(self, record) -> MotionSequence:
        return read_motion(self.resolve(record))

    def load_imu(self, record) -> ImuSequence:
        return read_imu(self.resolve(record))


def manifest_bytes(manifest: DatasetManifest) -> bytes:
    lines = [json.dumps(r.to_json(), ensure_ascii=False, sort_keys=False) for r in manifest.records]
    return ("\n".join(lines) + ("\n" if lines else "")).encode("utf-8")


def _relocate(record: TextMotionRecord, ref: str) -> TextMotionRecord:
    key = "motion_ref" if record.motion_ref is not None else "imu_ref"
    return record.replace(**{key: ref})


def write_manifest(path, manifest: DatasetManifest) -> None:
    """Write records as JSONL; metadata, if any, goes to ``<path>.meta.json``.

    File references are stored relative to the manifest's directory so a
    dataset directory can be moved as a whole.
    """
    path = Path(path)
    base = path.parent.resolve()
    records = [_relocate(r, os.path.relpath(manifest.resolve(r).resolve(), base)) for r in manifest.records]
    _atomic_write(path, manifest_bytes(DatasetManifest(records)))
    if manifest.metadata:
        meta = json.dumps(manifest.metadata, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
        _atomic_write(path.with_name(path.name + ".meta.json"), meta.encode("utf-8"))


def read_manifest(path, check_paths: bool = True) -> DatasetManifest:
    path = Path(path)
    text = _read_bytes(path).decode("utf-8")
    records = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from exc
        rec = TextMotionRecord.from_json(obj)
        if not Path(rec.ref).is_absolute():
            rec = _relocate(rec, str((path.parent / rec.ref).resolve()))
        records.append(rec)
    meta_path = path.with_name(path.name + ".meta.json")
    metadata = json.loads(meta_path.read_text("utf-8")) if meta_path.exists() else {}
    manifest = DatasetManifest(records, metadata, root=path.parent)
    if check_paths:
        for r in records:
            if not manifest.resolve(r).exists():
                raise IoFailure(f"{path}: record {r.id!r} references missing file {r.ref}")
    return manifest
