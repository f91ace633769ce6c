"""Labelled downstream datasets and channel alignment to the 24-joint layout."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import DataError, UnknownJointName
from ..formats import read_imu, write_imu
from ..sequences import ImuSequence
from ..skeleton import JOINT_NAMES, N_JOINTS

DESCRIPTOR = "dataset.json"


def joint_indices(joints) -> list[int]:
    out = []
    for j in joints:
        if isinstance(j, str):
            if j not in JOINT_NAMES:
                raise UnknownJointName(f"unknown joint name {j!r}")
            out.append(JOINT_NAMES.index(j))
        else:
            j = int(j)
            if not 0 <= j < N_JOINTS:
                raise UnknownJointName(f"joint index {j} out of range")
            out.append(j)
    if len(set(out)) != len(out):
        raise DataError(f"duplicate joints in {list(joints)}")
    return out


def align_channels(data: np.ndarray, joints, frame_rate: float = 30.0) -> ImuSequence:
    """Place ``(T, len(joints), 6)`` channels into their canonical slots; other joints are zero."""
    idx = joint_indices(joints)
    if not idx:
        raise DataError("need at least one observed joint")
    data = np.asarray(data, float)
    if data.ndim != 3 or data.shape[1:] != (len(idx), 6):
        raise DataError(f"expected (T, {len(idx)}, 6) channels, got {data.shape}")
    frames = np.zeros((data.shape[0], N_JOINTS, 6))
    frames[:, idx] = data
    mask = np.zeros(N_JOINTS, bool)
    mask[idx] = True
    return ImuSequence(frame_rate, frames, mask)


@dataclass(frozen=True)
class HarRecord:
    id: str
    label: str
    data: np.ndarray  # (T, n_observed, 6)


@dataclass
class HarDataset:
    """Records carry only the dataset's observed joints; see :func:`align_channels`.

    All record access goes through :meth:`record` so that callers can be
    audited for which split they read.
    """

    name: str
    records: dict
    label_set: tuple
    label_texts: dict
    splits: dict
    observed_joints: tuple
    frame_rate: float = 30.0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.label_set = tuple(self.label_set)
        self.observed_joints = tuple(self.observed_joints)
        joint_indices(self.observed_joints)
        train, test = set(self.splits.get("train", ())), set(self.splits.get("test", ()))
        if train & test:
            raise DataError(f"{self.name}: train and test splits overlap")
        for rid, rec in self.records.items():
            if rec.label not in self.label_set:
                raise DataError(f"{self.name}: record {rid!r} has label {rec.label!r} outside label_set")
        for rid in train | test:
            if rid not in self.records:
                raise DataError(f"{self.name}: split references unknown record {rid!r}")
        present = {self.records[r].label for r in test}
        missing = [c for c in self.label_set if c not in present]
        if missing:
            raise DataError(f"{self.name}: classes missing from the test split: {missing}")
        missing = [c for c in self.label_set if c not in self.label_texts]
        if missing:
            raise DataError(f"{self.name}: no label text for {missing}")

    def record(self, rid: str) -> HarRecord:
        return self.records[rid]

    def ids(self, split: str) -> list:
        return list(self.splits.get(split, ()))

    def aligned(self, rid: str) -> ImuSequence:
        return align_channels(self.record(rid).data, self.observed_joints, self.frame_rate)

    def save(self, directory) -> Path:
        directory = Path(directory)
        (directory / "imu").mkdir(parents=True, exist_ok=True)
        entries = []
        for rid in sorted(self.records):
            rec = self.records[rid]
            rel = f"imu/{rid}.iseq"
            write_imu(directory / rel, align_channels(rec.data, self.observed_joints, self.frame_rate))
            entries.append({"id": rid, "label": rec.label, "file": rel})
        desc = {
            "name": self.name,
            "label_set": list(self.label_set),
            "label_texts": {k: self.label_texts[k] for k in self.label_set},
            "splits": {k: list(v) for k, v in self.splits.items()},
            "observed_joints": list(self.observed_joints),
            "frame_rate": self.frame_rate,
            "records": entries,
            "metadata": self.metadata,
        }
        (directory / DESCRIPTOR).write_text(json.dumps(desc, indent=2) + "\n", encoding="utf-8")
        return directory

    @classmethod
    def load(cls, directory) -> "HarDataset":
        directory = Path(directory)
        try:
            desc = json.loads((directory / DESCRIPTOR).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read HAR descriptor in {directory}: {exc}") from exc
        idx = joint_indices(desc["observed_joints"])
        records = {}
        for e in desc["records"]:
            imu = read_imu(directory / e["file"])
            records[e["id"]] = HarRecord(e["id"], e["label"], np.asarray(imu.frames[:, idx], float))
        return cls(desc["name"], records, desc["label_set"], desc["label_texts"], desc["splits"],
                   desc["observed_joints"], desc.get("frame_rate", 30.0), desc.get("metadata", {}))
