"""Training-time augmentations on IMU channels."""
from __future__ import annotations

import numpy as np

from .. import quaternion as quat
from ..sequences import ImuSequence
from ..skeleton import N_JOINTS


def rotate_array(frames: np.ndarray, rotations: np.ndarray) -> np.ndarray:
    """Rotate each joint's accel and gyro triples; ``rotations`` is ``(24, 4)``."""
    R = quat.to_matrix(rotations)  # (24, 3, 3)
    acc = np.einsum("jab,tjb->tja", R, frames[..., :3])
    gyr = np.einsum("jab,tjb->tja", R, frames[..., 3:])
    return np.concatenate([acc, gyr], axis=-1)


def draw_rotations(rng, mode: str = "per_joint") -> np.ndarray:
    if mode == "global":
        return np.repeat(quat.random_uniform(rng, 1), N_JOINTS, axis=0)
    return quat.random_uniform(rng, N_JOINTS)


def draw_mask(rng, max_masked: int = 12) -> np.ndarray:
    """Joints to blank: count uniform on ``{0..max_masked}``, joints without replacement."""
    m = int(rng.integers(0, max_masked + 1))
    return rng.choice(N_JOINTS, size=m, replace=False)


def mask_array(frames: np.ndarray, mask: np.ndarray, joints) -> tuple[np.ndarray, np.ndarray]:
    frames = frames.copy()
    mask = np.array(mask, bool)
    frames[:, joints, :] = 0.0
    mask[joints] = False
    return frames, mask


def augment_rotate(imu: ImuSequence, seed=None, mode: str = "per_joint", rotations=None) -> ImuSequence:
    """Apply a uniform random rotation per joint (or one shared rotation with ``mode="global"``).

    ``rotations`` overrides the draw, e.g. identities in tests.
    """
    if rotations is None:
        rotations = draw_rotations(np.random.default_rng(seed), mode)
    out = rotate_array(np.asarray(imu.frames, float), np.asarray(rotations, float))
    out[:, ~imu.observed_mask, :] = 0.0
    return ImuSequence(imu.frame_rate, out, imu.observed_mask)


def augment_mask_joints(imu: ImuSequence, seed=None, max_masked: int = 12, joints=None) -> ImuSequence:
    """Zero all channels of a random joint subset and clear their observed bits."""
    if joints is None:
        joints = draw_mask(np.random.default_rng(seed), max_masked)
    frames, mask = mask_array(np.asarray(imu.frames), imu.observed_mask, np.asarray(joints, int))
    return ImuSequence(imu.frame_rate, frames, mask)
