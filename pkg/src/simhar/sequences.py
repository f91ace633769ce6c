"""Motion and IMU sequence containers plus resampling and windowing."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, EmptySequence
from .skeleton import N_JOINTS

WINDOW_MODES = ("random_crop", "center_crop", "pad")


def _frozen(a, dtype=None):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MotionSequence:
    """World-space joint positions, shape ``(n_frames, 24, 3)``, z-up meters."""

    frame_rate: float
    frames: np.ndarray

    def __post_init__(self):
        frames = np.asarray(self.frames)
        if frames.dtype not in (np.float32, np.float64):
            frames = frames.astype(np.float64)
        if frames.ndim != 3 or frames.shape[1:] != (N_JOINTS, 3):
            raise DataError(f"motion frames must have shape (n, 24, 3), got {frames.shape}")
        if frames.shape[0] == 0:
            raise EmptySequence("motion sequence has no frames")
        if not np.all(np.isfinite(frames)):
            raise DataError("motion frames contain non-finite values")
        if not (np.isfinite(self.frame_rate) and self.frame_rate > 0):
            raise DataError(f"frame_rate must be positive, got {self.frame_rate}")
        object.__setattr__(self, "frames", _frozen(frames))
        object.__setattr__(self, "frame_rate", float(self.frame_rate))

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def duration(self) -> float:
        return (self.n_frames - 1) / self.frame_rate

    def __eq__(self, other):
        if not isinstance(other, MotionSequence):
            return NotImplemented
        return (self.frame_rate == other.frame_rate
                and self.frames.shape == other.frames.shape
                and bool(np.array_equal(self.frames, other.frames)))


@dataclass(frozen=True, eq=False)
class ImuSequence:
    """Per-joint inertial channels, shape ``(n_frames, 24, 6)``.

    Channels 0-2 are specific force (m/s^2), 3-5 angular velocity (rad/s),
    both in the joint's body frame.  Joints with ``observed_mask`` False are
    all-zero.
    """

    frame_rate: float
    frames: np.ndarray
    observed_mask: np.ndarray = None

    def __post_init__(self):
        frames = np.asarray(self.frames)
        if frames.dtype not in (np.float32, np.float64):
            frames = frames.astype(np.float64)
        if frames.ndim != 3 or frames.shape[1:] != (N_JOINTS, 6):
            raise DataError(f"imu frames must have shape (n, 24, 6), got {frames.shape}")
        if frames.shape[0] == 0:
            raise EmptySequence("imu sequence has no frames")
        if not np.all(np.isfinite(frames)):
            raise DataError("imu frames contain non-finite values")
        mask = np.ones(N_JOINTS, bool) if self.observed_mask is None else np.asarray(self.observed_mask, bool)
        if mask.shape != (N_JOINTS,):
            raise DataError(f"observed_mask must have shape (24,), got {mask.shape}")
        if np.any(frames[:, ~mask, :] != 0):
            raise DataError("unobserved joints must carry all-zero channels")
        if not (np.isfinite(self.frame_rate) and self.frame_rate > 0):
            raise DataError(f"frame_rate must be positive, got {self.frame_rate}")
        object.__setattr__(self, "frames", _frozen(frames))
        object.__setattr__(self, "observed_mask", _frozen(mask))
        object.__setattr__(self, "frame_rate", float(self.frame_rate))

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def accel(self) -> np.ndarray:
        return self.frames[..., :3]

    @property
    def gyro(self) -> np.ndarray:
        return self.frames[..., 3:]

    def __eq__(self, other):
        if not isinstance(other, ImuSequence):
            return NotImplemented
        return (self.frame_rate == other.frame_rate
                and self.frames.shape == other.frames.shape
                and bool(np.array_equal(self.frames, other.frames))
                and bool(np.array_equal(self.observed_mask, other.observed_mask)))


def resample(seq: MotionSequence, target_rate: float) -> MotionSequence:
    """Linearly interpolate joint positions onto a uniform grid at ``target_rate``.

    The output spans the input duration to within one output frame period.
    """
    if not (np.isfinite(target_rate) and target_rate > 0):
        raise DataError(f"target_rate must be positive, got {target_rate}")
    frames = seq.frames
    n = frames.shape[0]
    if n == 0:
        raise EmptySequence("cannot resample an empty sequence")
    if target_rate == seq.frame_rate or n == 1:
        return MotionSequence(target_rate, frames)
    n_out = int(np.floor((n - 1) * target_rate / seq.frame_rate + 1e-9)) + 1
    u = np.arange(n_out) * seq.frame_rate / target_rate
    i0 = np.minimum(np.floor(u).astype(int), n - 2)
    w = (u - i0)[:, None, None]
    out = (1.0 - w) * frames[i0] + w * frames[i0 + 1]
    return MotionSequence(target_rate, out.astype(frames.dtype, copy=False))


def crop_offset(n_frames: int, length: int, mode: str, rng=None) -> int:
    if n_frames <= length:
        return 0
    if mode == "center_crop":
        return (n_frames - length) // 2
    if mode == "random_crop":
        if rng is None:
            raise ValueError("random_crop needs an rng or seed")
        return int(rng.integers(0, n_frames - length + 1))
    if mode == "pad":
        return 0
    raise ValueError(f"unknown window mode {mode!r}; expected one of {WINDOW_MODES}")


def window_array(frames: np.ndarray, length: int, mode: str = "center_crop", rng=None) -> np.ndarray:
    """Crop or tail-pad a ``(n, ...)`` array to exactly ``length`` frames."""
    if length < 1:
        raise ValueError("window length must be >= 1")
    n = frames.shape[0]
    if n < length:
        out = np.zeros((length,) + frames.shape[1:], frames.dtype)
        out[:n] = frames
        return out
    start = crop_offset(n, length, mode, rng)
    return frames[start:start + length]


def window(seq: ImuSequence, length: int, mode: str = "center_crop", seed=None) -> ImuSequence:
    """Fixed-length window; short inputs are zero-padded at the tail.

    ``pad`` mode keeps the head of inputs longer than ``length``.
    """
    rng = np.random.default_rng(seed) if mode == "random_crop" else None
    if mode not in WINDOW_MODES:
        raise ValueError(f"unknown window mode {mode!r}")
    return ImuSequence(seq.frame_rate, window_array(seq.frames, length, mode, rng), seq.observed_mask)
