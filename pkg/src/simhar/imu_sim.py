"""Virtual IMUs from joint trajectories.

Each joint carries a sensor whose body frame is built from the bone that
ends at the joint: the y-axis points from the parent joint to the joint
(the root uses its first child), the x-axis is ``up x y`` normalised, and
``z = x x y``.  Angular velocity comes from the quaternion log of the
relative rotation between consecutive frames, specific force from a central
second difference of position minus gravity, both expressed in the body
frame.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from . import quaternion as quat
from .errors import ConfigError, DegenerateBone, TooFewFrames
from .sequences import ImuSequence, MotionSequence
from .skeleton import Skeleton, canonical_skeleton

MIN_BONE_LENGTH = 1e-9
PARALLEL_TOL = 1e-6
_WORLD_X = np.array([1.0, 0.0, 0.0])


@dataclass(frozen=True)
class SimOptions:
    gravity: tuple = (0.0, 0.0, -9.81)
    up_reference: tuple = (0.0, 0.0, 1.0)
    include_gravity: bool = True

    def __post_init__(self):
        g = np.asarray(self.gravity, float)
        up = np.asarray(self.up_reference, float)
        if g.shape != (3,) or not np.all(np.isfinite(g)):
            raise ConfigError(f"gravity must be a finite 3-vector, got {self.gravity}")
        if up.shape != (3,) or abs(np.linalg.norm(up) - 1.0) > 1e-9:
            raise ConfigError(f"up_reference must be a unit 3-vector, got {self.up_reference}")
        object.__setattr__(self, "gravity", tuple(float(x) for x in g))
        object.__setattr__(self, "up_reference", tuple(float(x) for x in up))


def bone_vectors(positions: np.ndarray, skel: Skeleton) -> np.ndarray:
    """Per-joint bone vectors ``(..., 24, 3)``; the root takes its first-child bone."""
    parent = np.array(skel.parent)
    root = skel.root
    src = parent.copy()
    dst = np.arange(len(parent))
    src[root] = root
    dst[root] = skel.first_child(root)
    return positions[..., dst, :] - positions[..., src, :]


def frames_from_bones(bones: np.ndarray, up_reference=(0.0, 0.0, 1.0), joint_names=None) -> np.ndarray:
    """Body-to-world rotation matrices ``(..., 3, 3)`` with columns x, y, z."""
    norm = np.linalg.norm(bones, axis=-1, keepdims=True)
    if np.any(norm < MIN_BONE_LENGTH):
        bad = np.argwhere(norm[..., 0] < MIN_BONE_LENGTH)[0]
        joint = bad[-1]
        name = joint_names[joint] if joint_names is not None else joint
        raise DegenerateBone(f"bone for joint {name} has length < {MIN_BONE_LENGTH} m at index {tuple(bad)}")
    y = bones / norm
    up = np.asarray(up_reference, float)
    x = np.cross(up, y)
    xn = np.linalg.norm(x, axis=-1, keepdims=True)
    parallel = xn[..., 0] < PARALLEL_TOL
    if np.any(parallel):
        x[parallel] = np.cross(_WORLD_X, y[parallel])
        xn[parallel] = np.linalg.norm(x[parallel], axis=-1, keepdims=True)
    x = x / xn
    z = np.cross(x, y)
    return np.stack([x, y, z], axis=-1)


def estimate_orientations(seq: MotionSequence, skel: Skeleton | None = None, up_reference=(0.0, 0.0, 1.0)) -> np.ndarray:
    """Body-to-world unit quaternions per frame and joint, shape ``(n, 24, 4)``.

    Consecutive frames are sign-aligned (non-negative dot product).
    """
    skel = skel or canonical_skeleton()
    positions = np.asarray(seq.frames, float)
    rot = frames_from_bones(bone_vectors(positions, skel), up_reference, skel.joint_names)
    return quat.make_continuous(quat.from_matrix(rot), axis=0)


def angular_velocity_step(q_t, q_next, dt: float) -> np.ndarray:
    """Constant body-frame rate (rad/s) carrying ``q_t`` to ``q_next`` over ``dt``."""
    rel = quat.multiply(quat.conjugate(q_t), q_next)
    return (2.0 / dt) * quat.log(rel)


def specific_force_step(p_prev, p, p_next, dt: float, q, opts: SimOptions | None = None) -> np.ndarray:
    opts = opts or SimOptions()
    a = (np.asarray(p_next, float) - 2.0 * np.asarray(p, float) + np.asarray(p_prev, float)) / dt**2
    if opts.include_gravity:
        a = a - np.asarray(opts.gravity)
    return quat.rotate_inverse(q, a)


def world_acceleration(positions: np.ndarray, dt: float) -> np.ndarray:
    """Central second difference; endpoint frames copy their interior neighbour."""
    acc = np.empty_like(positions, dtype=float)
    acc[1:-1] = (positions[2:] - 2.0 * positions[1:-1] + positions[:-2]) / dt**2
    acc[0] = acc[1]
    acc[-1] = acc[-2]
    return acc


def simulate_imu(seq: MotionSequence, skel: Skeleton | None = None, opts: SimOptions | None = None) -> ImuSequence:
    """Map a joint-position trajectory to per-joint accelerometer and gyroscope channels."""
    skel = skel or canonical_skeleton()
    opts = opts or SimOptions()
    if seq.n_frames < 3:
        raise TooFewFrames(f"need at least 3 frames, got {seq.n_frames}")
    dt = 1.0 / seq.frame_rate
    positions = np.asarray(seq.frames, float)
    q = estimate_orientations(seq, skel, opts.up_reference)

    force = world_acceleration(positions, dt)
    if opts.include_gravity:
        force = force - np.asarray(opts.gravity)
    accel = quat.rotate_inverse(q, force)

    gyro = np.empty_like(accel)
    gyro[:-1] = angular_velocity_step(q[:-1], q[1:], dt)
    gyro[-1] = gyro[-2]
    return ImuSequence(seq.frame_rate, np.concatenate([accel, gyro], axis=-1))


class ImuSimulator(TransformerMixin, BaseEstimator):
    """Transformer wrapping :func:`simulate_imu` for lists of motion sequences.

    Stateless: ``fit`` only validates the options.
    """

    def __init__(self, gravity=(0.0, 0.0, -9.81), up_reference=(0.0, 0.0, 1.0), include_gravity=True, skeleton=None):
        self.gravity = gravity
        self.up_reference = up_reference
        self.include_gravity = include_gravity
        self.skeleton = skeleton

    def _options(self):
        return SimOptions(self.gravity, self.up_reference, self.include_gravity)

    def fit(self, X=None, y=None):
        self.options_ = self._options()
        self.skeleton_ = self.skeleton or canonical_skeleton()
        return self

    def transform(self, X):
        if not hasattr(self, "options_"):
            self.fit()
        if isinstance(X, MotionSequence):
            return simulate_imu(X, self.skeleton_, self.options_)
        return [simulate_imu(s, self.skeleton_, self.options_) for s in X]
