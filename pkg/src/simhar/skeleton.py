"""The 24-joint kinematic tree used throughout the package.

Joint order follows the SMPL body convention.  The world frame is z-up,
in meters; in the rest pose the body faces +y and its left side is +x.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CycleDetected, MultipleRoots, NonPositiveBoneLength, SkeletonError

N_JOINTS = 24

JOINT_NAMES = (
    "pelvis", "left_hip", "right_hip", "spine1",
    "left_knee", "right_knee", "spine2", "left_ankle",
    "right_ankle", "spine3", "left_foot", "right_foot",
    "neck", "left_collar", "right_collar", "head",
    "left_shoulder", "right_shoulder", "left_elbow", "right_elbow",
    "left_wrist", "right_wrist", "left_hand", "right_hand",
)

PARENTS = (-1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19, 20, 21)

# Parent-relative rest offsets. Trunk and leg bones lean slightly off the
# vertical so that bone-aligned sensor frames are well defined at rest.
REST_OFFSETS = np.array([
    [0.00, 0.00, 0.00],     # pelvis
    [0.09, 0.00, -0.07],    # left_hip
    [-0.09, 0.00, -0.07],   # right_hip
    [0.00, -0.02, 0.11],    # spine1
    [0.02, 0.01, -0.40],    # left_knee
    [-0.02, 0.01, -0.40],   # right_knee
    [0.00, 0.01, 0.13],     # spine2
    [0.01, -0.02, -0.41],   # left_ankle
    [-0.01, -0.02, -0.41],  # right_ankle
    [0.00, 0.02, 0.05],     # spine3
    [0.01, 0.12, -0.05],    # left_foot
    [-0.01, 0.12, -0.05],   # right_foot
    [0.00, -0.02, 0.21],    # neck
    [0.07, -0.01, 0.12],    # left_collar
    [-0.07, -0.01, 0.12],   # right_collar
    [0.00, 0.04, 0.09],     # head
    [0.11, -0.01, 0.03],    # left_shoulder
    [-0.11, -0.01, 0.03],   # right_shoulder
    [0.26, 0.00, 0.00],     # left_elbow
    [-0.26, 0.00, 0.00],    # right_elbow
    [0.25, 0.00, 0.00],     # left_wrist
    [-0.25, 0.00, 0.00],    # right_wrist
    [0.08, 0.00, 0.00],     # left_hand
    [-0.08, 0.00, 0.00],    # right_hand
])

PELVIS_HEIGHT = 0.93


@dataclass(frozen=True)
class Skeleton:
    """Kinematic tree: parent indices, joint names and rest bone lengths.

    ``rest_offsets`` (parent-relative rest vectors) is optional; the
    procedural generator needs it, validation and simulation do not.
    """

    parent: tuple
    joint_names: tuple
    rest_lengths: np.ndarray
    rest_offsets: np.ndarray | None = field(default=None, compare=False)

    @property
    def joint_count(self) -> int:
        return len(self.parent)

    def index(self, name: str) -> int:
        return self.joint_names.index(name)

    def children(self, j: int) -> list[int]:
        return [i for i, p in enumerate(self.parent) if p == j]

    @property
    def root(self) -> int:
        return self.parent.index(-1)

    def first_child(self, j: int) -> int:
        kids = self.children(j)
        if not kids:
            raise SkeletonError(f"joint {j} has no children")
        return kids[0]

    def topological_order(self) -> list[int]:
        order, seen = [], set()
        frontier = [self.root]
        while frontier:
            j = frontier.pop(0)
            order.append(j)
            seen.add(j)
            frontier.extend(c for c in self.children(j) if c not in seen)
        return order

    def adjacency(self) -> np.ndarray:
        """Symmetric 0/1 adjacency of the tree (no self-loops)."""
        a = np.zeros((self.joint_count, self.joint_count))
        for j, p in enumerate(self.parent):
            if p >= 0:
                a[j, p] = a[p, j] = 1.0
        return a

    def rest_pose(self, root=(0.0, 0.0, PELVIS_HEIGHT)) -> np.ndarray:
        """Joint positions ``(24, 3)`` with every rotation at identity."""
        if self.rest_offsets is None:
            raise SkeletonError("skeleton has no rest_offsets")
        pos = np.zeros((self.joint_count, 3))
        for j in self.topological_order():
            p = self.parent[j]
            pos[j] = np.asarray(root, float) if p < 0 else pos[p] + self.rest_offsets[j]
        return pos


def canonical_skeleton() -> Skeleton:
    offsets = REST_OFFSETS.copy()
    lengths = np.linalg.norm(offsets, axis=1)
    offsets.setflags(write=False)
    lengths.setflags(write=False)
    return Skeleton(PARENTS, JOINT_NAMES, lengths, offsets)


def validate_skeleton(skel: Skeleton) -> None:
    """Raise the error for the first violated skeleton invariant.

    Checks, in order: joint count and field shapes, a single root, absence
    of cycles, strictly positive non-root bone lengths.
    """
    parent = list(skel.parent)
    if len(parent) != N_JOINTS:
        raise SkeletonError(f"expected {N_JOINTS} joints, got {len(parent)}")
    if len(skel.joint_names) != N_JOINTS or len(set(skel.joint_names)) != N_JOINTS:
        raise SkeletonError("joint_names must hold 24 distinct identifiers")
    lengths = np.asarray(skel.rest_lengths, dtype=float)
    if lengths.shape != (N_JOINTS,):
        raise SkeletonError(f"rest_lengths must have shape (24,), got {lengths.shape}")
    for j, p in enumerate(parent):
        if p != -1 and not 0 <= p < N_JOINTS:
            raise SkeletonError(f"joint {j} has out-of-range parent {p}")
    roots = [j for j, p in enumerate(parent) if p == -1]
    if len(roots) > 1:
        raise MultipleRoots(f"found {len(roots)} roots: {roots}")
    for start in range(N_JOINTS):
        j, steps = start, 0
        while j != -1:
            j = parent[j]
            steps += 1
            if steps > N_JOINTS:
                raise CycleDetected(f"joint {start} does not reach a root")
    for j, p in enumerate(parent):
        if p != -1 and not (np.isfinite(lengths[j]) and lengths[j] > 0):
            raise NonPositiveBoneLength(f"joint {j} ({skel.joint_names[j]}) has length {lengths[j]}")
