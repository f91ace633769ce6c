import numpy as np
import pytest

from simhar.errors import CycleDetected, MultipleRoots, NonPositiveBoneLength, SkeletonError
from simhar.skeleton import JOINT_NAMES, N_JOINTS, PARENTS, Skeleton, canonical_skeleton, validate_skeleton


def _with(skel, **changes):
    kw = dict(parent=skel.parent, joint_names=skel.joint_names, rest_lengths=skel.rest_lengths)
    kw.update(changes)
    return Skeleton(**kw)


def test_canonical_skeleton_validates(skel):
    validate_skeleton(skel)
    assert skel.joint_count == N_JOINTS == 24
    assert skel.root == 0 and skel.parent[0] == -1


def test_cycle_detected(skel):
    parent = list(PARENTS)
    parent[2], parent[3] = 3, 2
    with pytest.raises(CycleDetected):
        validate_skeleton(_with(skel, parent=tuple(parent)))


def test_multiple_roots(skel):
    parent = list(PARENTS)
    parent[5] = -1
    with pytest.raises(MultipleRoots):
        validate_skeleton(_with(skel, parent=tuple(parent)))


def test_zero_length_bone(skel):
    lengths = np.array(skel.rest_lengths)
    lengths[7] = 0.0
    with pytest.raises(NonPositiveBoneLength):
        validate_skeleton(_with(skel, rest_lengths=lengths))


@pytest.mark.parametrize("j", range(1, N_JOINTS))
def test_every_single_parent_corruption_rejected(skel, j):
    # pointing a joint at itself or at the root's missing parent breaks the tree
    parent = list(PARENTS)
    parent[j] = j
    with pytest.raises(SkeletonError):
        validate_skeleton(_with(skel, parent=tuple(parent)))


@pytest.mark.parametrize("j", range(1, N_JOINTS))
def test_every_single_length_corruption_rejected(skel, j):
    lengths = np.array(skel.rest_lengths)
    lengths[j] = -0.1
    with pytest.raises(NonPositiveBoneLength):
        validate_skeleton(_with(skel, rest_lengths=lengths))


def test_name_corruption_rejected(skel):
    names = list(JOINT_NAMES)
    names[4] = names[5]
    with pytest.raises(SkeletonError):
        validate_skeleton(_with(skel, joint_names=tuple(names)))


def test_rest_pose_matches_bone_lengths(skel):
    pos = skel.rest_pose()
    for j in range(1, N_JOINTS):
        assert np.linalg.norm(pos[j] - pos[skel.parent[j]]) == pytest.approx(skel.rest_lengths[j], abs=1e-12)
