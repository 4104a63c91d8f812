import json

import numpy as np
import pytest

from egopose.errors import DegeneratePose, FrameMismatch
from egopose.skeleton import (
    Frame,
    Joint,
    N_JOINTS,
    Pose,
    PoseSequence,
    load_pose_sequence,
    load_pose_sequence_with_times,
    normalize_pose,
    pose_distance,
    save_pose_sequence,
    shoulder_length,
)

UP = np.array([0.0, 0.0, 1.0])


def standing_figure():
    """Simple sensor-frame figure, z up, shoulders 0.3 m apart."""
    j = np.zeros((N_JOINTS, 3))
    j[:, 2] = 1.0
    j[Joint.SpineBase] = [0.0, 0.0, 0.9]
    j[Joint.SpineMid] = [0.0, 0.0, 1.15]
    j[Joint.SpineShoulder] = [0.0, 0.0, 1.38]
    j[Joint.Neck] = [0.0, 0.0, 1.43]
    j[Joint.Head] = [0.0, 0.0, 1.6]
    j[Joint.ShoulderLeft] = [0.0, 0.15, 1.4]
    j[Joint.ShoulderRight] = [0.0, -0.15, 1.4]
    j[Joint.HipLeft] = [0.0, 0.09, 0.9]
    j[Joint.HipRight] = [0.0, -0.09, 0.9]
    j[Joint.AnkleLeft] = [0.0, 0.1, 0.08]
    j[Joint.AnkleRight] = [0.0, -0.1, 0.08]
    return Pose(j, Frame.SENSOR)


def yaw_matrix(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def test_joint_enum_has_25_entries():
    assert N_JOINTS == 25
    assert Joint.SpineBase == 0
    assert Joint.ThumbRight == 24


def test_pose_rejects_bad_shapes():
    with pytest.raises(Exception):
        Pose(np.zeros((10, 3)), Frame.SENSOR)
    bad = np.zeros((N_JOINTS, 3))
    bad[3, 1] = np.nan
    with pytest.raises(Exception):
        Pose(bad, Frame.SENSOR)


def test_shoulder_length_direct_distance():
    p = standing_figure()
    assert shoulder_length(p) == pytest.approx(0.3, abs=1e-12)


def test_shoulder_length_after_normalization_is_point_two():
    q = normalize_pose(standing_figure(), UP)
    assert q.frame == Frame.WEARER_LOCAL
    assert shoulder_length(q) == pytest.approx(0.2, abs=1e-12)


def test_shoulder_length_coincident_raises():
    p = standing_figure()
    j = p.joints.copy()
    j[Joint.ShoulderRight] = j[Joint.ShoulderLeft]
    with pytest.raises(DegeneratePose):
        shoulder_length(Pose(j, Frame.SENSOR))


def test_normalize_canonical_pose_is_pure_scale():
    # a pose is canonical when SpineBase sits at the origin and the
    # ShoulderLeft->ShoulderRight direction is +y (the fixed orientation)
    j = standing_figure().joints - standing_figure().joints[Joint.SpineBase]
    j[:, 1] *= -1.0  # mirror so left->right runs along +y
    p = Pose(j, Frame.SENSOR)
    q = normalize_pose(p, UP)
    assert np.allclose(q.joints, j / 1.5, atol=1e-12)


def test_normalize_invariant_to_yaw_and_translation():
    rng = np.random.default_rng(5)
    base = standing_figure()
    ref = normalize_pose(base, UP)
    for _ in range(20):
        rot = yaw_matrix(rng.uniform(-np.pi, np.pi))
        shift = rng.normal(size=3) * 5.0
        moved = Pose(base.joints @ rot.T + shift, Frame.SENSOR)
        q = normalize_pose(moved, UP)
        assert np.abs(q.joints - ref.joints).max() < 1e-9


def test_normalize_idempotent():
    q = normalize_pose(standing_figure(), UP)
    q2 = normalize_pose(Pose(q.joints, Frame.SENSOR), UP)
    assert np.abs(q2.joints - q.joints).max() < 1e-9


def test_normalize_shoulders_parallel_to_up_raises():
    p = standing_figure()
    j = p.joints.copy()
    j[Joint.ShoulderLeft] = [0.0, 0.0, 1.3]
    j[Joint.ShoulderRight] = [0.0, 0.0, 1.6]
    with pytest.raises(DegeneratePose):
        normalize_pose(Pose(j, Frame.SENSOR), UP)


def test_pose_distance_identity_and_single_joint():
    q = normalize_pose(standing_figure(), UP)
    assert pose_distance(q, q) == 0.0
    j = q.joints.copy()
    j[Joint.Head] += [0.3, 0.0, 0.4]
    assert pose_distance(q, Pose(j, Frame.WEARER_LOCAL)) == pytest.approx(0.5, abs=1e-12)


def test_pose_distance_matches_scalar_loop():
    rng = np.random.default_rng(11)
    a = Pose(rng.normal(size=(N_JOINTS, 3)), Frame.WEARER_LOCAL)
    b = Pose(rng.normal(size=(N_JOINTS, 3)), Frame.WEARER_LOCAL)
    acc = 0.0
    for r in range(N_JOINTS):
        for c in range(3):
            acc += (a.joints[r, c] - b.joints[r, c]) ** 2
    assert pose_distance(a, b) == pytest.approx(acc**0.5, rel=1e-12)


def test_pose_distance_requires_wearer_local():
    with pytest.raises(FrameMismatch):
        pose_distance(standing_figure(), standing_figure())


def test_pose_distance_is_a_metric():
    rng = np.random.default_rng(13)
    for _ in range(50):
        a, b, c = (Pose(rng.normal(size=(N_JOINTS, 3)), Frame.WEARER_LOCAL) for _ in range(3))
        ab, ba = pose_distance(a, b), pose_distance(b, a)
        assert ab == ba
        assert ab >= 0.0
        assert pose_distance(a, c) <= ab + pose_distance(b, c) + 1e-12


def test_sequence_rejects_mixed_frames():
    p = standing_figure()
    q = normalize_pose(p, UP)
    with pytest.raises(FrameMismatch):
        PoseSequence([p, q])


def test_vector_round_trip():
    p = normalize_pose(standing_figure(), UP)
    v = p.to_vector()
    assert v.shape == (75,)
    assert np.array_equal(Pose.from_vector(v).joints, p.joints)


def test_sequence_file_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    poses = [Pose(rng.normal(size=(N_JOINTS, 3)), Frame.WEARER_LOCAL) for _ in range(4)]
    seq = PoseSequence(poses)
    path = tmp_path / "poses.jsonl"
    save_pose_sequence(path, seq, times=[2, 5, 6, 9])
    back, times = load_pose_sequence_with_times(path)
    assert list(times) == [2, 5, 6, 9]
    assert len(back) == 4
    for a, b in zip(back.poses, poses):
        assert np.allclose(a.joints, b.joints)
        assert a.frame == Frame.WEARER_LOCAL


def test_sequence_file_requires_increasing_t(tmp_path):
    path = tmp_path / "bad.jsonl"
    rec = {"t": 1, "frame": "sensor", "joints": np.zeros((N_JOINTS, 3)).tolist()}
    with open(path, "w") as f:
        f.write(json.dumps(rec) + "\n")
        f.write(json.dumps(rec) + "\n")
    with pytest.raises(ValueError):
        load_pose_sequence(path)
