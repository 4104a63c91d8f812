"""25-joint skeleton representation and wearer-centric normalization.

A pose is a (25, 3) array of joint positions in the standard Kinect V2 joint
order. Poses are either in the raw sensor frame (meters, arbitrary origin) or
in the wearer-local frame produced by :func:`normalize_pose`: origin at
SpineBase, third axis along `up`, second axis along the ground-projected
shoulder direction, scaled by five times the shoulder length so the shoulder
distance is exactly 0.2.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum, IntEnum

import numpy as np

from .errors import DegeneratePose, FrameMismatch

N_JOINTS = 25


class Joint(IntEnum):
    SpineBase = 0
    SpineMid = 1
    Neck = 2
    Head = 3
    ShoulderLeft = 4
    ElbowLeft = 5
    WristLeft = 6
    HandLeft = 7
    ShoulderRight = 8
    ElbowRight = 9
    WristRight = 10
    HandRight = 11
    HipLeft = 12
    KneeLeft = 13
    AnkleLeft = 14
    FootLeft = 15
    HipRight = 16
    KneeRight = 17
    AnkleRight = 18
    FootRight = 19
    SpineShoulder = 20
    HandTipLeft = 21
    ThumbLeft = 22
    HandTipRight = 23
    ThumbRight = 24


class Frame(str, Enum):
    SENSOR = "sensor"
    WEARER_LOCAL = "wearer_local"


@dataclass
class Pose:
    """Joint positions plus the frame they live in.

    joints: (25, 3) float array. Finite, fixed joint order.
    """

    joints: np.ndarray
    frame: Frame = Frame.SENSOR

    def __post_init__(self):
        self.joints = np.asarray(self.joints, dtype=float)
        if self.joints.shape != (N_JOINTS, 3):
            raise ValueError(f"expected (25, 3) joints, got {self.joints.shape}")
        if not np.all(np.isfinite(self.joints)):
            raise ValueError("joint coordinates must be finite")
        self.frame = Frame(self.frame)

    def to_vector(self) -> np.ndarray:
        """Flatten to a 75-vector (row-major joint order)."""
        return self.joints.reshape(-1).copy()

    @classmethod
    def from_vector(cls, v: np.ndarray, frame: Frame = Frame.WEARER_LOCAL) -> "Pose":
        v = np.asarray(v, dtype=float)
        if v.shape != (3 * N_JOINTS,):
            raise ValueError(f"expected a 75-vector, got {v.shape}")
        return cls(v.reshape(N_JOINTS, 3), frame)


@dataclass
class PoseSequence:
    """Equally spaced poses sharing one frame tag."""

    poses: list
    frame_rate_hz: float = 30.0

    def __post_init__(self):
        if self.frame_rate_hz <= 0:
            raise ValueError("frame_rate_hz must be positive")
        frames = {p.frame for p in self.poses}
        if len(frames) > 1:
            raise FrameMismatch("sequence mixes frame tags")

    def __len__(self):
        return len(self.poses)

    def __getitem__(self, i):
        return self.poses[i]

    def as_matrix(self) -> np.ndarray:
        """(N, 75) matrix of flattened poses."""
        return np.stack([p.to_vector() for p in self.poses]) if self.poses else np.zeros((0, 75))


def shoulder_length(p: Pose) -> float:
    """Euclidean ShoulderLeft-ShoulderRight distance.

    Raises DegeneratePose if the shoulders (near-)coincide.
    """
    d = p.joints[Joint.ShoulderRight] - p.joints[Joint.ShoulderLeft]
    length = float(np.linalg.norm(d))
    if length < 1e-9:
        raise DegeneratePose("shoulders coincide")
    return length


def normalize_pose(p: Pose, up: np.ndarray) -> Pose:
    """Map a pose into the wearer-local frame.

    Axes: axis3 = up; axis2 = ground-projected ShoulderLeft->ShoulderRight
    direction; axis1 = axis2 x axis3. Origin at SpineBase, coordinates divided
    by five times the shoulder length, so the output shoulder distance is 0.2.
    Translation- and yaw-invariant by construction; idempotent on its own
    output when called with up = +z.
    """
    up = np.asarray(up, dtype=float)
    nu = np.linalg.norm(up)
    if nu < 1e-12:
        raise ValueError("up vector must be nonzero")
    a3 = up / nu

    sl = shoulder_length(p)
    d = p.joints[Joint.ShoulderRight] - p.joints[Joint.ShoulderLeft]
    proj = d - np.dot(d, a3) * a3
    np_len = np.linalg.norm(proj)
    if np_len < 1e-12:
        raise DegeneratePose("shoulder line parallel to up")
    a2 = proj / np_len
    a1 = np.cross(a2, a3)

    rot = np.stack([a1, a2, a3])  # rows: local axes in input coordinates
    local = (p.joints - p.joints[Joint.SpineBase]) @ rot.T
    return Pose(local / (5.0 * sl), Frame.WEARER_LOCAL)


def pose_distance(a: Pose, b: Pose) -> float:
    """L2 distance between two wearer-local poses (75-dim)."""
    if a.frame != Frame.WEARER_LOCAL or b.frame != Frame.WEARER_LOCAL:
        raise FrameMismatch("pose_distance requires wearer-local poses")
    return float(np.linalg.norm(a.to_vector() - b.to_vector()))


def save_pose_sequence(path, seq: PoseSequence, times=None) -> None:
    """Write one JSON object per line: {"t", "frame", "joints"}."""
    if times is None:
        times = range(len(seq))
    with open(path, "w") as f:
        for t, p in zip(times, seq.poses):
            rec = {"t": int(t), "frame": p.frame.value, "joints": p.joints.tolist()}
            f.write(json.dumps(rec) + "\n")


def load_pose_sequence(path, frame_rate_hz: float = 30.0) -> PoseSequence:
    """Read a pose JSONL file; frame indices must be strictly increasing."""
    seq, _ = load_pose_sequence_with_times(path, frame_rate_hz)
    return seq


def load_pose_sequence_with_times(path, frame_rate_hz: float = 30.0):
    """Like load_pose_sequence but also returns the stored frame indices."""
    poses = []
    times = []
    last_t = None
    with open(path) as f:
        for lineno, line in enumerate(f):
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            t = int(rec["t"])
            if last_t is not None and t <= last_t:
                raise ValueError(f"{path}:{lineno + 1}: frame indices must increase")
            last_t = t
            times.append(t)
            poses.append(Pose(np.array(rec["joints"], dtype=float), Frame(rec["frame"])))
    return PoseSequence(poses, frame_rate_hz), np.array(times, dtype=int)
