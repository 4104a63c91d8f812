"""Joint-error evaluation and the constant / nearest-neighbor baselines.

Predicted and ground-truth poses are compared in the wearer-local frame
after a final alignment (SpineBase to the origin, yaw removed). Errors are
reported in centimeters using the 0.2-normalized shoulder as a 30 cm
reference, i.e. one normalized unit = 150 cm. Reported joints follow the
head / elbows / wrists / knees / ankles grouping with left and right pooled.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .classify import KnnIndex
from .clustering import ExemplarBank, SitStand
from .errors import DegeneratePose, EmptyLabel, FrameMismatch
from .skeleton import Frame, Joint, Pose, PoseSequence

CM_PER_UNIT = 150.0  # five times the 30 cm reference shoulder

JOINT_GROUPS = {
    "Head": [Joint.Head],
    "Elbows": [Joint.ElbowLeft, Joint.ElbowRight],
    "Wrists": [Joint.WristLeft, Joint.WristRight],
    "Knees": [Joint.KneeLeft, Joint.KneeRight],
    "Ankles": [Joint.AnkleLeft, Joint.AnkleRight],
}
EVALUATED_JOINTS = [j for joints in JOINT_GROUPS.values() for j in joints]


@dataclass
class GroupError:
    mean_cm: float
    se_cm: float
    count: int


@dataclass
class ErrorReport:
    groups: dict
    overall_mean_cm: float

    def to_dict(self) -> dict:
        return {
            "groups": {
                name: {"mean_cm": g.mean_cm, "se_cm": g.se_cm, "count": g.count}
                for name, g in self.groups.items()
            },
            "overall_mean_cm": self.overall_mean_cm,
        }

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)

    def format_table(self) -> str:
        width = max(len(n) for n in self.groups)
        lines = [f"{'group':<{width}}  {'mean_cm':>8}  {'se_cm':>7}  {'count':>6}"]
        for name, g in self.groups.items():
            lines.append(f"{name:<{width}}  {g.mean_cm:>8.2f}  {g.se_cm:>7.2f}  {g.count:>6d}")
        lines.append(f"{'overall':<{width}}  {self.overall_mean_cm:>8.2f}")
        return "\n".join(lines)


def align_for_eval(p: Pose) -> Pose:
    """Translate SpineBase to the origin and remove yaw.

    The pose is rotated about the up axis until the ShoulderLeft ->
    ShoulderRight vector has no first-axis component (and points along +y).
    Idempotent; raises DegeneratePose when the shoulder direction has no
    ground-plane component.
    """
    if p.frame != Frame.WEARER_LOCAL:
        raise FrameMismatch("alignment expects wearer-local poses")
    joints = p.joints - p.joints[Joint.SpineBase]
    d = joints[Joint.ShoulderRight] - joints[Joint.ShoulderLeft]
    if np.hypot(d[0], d[1]) < 1e-12:
        raise DegeneratePose("shoulder direction vertical; yaw undefined")
    phi = np.arctan2(d[0], d[1])
    c, s = np.cos(phi), np.sin(phi)
    rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    return Pose(joints @ rot.T, Frame.WEARER_LOCAL)


def joint_errors(pred: PoseSequence, gt: PoseSequence) -> ErrorReport:
    """Per-group mean / standard-error joint distances in centimeters."""
    if len(pred) != len(gt):
        raise ValueError(f"{len(pred)} predictions for {len(gt)} ground-truth poses")
    per_joint = {j: [] for j in EVALUATED_JOINTS}
    for a, b in zip(pred.poses, gt.poses):
        pa = align_for_eval(a).joints
        pb = align_for_eval(b).joints
        dist = np.linalg.norm(pa - pb, axis=1) * CM_PER_UNIT
        for j in EVALUATED_JOINTS:
            per_joint[j].append(dist[j])

    groups = {}
    all_errors = []
    for name, joints in JOINT_GROUPS.items():
        vals = np.concatenate([np.asarray(per_joint[j]) for j in joints])
        all_errors.append(vals)
        se = float(vals.std(ddof=1) / np.sqrt(len(vals))) if len(vals) > 1 else 0.0
        groups[name] = GroupError(float(vals.mean()), se, len(vals))
    overall = float(np.concatenate(all_errors).mean())
    return ErrorReport(groups, overall)


def baseline_constant(bank: ExemplarBank, labels, mode: SitStand) -> Pose:
    """Mean of the bank poses whose cluster carries the requested label."""
    mode = SitStand(mode)
    mask = np.array([labels[c] == mode for c in bank.cluster_of])
    if not mask.any():
        raise EmptyLabel(f"no training pose labeled {mode.value}")
    return Pose.from_vector(bank.poses[mask].mean(axis=0), Frame.WEARER_LOCAL)


def baseline_kdtree(
    train_features: np.ndarray,
    train_pose_vectors: np.ndarray,
    test_features: np.ndarray,
) -> PoseSequence:
    """1-NN lookup: each test feature takes its nearest training pose."""
    index = KnnIndex(np.asarray(train_features, dtype=float))
    poses = []
    for v in np.asarray(test_features, dtype=float):
        nn = index.query(v, 1)[0]
        poses.append(Pose.from_vector(train_pose_vectors[nn], Frame.WEARER_LOCAL))
    return PoseSequence(poses)
