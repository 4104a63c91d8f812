"""Pose clustering and the exemplar motion bank.

Normalized training poses are grouped by k-means into K clusters; the bank
keeps every training pose (in time order), its cluster id, the boundaries
between source sequences, and the cluster adjacency observed across
consecutive training frames. Clusters get a sitting/standing label from the
hip height of their centroid.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import TooFewPoses
from .skeleton import Frame, Joint, Pose, save_pose_sequence, load_pose_sequence, PoseSequence

_HIP_Z = [3 * Joint.HipLeft + 2, 3 * Joint.HipRight + 2]
_ANKLE_Z = [3 * Joint.AnkleLeft + 2, 3 * Joint.AnkleRight + 2]


class SitStand(str, Enum):
    SITTING_LIKE = "sitting"
    STANDING_LIKE = "standing"


@dataclass
class ClusterModel:
    """K centroids over 75-dim normalized poses, optionally labeled."""

    centroids: np.ndarray
    labels: list | None = None
    # training diagnostics, not serialized
    objective: float | None = None
    n_iter: int | None = None
    converged: bool | None = None

    def __post_init__(self):
        self.centroids = np.asarray(self.centroids, dtype=float)
        if self.centroids.ndim != 2 or self.centroids.shape[1] != 75:
            raise ValueError(f"centroids must be (K, 75), got {self.centroids.shape}")
        if self.labels is not None and len(self.labels) != len(self.centroids):
            raise ValueError("one label per centroid required")

    @property
    def k(self) -> int:
        return len(self.centroids)

    def save(self, path) -> None:
        rec = {
            "k": self.k,
            "centroids": self.centroids.tolist(),
            "labels": [l.value for l in self.labels] if self.labels else None,
        }
        with open(path, "w") as f:
            json.dump(rec, f)

    @classmethod
    def load(cls, path) -> "ClusterModel":
        with open(path) as f:
            rec = json.load(f)
        labels = [SitStand(l) for l in rec["labels"]] if rec.get("labels") else None
        return cls(np.array(rec["centroids"], dtype=float), labels)


def kmeans(x: np.ndarray, k: int, seed: int, max_iters: int = 100) -> ClusterModel:
    """Lloyd's algorithm with k-means++ seeding.

    Stops when assignments are stable or after max_iters. Empty clusters are
    re-seeded from the point farthest from its centroid. The objective
    (sum of squared distances) never increases across iterations.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n < k:
        raise TooFewPoses(f"{n} poses for {k} clusters")
    rng = np.random.default_rng(seed)

    centroids = np.empty((k, x.shape[1]))
    centroids[0] = x[rng.integers(n)]
    d2 = ((x - centroids[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total <= 0:
            centroids[c] = x[rng.integers(n)]
        else:
            centroids[c] = x[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, ((x - centroids[c]) ** 2).sum(axis=1))

    assign = None
    prev_obj = np.inf
    n_iter = 0
    converged = False
    for n_iter in range(1, max_iters + 1):
        dist = _sq_distances(x, centroids)
        new_assign = dist.argmin(axis=1)  # ties -> lowest cluster id
        # direct-form objective: the expansion in dist carries cancellation
        # noise that would keep a perfect clustering away from exactly 0
        obj = float(((x - centroids[new_assign]) ** 2).sum())
        assert obj <= prev_obj + 1e-9 * max(1.0, prev_obj), "objective increased"
        prev_obj = obj
        if assign is not None and np.array_equal(new_assign, assign):
            converged = True
            assign = new_assign
            break
        assign = new_assign

        counts = np.bincount(assign, minlength=k)
        for c in range(k):
            if counts[c] > 0:
                centroids[c] = x[assign == c].mean(axis=0)
        empties = np.flatnonzero(counts == 0)
        if len(empties) > 0:
            point_d = dist[np.arange(n), assign].copy()
            for c in empties:
                far = int(point_d.argmax())
                centroids[c] = x[far]
                point_d[far] = -1.0  # each reseed takes a distinct point

    return ClusterModel(
        centroids.copy(), objective=prev_obj, n_iter=n_iter, converged=converged
    )


def _sq_distances(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    """(n, K) squared Euclidean distances, clipped at 0 for fp safety."""
    d = (x * x).sum(axis=1)[:, None] + (c * c).sum(axis=1)[None, :] - 2.0 * (x @ c.T)
    return np.maximum(d, 0.0)


def assign_cluster(model: ClusterModel, pose_vec: np.ndarray) -> int:
    """Nearest centroid id; ties go to the lowest id."""
    return int(assign_clusters(model, np.asarray(pose_vec)[None, :])[0])


def assign_clusters(model: ClusterModel, x: np.ndarray) -> np.ndarray:
    return _sq_distances(np.asarray(x, dtype=float), model.centroids).argmin(axis=1)


def hip_height(pose_vec: np.ndarray) -> float:
    """Up-axis hip midpoint minus mean ankle height, in normalized units."""
    v = np.asarray(pose_vec, dtype=float)
    return float(v[_HIP_Z].mean() - v[_ANKLE_Z].mean())


def sit_stand_threshold(heights: np.ndarray) -> float:
    """Midpoint of the two modes of a 1-D 2-means on training hip heights."""
    h = np.sort(np.asarray(heights, dtype=float))
    lo, hi = h[0], h[-1]
    if hi - lo < 1e-12:
        return float(lo)
    for _ in range(100):
        mid = (lo + hi) / 2.0
        left = h[h <= mid]
        right = h[h > mid]
        if len(left) == 0 or len(right) == 0:
            break
        new_lo, new_hi = left.mean(), right.mean()
        if abs(new_lo - lo) < 1e-12 and abs(new_hi - hi) < 1e-12:
            lo, hi = new_lo, new_hi
            break
        lo, hi = new_lo, new_hi
    return float((lo + hi) / 2.0)


def label_clusters(model: ClusterModel, train_vectors: np.ndarray, theta_sit: float | None = None) -> list:
    """Label each centroid sitting/standing by hip height against theta_sit.

    theta_sit defaults to the 2-means midpoint of the training pose hip
    heights. A centroid is sitting-like iff its hip height is strictly below
    the threshold.
    """
    if theta_sit is None:
        heights = np.array([hip_height(v) for v in np.asarray(train_vectors, dtype=float)])
        theta_sit = sit_stand_threshold(heights)
    labels = [
        SitStand.SITTING_LIKE if hip_height(c) < theta_sit else SitStand.STANDING_LIKE
        for c in model.centroids
    ]
    model.labels = labels
    return labels


def build_neighbor_graph(cluster_of: np.ndarray, sequence_breaks, k: int) -> list:
    """Symmetric cluster adjacency from consecutive training frames.

    neighbors(a) always contains a. Clusters a, b are neighbors iff some
    training step i -> i+1 that does not cross a sequence break has
    {cluster_of[i], cluster_of[i+1]} == {a, b}. sequence_breaks lists the
    indices that start a new source sequence.
    """
    cluster_of = np.asarray(cluster_of, dtype=int)
    breaks = set(int(b) for b in sequence_breaks)
    nbrs = [{c} for c in range(k)]
    for i in range(len(cluster_of) - 1):
        if (i + 1) in breaks:
            continue
        a, b = int(cluster_of[i]), int(cluster_of[i + 1])
        nbrs[a].add(b)
        nbrs[b].add(a)
    return [np.array(sorted(s), dtype=int) for s in nbrs]


@dataclass
class ExemplarBank:
    """All training poses in time order plus cluster structure.

    poses: (n, 75) normalized pose vectors; cluster_of: (n,) cluster ids;
    sequence_breaks: sorted indices where a new source sequence starts;
    neighbors: per-cluster sorted arrays of neighbor ids (self included).
    """

    poses: np.ndarray
    cluster_of: np.ndarray
    sequence_breaks: np.ndarray
    neighbors: list
    k: int

    def __post_init__(self):
        self.poses = np.asarray(self.poses, dtype=float)
        self.cluster_of = np.asarray(self.cluster_of, dtype=int)
        self.sequence_breaks = np.asarray(sorted(int(b) for b in self.sequence_breaks), dtype=int)
        self.validate()

    def validate(self) -> None:
        if self.poses.ndim != 2 or self.poses.shape[1] != 75:
            raise ValueError("bank poses must be (n, 75)")
        if len(self.cluster_of) != len(self.poses):
            raise ValueError("cluster_of length mismatch")
        if len(self.cluster_of) and (self.cluster_of.min() < 0 or self.cluster_of.max() >= self.k):
            raise ValueError("cluster id out of range")
        if len(self.neighbors) != self.k:
            raise ValueError("one neighbor list per cluster required")
        for c, nb in enumerate(self.neighbors):
            if c not in set(int(x) for x in nb):
                raise ValueError(f"cluster {c} must neighbor itself")
            for b in nb:
                if c not in set(int(x) for x in self.neighbors[int(b)]):
                    raise ValueError("neighbor relation must be symmetric")
        for b in self.sequence_breaks:
            if not (0 < b < len(self.poses)):
                raise ValueError("sequence break outside pose range")

    @classmethod
    def build(cls, poses: np.ndarray, cluster_of: np.ndarray, sequence_breaks, k: int) -> "ExemplarBank":
        nbrs = build_neighbor_graph(cluster_of, sequence_breaks, k)
        return cls(poses, cluster_of, np.asarray(list(sequence_breaks), dtype=int), nbrs, k)

    def crosses_break(self, j: int, i: int) -> bool:
        """True when the forward step j -> i spans a sequence boundary."""
        lo, hi = (j, i) if j <= i else (i, j)
        a = np.searchsorted(self.sequence_breaks, lo, side="right")
        b = np.searchsorted(self.sequence_breaks, hi, side="right")
        return bool(b > a)

    def save(self, path, poses_file=None) -> None:
        """JSON with a pose-file reference; poses go to a sibling JSONL."""
        if poses_file is None:
            poses_file = os.path.splitext(os.path.basename(path))[0] + "_poses.jsonl"
        pose_path = os.path.join(os.path.dirname(os.path.abspath(path)), poses_file)
        seq = PoseSequence([Pose.from_vector(v, Frame.WEARER_LOCAL) for v in self.poses])
        save_pose_sequence(pose_path, seq)
        rec = {
            "k": self.k,
            "poses_file": poses_file,
            "cluster_of": self.cluster_of.tolist(),
            "sequence_breaks": self.sequence_breaks.tolist(),
            "neighbors": [nb.tolist() for nb in self.neighbors],
        }
        with open(path, "w") as f:
            json.dump(rec, f)

    @classmethod
    def load(cls, path) -> "ExemplarBank":
        with open(path) as f:
            rec = json.load(f)
        pose_path = os.path.join(os.path.dirname(os.path.abspath(path)), rec["poses_file"])
        seq = load_pose_sequence(pose_path)
        poses = seq.as_matrix()
        return cls(
            poses,
            np.array(rec["cluster_of"], dtype=int),
            np.array(rec["sequence_breaks"], dtype=int),
            [np.array(nb, dtype=int) for nb in rec["neighbors"]],
            int(rec["k"]),
        )
