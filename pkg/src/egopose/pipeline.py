"""Glue between the stages: feature building, model training, inference.

A trained model bundle holds the pose clusters, the exemplar bank with its
neighbor graph, the per-frame classifier (random forest or k-NN vote), and
the feature configuration needed to reproduce the classifier's inputs at
inference time.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .classify import (
    ForestModel,
    KnnModel,
    constant_static,
    forest_proba_batch,
    knn_proba,
    train_forest,
)
from .clustering import (
    ClusterModel,
    ExemplarBank,
    SitStand,
    assign_clusters,
    hip_height,
    kmeans,
    label_clusters,
    sit_stand_threshold,
)
from .costs import CostParams, unary_costs, prune
from .errors import Infeasible, LengthMismatch, OutOfRange
from .evaluation import baseline_constant, baseline_kdtree
from .geometry import CameraIntrinsics, feature_window, rotation_from_homography
from .pathopt import (
    PathParams,
    PosePath,
    Trellis,
    solve_exact_dp,
    solve_paper_dp,
    solve_path_cluster,
)
from .skeleton import Frame, Pose, PoseSequence, normalize_pose

UP_AXIS = np.array([0.0, 0.0, 1.0])

SOLVERS = ("paper", "exact", "path-cluster", "kdtree", "always-standing", "always-sitting")


def valid_feature_centers(n_frames: int, window: int = 30) -> np.ndarray:
    """Frame indices whose feature window fits inside the stream."""
    first = (window - 1) // 2
    last = (n_frames - 1) - (window // 2)
    if last < first:
        return np.empty(0, dtype=int)
    return np.arange(first, last + 1)


def features_from_homographies(
    hs,
    window: int = 30,
    mode: str = "homography",
    camera: CameraIntrinsics | None = None,
    centers=None,
):
    """Stack per-frame motion features; returns (matrix, center indices).

    mode "homography" stacks the normalized homographies themselves;
    "rotation" first converts each one to its infinitesimal camera rotation,
    which needs the intrinsics.
    """
    n_frames = len(hs) + 1
    if centers is None:
        centers = valid_feature_centers(n_frames, window)
    centers = np.asarray(centers, dtype=int)
    if mode == "homography":
        mats = [h.h for h in hs]
    elif mode == "rotation":
        if camera is None:
            raise ValueError("rotation features need camera intrinsics")
        mats = [rotation_from_homography(h, camera) for h in hs]
    else:
        raise ValueError(f"unknown feature mode {mode!r}")
    rows = [feature_window(mats, int(c), window).values for c in centers]
    if not rows:
        return np.empty((0, 9 * (window - 1))), centers
    return np.stack(rows), centers


def normalized_matrix(seq: PoseSequence, up: np.ndarray = UP_AXIS) -> np.ndarray:
    """Wearer-local (n, 75) matrix; sensor-frame poses get normalized."""
    rows = []
    for p in seq.poses:
        if p.frame != Frame.WEARER_LOCAL:
            p = normalize_pose(p, up)
        rows.append(p.to_vector())
    return np.stack(rows) if rows else np.empty((0, 75))


def save_features(path, frames, x: np.ndarray, classes) -> None:
    with open(path, "w") as f:
        for t, v, c in zip(frames, x, classes):
            f.write(json.dumps({"t": int(t), "v": [float(a) for a in v], "class": int(c)}) + "\n")


def load_features(path):
    frames, rows, classes = [], [], []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            frames.append(int(rec["t"]))
            rows.append(np.array(rec["v"], dtype=float))
            classes.append(int(rec["class"]))
    x = np.stack(rows) if rows else np.empty((0, 0))
    return np.array(frames, dtype=int), x, np.array(classes, dtype=int)


@dataclass
class TrainedModels:
    cluster: ClusterModel
    bank: ExemplarBank
    theta_sit: float
    window: int = 30
    feature_mode: str = "homography"
    camera: CameraIntrinsics | None = None
    classifier: str = "forest"
    forest: ForestModel | None = None
    knn: KnnModel | None = None
    knn_k: int = 30
    train_features: np.ndarray | None = None
    train_feature_frames: np.ndarray | None = None

    def cluster_probs(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.classifier == "forest":
            return forest_proba_batch(self.forest, x)
        return np.stack([knn_proba(self.knn, v, self.knn_k) for v in x])

    def save(self, out_dir) -> None:
        os.makedirs(out_dir, exist_ok=True)
        self.cluster.save(os.path.join(out_dir, "clusters.json"))
        self.bank.save(os.path.join(out_dir, "bank.json"))
        if self.forest is not None:
            self.forest.save(os.path.join(out_dir, "forest.json"))
        if self.knn is not None:
            self.knn.save(os.path.join(out_dir, "knn.json"))
        if self.train_features is not None:
            classes = self.bank.cluster_of[self.train_feature_frames]
            save_features(
                os.path.join(out_dir, "features.jsonl"),
                self.train_feature_frames,
                self.train_features,
                classes,
            )
        meta = {
            "theta_sit": self.theta_sit,
            "window": self.window,
            "feature_mode": self.feature_mode,
            "classifier": self.classifier,
            "knn_k": self.knn_k,
        }
        if self.camera is not None:
            c = self.camera
            meta["camera"] = {"fx": c.fx, "fy": c.fy, "cx": c.cx, "cy": c.cy, "skew": c.skew}
        with open(os.path.join(out_dir, "meta.json"), "w") as f:
            json.dump(meta, f, indent=2)

    @classmethod
    def load(cls, in_dir) -> "TrainedModels":
        with open(os.path.join(in_dir, "meta.json")) as f:
            meta = json.load(f)
        cluster = ClusterModel.load(os.path.join(in_dir, "clusters.json"))
        bank = ExemplarBank.load(os.path.join(in_dir, "bank.json"))
        forest = knn = None
        fpath = os.path.join(in_dir, "forest.json")
        if os.path.exists(fpath):
            forest = ForestModel.load(fpath)
        kpath = os.path.join(in_dir, "knn.json")
        if os.path.exists(kpath):
            knn = KnnModel.load(kpath)
        camera = None
        if "camera" in meta:
            camera = CameraIntrinsics(**meta["camera"])
        feats = frames = None
        feat_path = os.path.join(in_dir, "features.jsonl")
        if os.path.exists(feat_path):
            frames, feats, _ = load_features(feat_path)
        return cls(
            cluster,
            bank,
            float(meta["theta_sit"]),
            window=int(meta["window"]),
            feature_mode=meta["feature_mode"],
            camera=camera,
            classifier=meta["classifier"],
            forest=forest,
            knn=knn,
            knn_k=int(meta.get("knn_k", 30)),
            train_features=feats,
            train_feature_frames=frames,
        )


def train_models(
    sequences,
    homographies_per_seq,
    k: int = 300,
    window: int = 30,
    feature_mode: str = "homography",
    camera: CameraIntrinsics | None = None,
    classifier: str = "forest",
    n_trees: int = 100,
    knn_k: int = 30,
    seed: int = 0,
    theta_sit: float | None = None,
    up: np.ndarray = UP_AXIS,
) -> TrainedModels:
    """Cluster the training poses, label the clusters, build the bank and
    the neighbor graph, then fit the per-frame classifier on motion features.

    sequences and homographies_per_seq run in parallel; sequence boundaries
    become bank breaks so neighbor edges never span two recordings.
    """
    if len(sequences) != len(homographies_per_seq):
        raise LengthMismatch("one homography list per pose sequence required")
    mats, breaks, offset = [], [], 0
    for seq, hs in zip(sequences, homographies_per_seq):
        if len(hs) != len(seq) - 1:
            raise LengthMismatch("need len(poses) - 1 homographies per sequence")
        if offset > 0:
            breaks.append(offset)
        mats.append(normalized_matrix(seq, up))
        offset += len(seq)
    all_poses = np.vstack(mats)

    cluster = kmeans(all_poses, k, seed=seed)
    if theta_sit is None:
        theta_sit = sit_stand_threshold(np.array([hip_height(v) for v in all_poses]))
    label_clusters(cluster, all_poses, theta_sit)
    assignments = assign_clusters(cluster, all_poses)
    bank = ExemplarBank.build(all_poses, assignments, breaks, k)

    x_rows, frame_rows = [], []
    offset = 0
    for seq, hs in zip(sequences, homographies_per_seq):
        x, centers = features_from_homographies(hs, window, feature_mode, camera)
        if len(centers):
            x_rows.append(x)
            frame_rows.append(centers + offset)
        offset += len(seq)
    if not x_rows:
        raise OutOfRange("no frame has a full feature window")
    features = np.vstack(x_rows)
    feature_frames = np.concatenate(frame_rows)
    targets = assignments[feature_frames]

    forest = knn = None
    if classifier == "forest":
        forest = train_forest(features, targets, n_trees=n_trees, seed=seed, n_classes=k)
    elif classifier == "knn":
        knn = KnnModel(features, targets, k, feature_frames)
    else:
        raise ValueError(f"unknown classifier {classifier!r}")
    return TrainedModels(
        cluster,
        bank,
        float(theta_sit),
        window=window,
        feature_mode=feature_mode,
        camera=camera,
        classifier=classifier,
        forest=forest,
        knn=knn,
        knn_k=knn_k,
        train_features=features,
        train_feature_frames=feature_frames,
    )


@dataclass
class InferenceResult:
    centers: np.ndarray  # original frame index of each decoded pose
    poses: PoseSequence  # wearer-local
    path: PosePath | None  # None for the non-path solvers
    dists: np.ndarray  # (M, K) classifier outputs
    timings: dict = field(default_factory=dict)

    def save(self, out_dir, bank: ExemplarBank | None = None) -> None:
        os.makedirs(out_dir, exist_ok=True)
        from .skeleton import save_pose_sequence

        save_pose_sequence(os.path.join(out_dir, "poses.jsonl"), self.poses, times=self.centers)
        if self.path is not None and bank is not None:
            self.path.save(os.path.join(out_dir, "path.jsonl"), bank)
            self.path.save_energy(os.path.join(out_dir, "energy.json"))
        with open(os.path.join(out_dir, "timings.json"), "w") as f:
            json.dump(self.timings, f, indent=2)


def infer(
    hs,
    models: TrainedModels,
    static_h: np.ndarray | None = None,
    cost_params: CostParams = CostParams(),
    path_params: PathParams = PathParams(),
    solver: str = "paper",
) -> InferenceResult:
    """Decode a pose sequence from a homography stream.

    static_h covers the full stream (len(hs) + 1 frames); None means the
    uninformative constant 0.5. Solvers: the first-order DP ("paper"), the
    exact DP ("exact"), the two-stage baseline ("path-cluster"), nearest
    feature neighbor ("kdtree"), and the constant-pose baselines.
    """
    if solver not in SOLVERS:
        raise ValueError(f"unknown solver {solver!r}")
    n_frames = len(hs) + 1
    if static_h is None:
        static_h = constant_static(n_frames)
    static_h = np.asarray(static_h, dtype=float)
    if len(static_h) != n_frames:
        raise LengthMismatch(f"{len(static_h)} static values for {n_frames} frames")

    timings = {}
    t0 = time.perf_counter()
    x, centers = features_from_homographies(hs, models.window, models.feature_mode, models.camera)
    if not len(centers):
        raise OutOfRange("stream too short for one feature window")
    timings["features_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    if solver in ("paper", "exact", "path-cluster"):
        dists = models.cluster_probs(x)
    else:  # baselines never consult the classifier; keep the shape contract
        dists = np.full((len(centers), models.bank.k), 1.0 / models.bank.k)
    timings["classify_s"] = time.perf_counter() - t0

    bank, labels = models.bank, models.cluster.labels
    path = None
    t0 = time.perf_counter()
    if solver in ("paper", "exact", "path-cluster"):
        costs = unary_costs(dists, static_h[centers], bank, labels, cost_params)
        solve = {
            "paper": lambda tr: solve_paper_dp(tr, path_params),
            "exact": lambda tr: solve_exact_dp(tr, path_params),
            "path-cluster": lambda tr: solve_path_cluster(tr, dists, path_params),
        }[solver]
        # an over-aggressive prune can strand the path; relax until feasible
        # (threshold 0 always is: staying put costs a finite amount)
        thr = cost_params.prune_threshold
        retries = 0
        while True:
            cp = CostParams(cost_params.delta, cost_params.tau, thr, cost_params.literal_mismatch)
            trellis = Trellis.from_costs(prune(costs, dists, bank, cp), bank)
            if retries == 0:
                timings["costs_s"] = time.perf_counter() - t0
                t0 = time.perf_counter()
            try:
                path = solve(trellis)
                break
            except Infeasible:
                if thr == 0.0:
                    raise
                thr = 0.0 if thr < 1e-6 else thr / 10.0
                retries += 1
        timings["prune_retries"] = retries
        vecs = bank.poses[path.indices]
        poses = PoseSequence([Pose.from_vector(v, Frame.WEARER_LOCAL) for v in vecs])
    elif solver == "kdtree":
        if models.train_features is None:
            raise ValueError("kdtree solver needs stored training features")
        poses = baseline_kdtree(models.train_features, bank.poses[models.train_feature_frames], x)
    else:
        mode = SitStand.STANDING_LIKE if solver == "always-standing" else SitStand.SITTING_LIKE
        p = baseline_constant(bank, labels, mode)
        poses = PoseSequence([p] * len(centers))
    timings["solve_s"] = time.perf_counter() - t0
    timings["solve_per_frame_s"] = timings["solve_s"] / len(centers)
    timings["total_s"] = sum(v for k, v in timings.items() if k.endswith("_s") and k != "solve_per_frame_s")
    timings["total_per_frame_s"] = timings["total_s"] / len(centers)
    return InferenceResult(centers, poses, path, dists, timings)
