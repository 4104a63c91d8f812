"""Command line front end: synth, cluster, train, infer, eval.

One JSON config carries every tunable (cost and path parameters, cluster
count, feature window); explicit flags override config values. Errors print
a machine-readable JSON object on stderr. Exit codes: 0 success, 2 usage or
config error, 3 data error, 4 infeasible or degenerate input.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .classify import ForestModel, KnnModel, load_static, train_forest
from .clustering import (
    ClusterModel,
    ExemplarBank,
    assign_clusters,
    hip_height,
    kmeans,
    label_clusters,
    sit_stand_threshold,
)
from .costs import CostParams
from .errors import (
    DegenerateConfiguration,
    DegenerateLabels,
    DegeneratePose,
    EgoPoseError,
    Infeasible,
    InfeasiblePath,
    NormalizationFailure,
    SingularMatrix,
    StateExplosion,
    TooLarge,
)
from .evaluation import joint_errors
from .geometry import CameraIntrinsics, estimate_homography, load_correspondences, load_homographies
from .pathopt import PathParams
from .pipeline import (
    SOLVERS,
    TrainedModels,
    features_from_homographies,
    infer,
    load_features,
    normalized_matrix,
    save_features,
)
from .skeleton import load_pose_sequence_with_times, save_pose_sequence
from .synth import MotionScript, generate

DEFAULT_CONFIG = {
    "delta": 0.1,
    "tau": 0.99,
    "prune": 0.01,
    "speed_gamma": 10,
    "speed_mu": 0.01,
    "stat_gamma": 5,
    "stat_mu": 0.02,
    "k": 300,
    "window": 30,
    "feature_mode": "homography",
    "trees": 100,
    "knn_k": 30,
    "seed": 0,
}

_DEGENERATE = (
    Infeasible,
    InfeasiblePath,
    StateExplosion,
    TooLarge,
    DegeneratePose,
    DegenerateConfiguration,
    DegenerateLabels,
    SingularMatrix,
    NormalizationFailure,
)


def _fail(err, code):
    msg = {"error": type(err).__name__, "message": str(err)}
    print(json.dumps(msg), file=sys.stderr)
    return code


def _load_config(args) -> dict:
    cfg = dict(DEFAULT_CONFIG)
    path = getattr(args, "config", None)
    if path:
        with open(path) as f:
            loaded = json.load(f)
        unknown = set(loaded) - set(cfg)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(loaded)
    for key in cfg:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    return cfg


def _cost_params(cfg) -> CostParams:
    return CostParams(delta=cfg["delta"], tau=cfg["tau"], prune_threshold=cfg["prune"])


def _path_params(cfg) -> PathParams:
    return PathParams(
        delta=cfg["delta"],
        speed_gamma=cfg["speed_gamma"],
        speed_mu=cfg["speed_mu"],
        stat_gamma=cfg["stat_gamma"],
        stat_mu=cfg["stat_mu"],
    )


def _load_camera(path) -> CameraIntrinsics:
    with open(path) as f:
        rec = json.load(f)
    if "intrinsics" in rec:  # accept a synth manifest directly
        rec = rec["intrinsics"]
    return CameraIntrinsics(
        fx=float(rec["fx"]),
        fy=float(rec["fy"]),
        cx=float(rec["cx"]),
        cy=float(rec["cy"]),
        skew=float(rec.get("skew", 0.0)),
    )


def _ensure_parent(path) -> str:
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    return path


def _load_stream(path):
    """Homography list from either a homography or a correspondence file."""
    with open(path) as f:
        first = ""
        for line in f:
            line = line.strip()
            if line:
                first = line
                break
    if not first:
        raise ValueError(f"{path}: empty input stream")
    keys = set(json.loads(first))
    if "h" in keys:
        return load_homographies(path)
    if {"src", "dst"} <= keys:
        pairs = load_correspondences(path)
        return [estimate_homography(src, dst) for src, dst in pairs]
    raise ValueError(f"{path}: expected homography or correspondence records")


def cmd_synth(args):
    script = MotionScript.from_json(args.script)
    if args.seed is not None:
        script.seed = int(args.seed)
    result = generate(script)
    result.write(args.out_dir)
    print(f"wrote {len(result.poses)} frames to {args.out_dir}")
    return 0


def cmd_cluster(args):
    cfg = _load_config(args)
    sequences = []
    for path in args.poses:
        seq, _ = load_pose_sequence_with_times(path)
        sequences.append(seq)
    mats, breaks, offset = [], [], 0
    for seq in sequences:
        if offset > 0:
            breaks.append(offset)
        mats.append(normalized_matrix(seq))
        offset += len(seq)
    all_poses = np.vstack(mats)

    model = kmeans(all_poses, int(cfg["k"]), seed=int(cfg["seed"]))
    theta = sit_stand_threshold(np.array([hip_height(v) for v in all_poses]))
    label_clusters(model, all_poses, theta)
    assignments = assign_clusters(model, all_poses)
    bank = ExemplarBank.build(all_poses, assignments, breaks, model.k)

    model.save(_ensure_parent(args.out))
    bank_out = args.bank_out or os.path.join(os.path.dirname(os.path.abspath(args.out)), "bank.json")
    bank.save(_ensure_parent(bank_out))
    print(f"k-means objective: {model.objective:.6f} after {model.n_iter} iterations")

    if args.homographies:
        if len(args.homographies) != len(sequences):
            raise ValueError("need one homography file per pose file")
        camera = _load_camera(args.camera) if args.camera else None
        rows, frames = [], []
        offset = 0
        for seq, hpath in zip(sequences, args.homographies):
            hs = _load_stream(hpath)
            if len(hs) != len(seq) - 1:
                raise ValueError(f"{hpath}: need len(poses) - 1 homographies")
            x, centers = features_from_homographies(hs, int(cfg["window"]), cfg["feature_mode"], camera)
            if len(centers):
                rows.append(x)
                frames.append(centers + offset)
            offset += len(seq)
        if not rows:
            raise ValueError("no frame has a full feature window")
        feats = np.vstack(rows)
        frames = np.concatenate(frames)
        feat_out = args.features_out or os.path.join(
            os.path.dirname(os.path.abspath(args.out)), "features.jsonl"
        )
        save_features(_ensure_parent(feat_out), frames, feats, assignments[frames])
        print(f"wrote {len(frames)} feature rows to {feat_out}")
    return 0


def cmd_train(args):
    cfg = _load_config(args)
    frames, x, classes = load_features(args.features)
    if len(x) == 0:
        raise ValueError(f"{args.features}: no feature rows")
    if args.bank:
        n_classes = ExemplarBank.load(args.bank).k
    else:
        n_classes = int(classes.max()) + 1
    if args.classifier == "forest":
        model = train_forest(x, classes, n_trees=int(cfg["trees"]), seed=int(cfg["seed"]), n_classes=n_classes)
        model.save(_ensure_parent(args.out))
        print(f"oob accuracy: {model.oob_accuracy:.4f}")
    else:
        model = KnnModel(x, classes, n_classes, frames)
        model.save(_ensure_parent(args.out))
        if args.loo:
            k = int(cfg["knn_k"])
            hits = 0
            for i in range(len(x)):
                nn = model.index().query(x[i], min(k + 1, len(x)))
                nn = nn[nn != i][:k]
                votes = np.bincount(classes[nn], minlength=n_classes)
                hits += int(votes.argmax() == classes[i])
            print(f"leave-one-out accuracy: {hits / len(x):.4f}")
    return 0


def cmd_infer(args):
    cfg = _load_config(args)
    hs = _load_stream(args.input)
    n_frames = len(hs) + 1
    cluster = ClusterModel.load(args.cluster_model)
    bank = ExemplarBank.load(args.bank)
    if cluster.labels is None:
        raise ValueError("cluster model carries no sit/stand labels")

    forest = knn = None
    classifier = "forest"
    if args.solver in ("paper", "exact", "path-cluster"):
        if not args.classifier_model:
            raise ValueError(f"solver {args.solver} needs --classifier-model")
        with open(args.classifier_model) as f:
            rec = json.load(f)
        if "trees" in rec:
            forest = ForestModel.load(args.classifier_model)
        else:
            knn = KnnModel.load(args.classifier_model)
            classifier = "knn"

    train_feats = train_frames = None
    if args.solver == "kdtree":
        if not args.features:
            raise ValueError("solver kdtree needs --features")
        train_frames, train_feats, _ = load_features(args.features)

    camera = _load_camera(args.camera) if args.camera else None
    models = TrainedModels(
        cluster,
        bank,
        theta_sit=0.0,
        window=int(cfg["window"]),
        feature_mode=cfg["feature_mode"],
        camera=camera,
        classifier=classifier,
        forest=forest,
        knn=knn,
        knn_k=int(cfg["knn_k"]),
        train_features=train_feats,
        train_feature_frames=train_frames,
    )

    static_h = load_static(args.static_h, expected_frames=n_frames) if args.static_h else None
    result = infer(
        hs,
        models,
        static_h=static_h,
        cost_params=_cost_params(cfg),
        path_params=_path_params(cfg),
        solver=args.solver,
    )

    poses_out = args.poses_out or (os.path.splitext(args.out)[0] + "_poses.jsonl")
    save_pose_sequence(_ensure_parent(poses_out), result.poses, times=result.centers)
    if result.path is not None:
        result.path.save(_ensure_parent(args.out), bank)
        e = result.path.energy_dict()
        print(
            "energy: U={U:.6f} T={T:.6f} V={V:.6f} S={S:.6f} total={total:.6f}".format(**e)
        )
    t = result.timings
    print(
        f"timing: {t['total_per_frame_s'] * 1e3:.2f} ms/frame total, "
        f"{t['solve_per_frame_s'] * 1e3:.2f} ms/frame solver, {len(result.centers)} frames"
    )
    if t["total_per_frame_s"] > 0.5:
        print(f"warning: {t['total_per_frame_s']:.3f} s/frame exceeds the 0.5 s/frame budget")
    print(f"wrote poses to {poses_out}" + ("" if result.path is None else f", path to {args.out}"))
    return 0


def cmd_eval(args):
    pred, pred_t = load_pose_sequence_with_times(args.pred)
    gt, gt_t = load_pose_sequence_with_times(args.gt)
    common, pi, gi = np.intersect1d(pred_t, gt_t, return_indices=True)
    if len(common) == 0:
        raise ValueError("prediction and ground truth share no frame indices")
    from .skeleton import Frame, Pose, PoseSequence, normalize_pose

    def subset(seq, idx):
        poses = []
        for i in idx:
            p = seq.poses[i]
            if p.frame != Frame.WEARER_LOCAL:
                p = normalize_pose(p, np.array([0.0, 0.0, 1.0]))
            poses.append(p)
        return PoseSequence(poses)

    report = joint_errors(subset(pred, pi), subset(gt, gi))
    report.save(_ensure_parent(args.out))
    print(report.format_table())
    return 0


def _add_config_flags(p):
    p.add_argument("--config", help="JSON config; flags override its values")
    p.add_argument("--seed", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="egopose", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("synth", help="generate scripted synthetic data")
    p.add_argument("--script", required=True, help="motion script JSON")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=None, help="override the script seed")

    p = sub.add_parser("cluster", help="cluster poses, build the exemplar bank")
    p.add_argument("--poses", nargs="+", required=True, help="pose JSONL files, one per recording")
    p.add_argument("--out", required=True, help="cluster model output")
    p.add_argument("--bank-out", help="bank output (default: bank.json beside --out)")
    p.add_argument("--homographies", nargs="*", default=None, help="emit features for these streams")
    p.add_argument("--features-out", help="feature output (default: features.jsonl beside --out)")
    p.add_argument("--camera", help="intrinsics JSON, needed for rotation features")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--feature-mode", dest="feature_mode", choices=("homography", "rotation"), default=None)
    _add_config_flags(p)

    p = sub.add_parser("train", help="fit the per-frame cluster classifier")
    p.add_argument("--features", required=True, help="feature JSONL from cluster")
    p.add_argument("--bank", help="bank JSON, fixes the class count")
    p.add_argument("--classifier", choices=("forest", "knn"), default="forest")
    p.add_argument("--trees", type=int, default=None)
    p.add_argument("--knn-k", dest="knn_k", type=int, default=None)
    p.add_argument("--loo", action="store_true", help="print knn leave-one-out accuracy")
    p.add_argument("--out", required=True)
    _add_config_flags(p)

    p = sub.add_parser("infer", help="decode a pose path from camera motion")
    p.add_argument("--input", required=True, help="homography or correspondence JSONL")
    p.add_argument("--bank", required=True)
    p.add_argument("--cluster-model", dest="cluster_model", required=True)
    p.add_argument("--classifier-model", dest="classifier_model")
    p.add_argument("--static-h", dest="static_h", help="per-frame sitting probability JSONL")
    p.add_argument("--features", help="training features, needed by --solver kdtree")
    p.add_argument("--camera", help="intrinsics JSON, needed for rotation features")
    p.add_argument("--solver", choices=SOLVERS, default="paper")
    p.add_argument("--out", required=True, help="pose path output JSONL")
    p.add_argument("--poses-out", dest="poses_out", help="default: <out>_poses.jsonl")
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--feature-mode", dest="feature_mode", choices=("homography", "rotation"), default=None)
    p.add_argument("--knn-k", dest="knn_k", type=int, default=None)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--prune", type=float, default=None)
    _add_config_flags(p)

    p = sub.add_parser("eval", help="per-joint error report, prediction vs ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--out", required=True, help="report JSON output")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "synth": cmd_synth,
        "cluster": cmd_cluster,
        "train": cmd_train,
        "infer": cmd_infer,
        "eval": cmd_eval,
    }
    try:
        return handlers[args.cmd](args)
    except _DEGENERATE as e:
        return _fail(e, 4)
    except EgoPoseError as e:
        return _fail(e, 3)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as e:
        return _fail(e, 3)


if __name__ == "__main__":
    sys.exit(main())
