"""Egocentric pose-path estimation from chest-camera motion.

The pipeline: normalized 25-joint poses are clustered into pose classes; a
per-frame classifier maps one-second homography stacks to cluster
probabilities; unary costs combine those with a static sitting prior; a
dynamic program then threads a path through the exemplar bank restricted to
neighbor clusters, trading unary cost against transition, speed, and
stationary penalties.
"""

from .errors import (
    DegenerateConfiguration,
    DegenerateLabels,
    DegeneratePose,
    DimMismatch,
    EgoPoseError,
    EmptyLabel,
    EmptyModel,
    FrameMismatch,
    Infeasible,
    InfeasiblePath,
    InsufficientPoints,
    LengthMismatch,
    NormalizationFailure,
    OutOfRange,
    ScriptError,
    SingularMatrix,
    StateExplosion,
    TooFewPoses,
    TooLarge,
)
from .skeleton import (
    Frame,
    Joint,
    N_JOINTS,
    Pose,
    PoseSequence,
    load_pose_sequence,
    normalize_pose,
    pose_distance,
    save_pose_sequence,
    shoulder_length,
)
from .geometry import (
    CameraIntrinsics,
    FeatureVector,
    Homography,
    estimate_homography,
    feature_window,
    load_correspondences,
    load_homographies,
    rotation_from_homography,
    save_correspondences,
    save_homographies,
)
from .clustering import (
    ClusterModel,
    ExemplarBank,
    SitStand,
    assign_cluster,
    assign_clusters,
    build_neighbor_graph,
    hip_height,
    kmeans,
    label_clusters,
    sit_stand_threshold,
)
from .classify import (
    ForestModel,
    KnnIndex,
    KnnModel,
    constant_static,
    dynamic_sit_stand,
    forest_proba,
    forest_proba_batch,
    knn_proba,
    load_static,
    save_static,
    train_forest,
)
from .costs import CostParams, UnaryCosts, prune, unary_costs
from .pathopt import (
    NodeState,
    PathParams,
    PosePath,
    Trellis,
    brute_force,
    energy_of_path,
    solve_exact_dp,
    solve_paper_dp,
    solve_path_cluster,
    speed_term,
    stationary_term,
    step_weight,
)
from .evaluation import (
    CM_PER_UNIT,
    JOINT_GROUPS,
    ErrorReport,
    GroupError,
    align_for_eval,
    baseline_constant,
    baseline_kdtree,
    joint_errors,
)
from .synth import MotionScript, Primitive, SynthResult, default_camera, generate
from .pipeline import (
    InferenceResult,
    TrainedModels,
    features_from_homographies,
    infer,
    load_features,
    normalized_matrix,
    save_features,
    train_models,
    valid_feature_centers,
)

__version__ = "0.1.0"

__all__ = [
    "CM_PER_UNIT",
    "CameraIntrinsics",
    "ClusterModel",
    "CostParams",
    "DegenerateConfiguration",
    "DegenerateLabels",
    "DegeneratePose",
    "DimMismatch",
    "EgoPoseError",
    "EmptyLabel",
    "EmptyModel",
    "ErrorReport",
    "ExemplarBank",
    "FeatureVector",
    "ForestModel",
    "Frame",
    "FrameMismatch",
    "GroupError",
    "Homography",
    "Infeasible",
    "InfeasiblePath",
    "InferenceResult",
    "InsufficientPoints",
    "JOINT_GROUPS",
    "Joint",
    "KnnIndex",
    "KnnModel",
    "LengthMismatch",
    "MotionScript",
    "N_JOINTS",
    "NodeState",
    "NormalizationFailure",
    "OutOfRange",
    "PathParams",
    "Pose",
    "PosePath",
    "PoseSequence",
    "Primitive",
    "ScriptError",
    "SingularMatrix",
    "SitStand",
    "StateExplosion",
    "SynthResult",
    "TooFewPoses",
    "TooLarge",
    "TrainedModels",
    "Trellis",
    "UnaryCosts",
    "align_for_eval",
    "assign_cluster",
    "assign_clusters",
    "baseline_constant",
    "baseline_kdtree",
    "brute_force",
    "build_neighbor_graph",
    "constant_static",
    "default_camera",
    "dynamic_sit_stand",
    "energy_of_path",
    "estimate_homography",
    "feature_window",
    "features_from_homographies",
    "forest_proba",
    "forest_proba_batch",
    "generate",
    "hip_height",
    "infer",
    "joint_errors",
    "kmeans",
    "knn_proba",
    "label_clusters",
    "load_correspondences",
    "load_features",
    "load_homographies",
    "load_pose_sequence",
    "load_static",
    "normalize_pose",
    "normalized_matrix",
    "pose_distance",
    "prune",
    "rotation_from_homography",
    "save_correspondences",
    "save_features",
    "save_homographies",
    "save_pose_sequence",
    "save_static",
    "shoulder_length",
    "sit_stand_threshold",
    "solve_exact_dp",
    "solve_paper_dp",
    "solve_path_cluster",
    "speed_term",
    "stationary_term",
    "step_weight",
    "train_forest",
    "train_models",
    "unary_costs",
    "valid_feature_centers",
]
