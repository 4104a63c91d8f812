"""Integration tests for feature building, model training, and inference."""

import numpy as np
import pytest

from egopose import (
    CostParams,
    Frame,
    LengthMismatch,
    MotionScript,
    OutOfRange,
    PathParams,
    TrainedModels,
    features_from_homographies,
    generate,
    infer,
    load_features,
    normalize_pose,
    normalized_matrix,
    save_features,
    train_models,
    valid_feature_centers,
)
from egopose.pipeline import SOLVERS, UP_AXIS


def make_homographies(n, seed=0, scale=0.02):
    rng = np.random.default_rng(seed)
    from egopose import Homography

    out = []
    for _ in range(n):
        m = np.eye(3) + rng.normal(0.0, scale, size=(3, 3))
        out.append(Homography.from_matrix(m))
    return out


def training_material(seed=0, n_idle=40, n_walk=50, n_sit=30):
    """Two short scripted recordings plus their homography streams."""
    a = generate(
        MotionScript(
            [("stand_idle", n_idle), ("sit_down", 20), ("sit_idle", n_sit)],
            seed=seed,
            pixel_noise=0.0,
        )
    )
    b = generate(MotionScript([("walk", n_walk), ("turn_left", 15)], seed=seed + 1, pixel_noise=0.0))
    sequences = [a.poses, b.poses]
    streams = [a.homographies, b.homographies]
    return sequences, streams, a, b


# ---------------------------------------------------------------------------
# feature windows


def test_valid_feature_centers_bounds():
    centers = valid_feature_centers(100, 30)
    assert centers[0] == 14
    assert centers[-1] == 84
    assert len(centers) == 71
    assert valid_feature_centers(30, 30).tolist() == [14]
    assert valid_feature_centers(29, 30).size == 0
    # a 2-frame window pairs every frame with its successor
    assert valid_feature_centers(5, 2).tolist() == [0, 1, 2, 3]


def test_features_match_manual_concatenation():
    hs = make_homographies(12, seed=1)
    x, centers = features_from_homographies(hs, window=4)
    assert x.shape == (len(centers), 9 * 3)
    for row, c in zip(x, centers):
        start = c - 1  # (window - 1) // 2 homographies to the left
        expected = np.concatenate([hs[i].h.reshape(-1) for i in range(start, start + 3)])
        assert np.allclose(row, expected)


def test_features_explicit_centers_subset():
    hs = make_homographies(12, seed=2)
    full, centers = features_from_homographies(hs, window=4)
    some, got = features_from_homographies(hs, window=4, centers=[3, 7])
    assert got.tolist() == [3, 7]
    lookup = {c: row for c, row in zip(centers, full)}
    assert np.allclose(some[0], lookup[3])
    assert np.allclose(some[1], lookup[7])


def test_rotation_features_need_camera():
    hs = make_homographies(8, seed=3, scale=0.005)
    with pytest.raises(ValueError):
        features_from_homographies(hs, window=4, mode="rotation")
    from egopose import rotation_from_homography
    from egopose.synth import default_camera

    cam = default_camera()
    x, centers = features_from_homographies(hs, window=4, mode="rotation", camera=cam)
    for row, c in zip(x, centers):
        expected = np.concatenate(
            [rotation_from_homography(hs[i], cam).reshape(-1) for i in range(c - 1, c + 2)]
        )
        assert np.allclose(row, expected)


def test_unknown_feature_mode_rejected():
    hs = make_homographies(6)
    with pytest.raises(ValueError):
        features_from_homographies(hs, window=4, mode="affine")


def test_normalized_matrix_converts_sensor_poses():
    out = generate(MotionScript([("walk", 10)], seed=4))
    mat = normalized_matrix(out.poses)
    assert mat.shape == (10, 75)
    for row, p in zip(mat, out.poses.poses):
        expected = normalize_pose(p, UP_AXIS).to_vector()
        assert np.allclose(row, expected)
    assert out.poses.poses[0].frame == Frame.SENSOR


def test_feature_file_round_trip(tmp_path):
    rng = np.random.default_rng(6)
    frames = np.array([3, 4, 9])
    x = rng.normal(size=(3, 27))
    classes = np.array([0, 2, 1])
    path = tmp_path / "features.jsonl"
    save_features(path, frames, x, classes)
    f2, x2, c2 = load_features(path)
    assert np.array_equal(f2, frames)
    assert np.array_equal(x2, x)
    assert np.array_equal(c2, classes)


# ---------------------------------------------------------------------------
# training


def test_train_models_validates_lengths():
    sequences, streams, _, _ = training_material()
    with pytest.raises(LengthMismatch):
        train_models(sequences, streams[:1], k=4, window=8)
    with pytest.raises(LengthMismatch):
        train_models(sequences, [streams[0][:-2], streams[1]], k=4, window=8)


def test_train_models_builds_consistent_bundle():
    sequences, streams, _, _ = training_material()
    models = train_models(sequences, streams, k=6, window=8, n_trees=15, seed=0)
    n_total = sum(len(s) for s in sequences)
    assert models.bank.poses.shape == (n_total, 75)
    assert models.bank.sequence_breaks.tolist() == [len(sequences[0])]
    assert models.bank.k == 6
    assert len(models.cluster.labels) == 6
    assert models.classifier == "forest" and models.forest is not None
    # feature frames must carry the per-sequence offset
    first_len = len(sequences[0])
    in_second = models.train_feature_frames >= first_len
    assert in_second.any() and (~in_second).any()
    probs = models.cluster_probs(models.train_features[:5])
    assert probs.shape == (5, 6)
    assert np.allclose(probs.sum(axis=1), 1.0)


def test_train_models_knn_classifier():
    sequences, streams, _, _ = training_material(seed=10)
    models = train_models(sequences, streams, k=5, window=8, classifier="knn", knn_k=7)
    assert models.forest is None and models.knn is not None
    probs = models.cluster_probs(models.train_features[:4])
    assert probs.shape == (4, 5)
    assert np.allclose(probs.sum(axis=1), 1.0)
    with pytest.raises(ValueError):
        train_models(sequences, streams, k=5, window=8, classifier="svm")


def test_trained_models_save_load_parity(tmp_path):
    sequences, streams, _, _ = training_material(seed=20)
    models = train_models(sequences, streams, k=5, window=8, n_trees=10, seed=1)
    models.save(tmp_path)
    again = TrainedModels.load(tmp_path)
    assert again.theta_sit == pytest.approx(models.theta_sit)
    assert again.window == models.window
    assert again.feature_mode == models.feature_mode
    assert again.classifier == models.classifier
    assert np.array_equal(again.bank.cluster_of, models.bank.cluster_of)
    assert np.array_equal(again.bank.sequence_breaks, models.bank.sequence_breaks)
    assert np.allclose(again.bank.poses, models.bank.poses)
    assert np.array_equal(again.train_feature_frames, models.train_feature_frames)
    x = models.train_features[:6]
    assert np.allclose(again.cluster_probs(x), models.cluster_probs(x))


# ---------------------------------------------------------------------------
# inference


@pytest.fixture(scope="module")
def trained():
    sequences, streams, _, _ = training_material(seed=30)
    return train_models(sequences, streams, k=6, window=8, n_trees=15, seed=2)


@pytest.fixture(scope="module")
def test_stream():
    out = generate(
        MotionScript([("stand_idle", 20), ("sit_down", 20), ("sit_idle", 20)], seed=99, pixel_noise=0.0)
    )
    return out


def test_infer_paper_returns_full_cover(trained, test_stream):
    result = infer(test_stream.homographies, trained, static_h=test_stream.static_h)
    n_frames = len(test_stream.homographies) + 1
    expected_centers = valid_feature_centers(n_frames, trained.window)
    assert np.array_equal(result.centers, expected_centers)
    assert len(result.poses) == len(expected_centers)
    assert result.path is not None
    assert len(result.path.indices) == len(expected_centers)
    assert all(0 <= i < len(trained.bank.poses) for i in result.path.indices)
    assert result.poses.poses[0].frame == Frame.WEARER_LOCAL
    for key in ("features_s", "classify_s", "costs_s", "solve_s", "total_s", "prune_retries"):
        assert key in result.timings
    assert result.dists.shape == (len(expected_centers), trained.bank.k)


def test_infer_exact_never_worse_than_paper(trained, test_stream):
    paper = infer(test_stream.homographies, trained, static_h=test_stream.static_h, solver="paper")
    exact = infer(test_stream.homographies, trained, static_h=test_stream.static_h, solver="exact")
    assert exact.path.total <= paper.path.total + 1e-9


def test_infer_constant_baselines(trained, test_stream):
    for solver in ("always-standing", "always-sitting"):
        result = infer(test_stream.homographies, trained, solver=solver)
        assert result.path is None
        first = result.poses.poses[0].to_vector()
        for p in result.poses.poses:
            assert np.array_equal(p.to_vector(), first)


def test_infer_kdtree_baseline(trained, test_stream):
    result = infer(test_stream.homographies, trained, solver="kdtree")
    assert result.path is None
    assert len(result.poses) == len(result.centers)
    bank_rows = {tuple(np.round(v, 9)) for v in trained.bank.poses}
    for p in result.poses.poses:
        assert tuple(np.round(p.to_vector(), 9)) in bank_rows


def test_infer_validates_inputs(trained, test_stream):
    with pytest.raises(ValueError):
        infer(test_stream.homographies, trained, solver="magic")
    with pytest.raises(LengthMismatch):
        infer(test_stream.homographies, trained, static_h=np.zeros(3))
    with pytest.raises(OutOfRange):
        infer(test_stream.homographies[:3], trained)


def test_infer_default_static_is_uninformative(trained, test_stream):
    implicit = infer(test_stream.homographies, trained)
    explicit = infer(
        test_stream.homographies,
        trained,
        static_h=np.full(len(test_stream.homographies) + 1, 0.5),
    )
    assert implicit.path.indices == explicit.path.indices
    assert implicit.path.total == pytest.approx(explicit.path.total)


def test_infer_survives_overconfident_classifier():
    """Noise-free idle blocks give bit-identical features; the forest then
    votes probability one and aggressive pruning can strand the path. The
    solver must relax the threshold instead of failing."""
    sequences, streams, _, _ = training_material(seed=40)
    models = train_models(sequences, streams, k=8, window=8, n_trees=15, seed=3)
    probe = generate(
        MotionScript([("stand_idle", 30), ("walk", 30)], seed=77, pixel_noise=0.0)
    )
    result = infer(
        probe.homographies,
        models,
        static_h=probe.static_h,
        cost_params=CostParams(prune_threshold=0.2),
    )
    assert len(result.path.indices) == len(result.centers)
    assert result.timings["prune_retries"] >= 0


def test_inference_result_save(tmp_path, trained, test_stream):
    result = infer(test_stream.homographies, trained, static_h=test_stream.static_h)
    result.save(tmp_path, trained.bank)
    assert (tmp_path / "poses.jsonl").exists()
    assert (tmp_path / "path.jsonl").exists()
    assert (tmp_path / "energy.json").exists()
    assert (tmp_path / "timings.json").exists()
    import json

    energy = json.loads((tmp_path / "energy.json").read_text())
    assert energy["total"] == pytest.approx(result.path.total)
    assert set(energy) == {"U", "T", "V", "S", "total"}


def test_solver_registry_is_complete():
    assert set(SOLVERS) == {
        "paper",
        "exact",
        "path-cluster",
        "kdtree",
        "always-standing",
        "always-sitting",
    }


def test_infer_path_cluster_runs(trained, test_stream):
    result = infer(
        test_stream.homographies, trained, static_h=test_stream.static_h, solver="path-cluster"
    )
    assert result.path is not None
    paper = infer(test_stream.homographies, trained, static_h=test_stream.static_h)
    # the restriction can only tie or lose against the unrestricted DP
    exact = infer(test_stream.homographies, trained, static_h=test_stream.static_h, solver="exact")
    assert result.path.total >= exact.path.total - 1e-9
    assert paper.path.total >= exact.path.total - 1e-9
