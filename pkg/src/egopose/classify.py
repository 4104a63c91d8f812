"""Per-frame pose-cluster classification.

The primary classifier is a random forest over motion features: each tree is
grown on a bootstrap sample to purity (or until fewer than two samples),
choosing at every node the best Gini split among ceil(sqrt(d)) candidate
features with midpoint thresholds. Tree probabilities are per-leaf
normalized class histograms, averaged over trees. A k-NN classifier over the
same features is available as an alternative probability provider, and a
static per-frame sitting probability h can be read from file or held at the
uninformative constant 0.5.
"""

from __future__ import annotations

import json
import math
import sys
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateLabels, DimMismatch, EmptyModel, LengthMismatch


def _recursion_headroom(n: int = 20000) -> None:
    # trees grown to purity can nest deeply; give tree recursion and the
    # json encoder room to follow them
    if sys.getrecursionlimit() < n:
        sys.setrecursionlimit(n)


# ---------------------------------------------------------------------------
# random forest


@dataclass
class ForestModel:
    """Trees as nested dicts: {"feat", "thresh", "left", "right"} | {"hist"}."""

    trees: list
    feature_dim: int
    n_classes: int
    oob_accuracy: float | None = None  # not serialized

    def save(self, path) -> None:
        _recursion_headroom()
        rec = {
            "feature_dim": self.feature_dim,
            "n_classes": self.n_classes,
            "trees": self.trees,
        }
        with open(path, "w") as f:
            json.dump(rec, f)

    @classmethod
    def load(cls, path) -> "ForestModel":
        _recursion_headroom()
        with open(path) as f:
            rec = json.load(f)
        return cls(rec["trees"], int(rec["feature_dim"]), int(rec["n_classes"]))


def _gini_split(x_col: np.ndarray, y: np.ndarray, n_classes: int):
    """Best midpoint threshold for one feature, or None.

    Returns (loss, threshold) where loss = n - sum_c n_c^2/n summed over the
    two children (n times the weighted Gini impurity, up to a constant).
    """
    order = np.argsort(x_col, kind="stable")
    xs = x_col[order]
    ys = y[order]
    n = len(xs)
    valid = xs[1:] > xs[:-1]
    if not valid.any():
        return None
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), ys] = 1.0
    cum = onehot.cumsum(axis=0)
    total = cum[-1]
    left_n = np.arange(1, n, dtype=float)
    right_n = n - left_n
    sq_left = (cum[:-1] ** 2).sum(axis=1)
    sq_right = ((total[None, :] - cum[:-1]) ** 2).sum(axis=1)
    loss = (left_n - sq_left / left_n) + (right_n - sq_right / right_n)
    loss[~valid] = np.inf
    pos = int(loss.argmin())  # first minimum -> smallest threshold
    if not np.isfinite(loss[pos]):
        return None
    thresh = (xs[pos] + xs[pos + 1]) / 2.0
    if not (thresh < xs[pos + 1]):  # midpoint rounded up: <= would empty the right side
        thresh = xs[pos]
    return float(loss[pos]), float(thresh)


def _grow_tree(x: np.ndarray, y: np.ndarray, idx: np.ndarray, rng, n_classes: int, m_try: int):
    sub_y = y[idx]
    hist = np.bincount(sub_y, minlength=n_classes)
    if len(idx) < 2 or hist.max() == len(idx):
        return {"hist": hist.tolist()}
    feats = rng.choice(x.shape[1], size=m_try, replace=False)
    best = None
    for f in feats:
        res = _gini_split(x[idx, f], sub_y, n_classes)
        if res is None:
            continue
        loss, thresh = res
        if best is None or loss < best[0]:
            best = (loss, int(f), thresh)
    if best is None:  # candidates all constant: no way to split
        return {"hist": hist.tolist()}
    _, feat, thresh = best
    go_left = x[idx, feat] <= thresh
    return {
        "feat": feat,
        "thresh": thresh,
        "left": _grow_tree(x, y, idx[go_left], rng, n_classes, m_try),
        "right": _grow_tree(x, y, idx[~go_left], rng, n_classes, m_try),
    }


def train_forest(
    features: np.ndarray,
    classes: np.ndarray,
    n_trees: int = 100,
    seed: int = 0,
    n_classes: int | None = None,
    compute_oob: bool = True,
) -> ForestModel:
    """Train a bootstrap forest; deterministic for a fixed seed.

    Parameters
    ----------
    features : (n, d) array of motion features.
    classes : (n,) integer class (cluster) ids.
    n_classes : histogram width; defaults to max(classes) + 1.
    """
    x = np.asarray(features, dtype=float)
    y = np.asarray(classes, dtype=int)
    if x.ndim != 2 or len(x) != len(y):
        raise DimMismatch("features and classes must have matching first dimension")
    if len(np.unique(y)) < 2:
        raise DegenerateLabels("training set has a single class")
    if n_classes is None:
        n_classes = int(y.max()) + 1
    elif y.max() >= n_classes:
        raise DimMismatch("class id exceeds n_classes")

    _recursion_headroom()
    n, d = x.shape
    m_try = math.ceil(math.sqrt(d))
    seeds = np.random.SeedSequence(seed).spawn(n_trees)
    trees = []
    votes = np.zeros((n, n_classes))
    for ss in seeds:
        rng = np.random.default_rng(ss)
        boot = rng.integers(0, n, size=n)
        tree = _grow_tree(x, y, boot, rng, n_classes, m_try)
        trees.append(tree)
        if compute_oob:
            oob = np.setdiff1d(np.arange(n), boot, assume_unique=False)
            if len(oob) > 0:
                votes[oob] += _tree_proba_batch(tree, x[oob], n_classes)

    model = ForestModel(trees, d, n_classes)
    if compute_oob:
        seen = votes.sum(axis=1) > 0
        if seen.any():
            model.oob_accuracy = float((votes[seen].argmax(axis=1) == y[seen]).mean())
    return model


def forest_proba(model: ForestModel, v: np.ndarray) -> np.ndarray:
    """Class distribution for one feature vector: mean of per-leaf histograms."""
    v = np.asarray(v, dtype=float)
    if v.shape != (model.feature_dim,):
        raise DimMismatch(f"expected a {model.feature_dim}-vector, got {v.shape}")
    acc = np.zeros(model.n_classes)
    for tree in model.trees:
        node = tree
        while "hist" not in node:
            node = node["left"] if v[node["feat"]] <= node["thresh"] else node["right"]
        hist = np.asarray(node["hist"], dtype=float)
        acc += hist / hist.sum()
    acc /= len(model.trees)
    return acc / acc.sum()


def _flatten_tree(tree):
    """Array form (feat, thresh, left, right, leaf_row) for batch routing."""
    _recursion_headroom()
    feats, threshs, lefts, rights, leaf_of = [], [], [], [], []
    leaves = []

    def add(node):
        i = len(feats)
        if "hist" in node:
            feats.append(-1)
            threshs.append(0.0)
            lefts.append(-1)
            rights.append(-1)
            hist = np.asarray(node["hist"], dtype=float)
            leaves.append(hist / hist.sum())
            leaf_of.append(len(leaves) - 1)
        else:
            feats.append(node["feat"])
            threshs.append(node["thresh"])
            lefts.append(0)
            rights.append(0)
            leaf_of.append(-1)
            l = add(node["left"])
            r = add(node["right"])
            lefts[i] = l
            rights[i] = r
        return i

    add(tree)
    return (
        np.array(feats, dtype=int),
        np.array(threshs, dtype=float),
        np.array(lefts, dtype=int),
        np.array(rights, dtype=int),
        np.array(leaf_of, dtype=int),
        np.stack(leaves) if leaves else np.zeros((0, 0)),
    )


def _tree_proba_batch(tree, x: np.ndarray, n_classes: int) -> np.ndarray:
    feats, threshs, lefts, rights, leaf_of, leaves = _flatten_tree(tree)
    pos = np.zeros(len(x), dtype=int)
    active = feats[pos] >= 0
    while active.any():
        rows = np.flatnonzero(active)
        p = pos[rows]
        go_left = x[rows, feats[p]] <= threshs[p]
        pos[rows] = np.where(go_left, lefts[p], rights[p])
        active[rows] = feats[pos[rows]] >= 0
    return leaves[leaf_of[pos]]


def forest_proba_batch(model: ForestModel, x: np.ndarray) -> np.ndarray:
    """(n, n_classes) distributions; identical to row-wise forest_proba."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != model.feature_dim:
        raise DimMismatch(f"expected (n, {model.feature_dim}) features")
    acc = np.zeros((len(x), model.n_classes))
    for tree in model.trees:
        acc += _tree_proba_batch(tree, x, model.n_classes)
    acc /= len(model.trees)
    return acc / acc.sum(axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# exact k-NN

# A k-d tree only beats scanning when the training set is much larger than
# 2^dim; above this dimension queries fall back to the vectorized scan.
_KDTREE_MAX_DIM = 16
_KDTREE_MIN_POINTS = 64


class KnnIndex:
    """Exact k-nearest-neighbor index with deterministic tie handling.

    Ties at equal distance are broken by the lower training index. Queries
    use a k-d tree in low dimension and an exhaustive vectorized scan
    otherwise; both return identical results.
    """

    def __init__(self, points: np.ndarray, force_mode: str | None = None):
        self.points = np.asarray(points, dtype=float)
        if self.points.ndim != 2:
            raise ValueError("points must be (n, d)")
        if len(self.points) == 0:
            raise EmptyModel("index holds no points")
        n, d = self.points.shape
        if force_mode is None:
            self.mode = "tree" if (d <= _KDTREE_MAX_DIM and n >= _KDTREE_MIN_POINTS) else "scan"
        else:
            self.mode = force_mode
        self._tree = self._build(np.arange(n), 0) if self.mode == "tree" and n else None

    def _build(self, idx: np.ndarray, depth: int):
        if len(idx) == 0:
            return None
        axis = depth % self.points.shape[1]
        order = idx[np.argsort(self.points[idx, axis], kind="stable")]
        mid = len(order) // 2
        return {
            "axis": axis,
            "index": int(order[mid]),
            "left": self._build(order[:mid], depth + 1),
            "right": self._build(order[mid + 1 :], depth + 1),
        }

    def query(self, v: np.ndarray, k: int) -> np.ndarray:
        """Indices of the k nearest points, nearest first."""
        if len(self.points) == 0:
            raise EmptyModel("index holds no points")
        v = np.asarray(v, dtype=float)
        if v.shape != (self.points.shape[1],):
            raise DimMismatch("query dimension mismatch")
        k = min(k, len(self.points))
        if self.mode == "scan" or self._tree is None:
            return self._scan(v, k)
        # best list kept as (d2, idx) with the worst entry last
        best: list = []

        def consider(idx: int):
            diff = self.points[idx] - v
            cand = (float(diff @ diff), idx)
            if len(best) < k:
                best.append(cand)
                best.sort()
            elif cand < best[-1]:
                best[-1] = cand
                best.sort()

        def walk(node):
            if node is None:
                return
            axis, idx = node["axis"], node["index"]
            consider(idx)
            delta = v[axis] - self.points[idx, axis]
            near, far = (node["left"], node["right"]) if delta <= 0 else (node["right"], node["left"])
            walk(near)
            # an equal-distance point with a lower index may still displace
            # the current worst, so only prune on a strict excess
            if len(best) < k or delta * delta <= best[-1][0]:
                walk(far)

        walk(self._tree)
        return np.array([i for _, i in best], dtype=int)

    def _scan(self, v: np.ndarray, k: int) -> np.ndarray:
        d2 = ((self.points - v) ** 2).sum(axis=1)
        order = np.lexsort((np.arange(len(d2)), d2))
        return order[:k]


@dataclass
class KnnModel:
    """Training features with class ids (and optionally bank pose indices)."""

    features: np.ndarray
    classes: np.ndarray
    n_classes: int
    pose_indices: np.ndarray | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.classes = np.asarray(self.classes, dtype=int)
        if len(self.features) != len(self.classes):
            raise DimMismatch("features and classes must have matching length")
        if self.pose_indices is not None:
            self.pose_indices = np.asarray(self.pose_indices, dtype=int)
        self._index = None

    def index(self) -> KnnIndex:
        if self._index is None:
            self._index = KnnIndex(self.features)
        return self._index

    def save(self, path) -> None:
        rec = {
            "n_classes": self.n_classes,
            "features": self.features.tolist(),
            "classes": self.classes.tolist(),
            "pose_indices": None if self.pose_indices is None else self.pose_indices.tolist(),
        }
        with open(path, "w") as f:
            json.dump(rec, f)

    @classmethod
    def load(cls, path) -> "KnnModel":
        with open(path) as f:
            rec = json.load(f)
        pi = rec.get("pose_indices")
        return cls(
            np.array(rec["features"], dtype=float),
            np.array(rec["classes"], dtype=int),
            int(rec["n_classes"]),
            None if pi is None else np.array(pi, dtype=int),
        )


def knn_proba(model: KnnModel, v: np.ndarray, k: int = 30) -> np.ndarray:
    """Class distribution from the k nearest training features."""
    if len(model.features) == 0:
        raise EmptyModel("knn model holds no training points")
    nn = model.index().query(np.asarray(v, dtype=float), k)
    probs = np.bincount(model.classes[nn], minlength=model.n_classes).astype(float)
    return probs / probs.sum()


# ---------------------------------------------------------------------------
# static sitting probability and the frame verdict


def dynamic_sit_stand(probs: np.ndarray, labels):
    """Frame verdict from cluster probabilities: sitting iff the summed
    sitting-like mass exceeds 0.5; ties go to standing."""
    from .clustering import SitStand

    probs = np.asarray(probs, dtype=float)
    if len(probs) != len(labels):
        raise LengthMismatch("one label per cluster required")
    sit_mass = float(probs[[l == SitStand.SITTING_LIKE for l in labels]].sum())
    return SitStand.SITTING_LIKE if sit_mass > 0.5 else SitStand.STANDING_LIKE


def constant_static(n_frames: int, value: float = 0.5) -> np.ndarray:
    """Uninformative static provider: h == value for every frame."""
    return np.full(n_frames, float(value))


def save_static(path, h: np.ndarray) -> None:
    with open(path, "w") as f:
        for i, v in enumerate(np.asarray(h, dtype=float)):
            f.write(json.dumps({"t": i, "h": float(v)}) + "\n")


def load_static(path, expected_frames: int | None = None) -> np.ndarray:
    vals = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            vals.append(float(json.loads(line)["h"]))
    h = np.array(vals)
    if expected_frames is not None and len(h) != expected_frames:
        raise LengthMismatch(f"static file holds {len(h)} frames, expected {expected_frames}")
    return h
