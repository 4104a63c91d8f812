"""Homography estimation and dynamic motion features.

Consecutive frames of a chest camera are related (up to parallax, which the
downstream model ignores) by a 3x3 homography. Homographies are estimated
with the normalized DLT: Hartley-normalize both point sets, solve the 2n x 9
system by SVD, denormalize, and rescale so the top-left entry is 1. A motion
feature for frame n stacks the window - 1 homographies covering a window of
frames centered on n.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateConfiguration,
    InsufficientPoints,
    NormalizationFailure,
    OutOfRange,
    SingularMatrix,
)


@dataclass
class Homography:
    """3x3 projective map with h[0][0] == 1 and |det| > 1e-12."""

    h: np.ndarray

    def __post_init__(self):
        self.h = np.asarray(self.h, dtype=float)
        if self.h.shape != (3, 3):
            raise ValueError(f"expected 3x3 matrix, got {self.h.shape}")
        if not np.all(np.isfinite(self.h)):
            raise ValueError("homography entries must be finite")
        if abs(self.h[0, 0] - 1.0) > 1e-9:
            raise NormalizationFailure("top-left entry must be 1")
        if abs(np.linalg.det(self.h)) <= 1e-12:
            raise SingularMatrix("homography is singular")

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "Homography":
        """Rescale an arbitrary matrix so its top-left entry is 1."""
        m = np.asarray(m, dtype=float)
        if abs(m[0, 0]) < 1e-12:
            raise NormalizationFailure("top-left entry too small to normalize")
        return cls(m / m[0, 0])

    def apply(self, pts: np.ndarray) -> np.ndarray:
        """Map (n, 2) points through the homography."""
        pts = np.asarray(pts, dtype=float)
        hom = np.hstack([pts, np.ones((len(pts), 1))]) @ self.h.T
        return hom[:, :2] / hom[:, 2:3]


@dataclass
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    skew: float = 0.0

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")

    @property
    def k(self) -> np.ndarray:
        return np.array(
            [[self.fx, self.skew, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )


@dataclass
class FeatureVector:
    """Stacked 3x3 maps over a centered frame window, flattened row-major.

    length == 9 * (window - 1); in homography mode every 9-block starts
    with the normalized 1.
    """

    values: np.ndarray
    center_frame: int

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or self.values.size % 9 != 0 or self.values.size == 0:
            raise ValueError("feature length must be a positive multiple of 9")


def _hartley_normalization(pts: np.ndarray) -> np.ndarray:
    """Similarity T moving the centroid to 0 with mean distance sqrt(2)."""
    centroid = pts.mean(axis=0)
    dist = np.linalg.norm(pts - centroid, axis=1).mean()
    scale = np.sqrt(2.0) / dist if dist > 1e-15 else 1.0
    return np.array(
        [
            [scale, 0.0, -scale * centroid[0]],
            [0.0, scale, -scale * centroid[1]],
            [0.0, 0.0, 1.0],
        ]
    )


def estimate_homography(src: np.ndarray, dst: np.ndarray) -> Homography:
    """Least-squares homography from (n, 2) point correspondences.

    Parameters
    ----------
    src, dst : (n, 2) arrays, n >= 4, src[i] maps to dst[i].

    Returns
    -------
    Homography with top-left entry 1.

    Raises
    ------
    InsufficientPoints, DegenerateConfiguration, NormalizationFailure.
    """
    src = np.asarray(src, dtype=float)
    dst = np.asarray(dst, dtype=float)
    if src.ndim != 2 or src.shape[1] != 2 or src.shape != dst.shape:
        raise ValueError("src and dst must be matching (n, 2) arrays")
    n = len(src)
    if n < 4:
        raise InsufficientPoints(f"need at least 4 correspondences, got {n}")

    t_src = _hartley_normalization(src)
    t_dst = _hartley_normalization(dst)
    s = np.hstack([src, np.ones((n, 1))]) @ t_src.T
    d = np.hstack([dst, np.ones((n, 1))]) @ t_dst.T

    a = np.zeros((2 * n, 9))
    x, y = s[:, 0], s[:, 1]
    u, v = d[:, 0], d[:, 1]
    a[0::2, 0] = x
    a[0::2, 1] = y
    a[0::2, 2] = 1.0
    a[0::2, 6] = -u * x
    a[0::2, 7] = -u * y
    a[0::2, 8] = -u
    a[1::2, 3] = x
    a[1::2, 4] = y
    a[1::2, 5] = 1.0
    a[1::2, 6] = -v * x
    a[1::2, 7] = -v * y
    a[1::2, 8] = -v

    _, sing, vt = np.linalg.svd(a)
    # rank < 8 means the nullspace holds more than one solution
    if sing[7] / sing[0] < 1e-10:
        raise DegenerateConfiguration("correspondences do not pin down a homography")
    h_norm = vt[-1].reshape(3, 3)
    h = np.linalg.inv(t_dst) @ h_norm @ t_src
    return Homography.from_matrix(h)


def rotation_from_homography(h: Homography, k: CameraIntrinsics) -> np.ndarray:
    """Recover the camera rotation K^-1 H K, rescaled to determinant 1."""
    km = k.k
    if abs(np.linalg.det(km)) < 1e-12:
        raise SingularMatrix("intrinsics matrix is singular")
    m = np.linalg.inv(km) @ h.h @ km
    det = np.linalg.det(m)
    if abs(det) < 1e-12:
        raise SingularMatrix("conjugated matrix is singular")
    return m / np.cbrt(det)


def feature_window(hs, center: int, window: int = 30) -> FeatureVector:
    """Stack the homographies covering a centered window of frames.

    `hs[i]` maps frame i to frame i + 1. The window spans frames
    [center - floor((window-1)/2), center + ceil((window-1)/2)], i.e.
    window - 1 consecutive homographies, flattened row-major in time order.
    Raises OutOfRange when the window does not fit.
    """
    if window < 2:
        raise OutOfRange(f"window must be at least 2, got {window}")
    lo = center - (window - 1) // 2
    hi = center + (window - 1 + 1) // 2  # inclusive last frame
    if lo < 0 or hi > len(hs):
        raise OutOfRange(
            f"window [{lo}, {hi}] outside available frames 0..{len(hs)}"
        )
    mats = [m.h if isinstance(m, Homography) else np.asarray(m, dtype=float) for m in hs[lo:hi]]
    return FeatureVector(np.concatenate([m.reshape(-1) for m in mats]), center)


def save_homographies(path, hs) -> None:
    """One JSON object per line: {"t": i, "h": 9 row-major reals}."""
    with open(path, "w") as f:
        for i, h in enumerate(hs):
            m = h.h if isinstance(h, Homography) else np.asarray(h)
            f.write(json.dumps({"t": i, "h": m.reshape(-1).tolist()}) + "\n")


def load_homographies(path) -> list:
    hs = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            hs.append(Homography(np.array(rec["h"], dtype=float).reshape(3, 3)))
    return hs


def save_correspondences(path, pairs) -> None:
    """One JSON object per line: {"t": i, "src": [[x, y]...], "dst": [[x, y]...]}."""
    with open(path, "w") as f:
        for i, (src, dst) in enumerate(pairs):
            rec = {
                "t": i,
                "src": np.asarray(src, dtype=float).tolist(),
                "dst": np.asarray(dst, dtype=float).tolist(),
            }
            f.write(json.dumps(rec) + "\n")


def load_correspondences(path) -> list:
    pairs = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            pairs.append(
                (np.array(rec["src"], dtype=float), np.array(rec["dst"], dtype=float))
            )
    return pairs
