"""Planar homography calibration from keypoint correspondences.

A homography maps camera-image pixels to digital-twin pixels for points on
the (flat) track plane.  This module estimates that map from user-defined
correspondences with a normalized direct linear transform, applies it with
explicit handling of points at infinity, and produces the calibration
diagnostics (average / accumulated reprojection error, leave-one-out error
curves) that drive the interactive refinement workflow.

Coordinate conventions
----------------------
Both frames are image-pixel frames: origin at the top-left corner, x to the
right, y downward.  Coordinates are real-valued (sub-pixel clicks are fine).
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DegenerateConfigurationError,
    DuplicateCameraPointError,
    FrameMismatchError,
    OutOfBoundsError,
    PointAtInfinityError,
    TooFewPointsError,
)

__all__ = [
    "Frame",
    "Point2",
    "KeypointPair",
    "KeypointSet",
    "Homography",
    "CalibrationDiagnostics",
    "estimate_homography",
    "apply_homography",
    "reprojection_diagnostics",
    "leave_one_out_diagnostics",
    "keypoint_error_curve",
    "load_keypoints",
    "save_keypoints",
    "keypoints_from_dict",
    "keypoints_to_dict",
]

#: Below this fraction of the largest singular value, the second-smallest
#: singular value of the DLT system marks a rank-deficient (degenerate)
#: correspondence configuration.
DEGENERACY_RTOL = 1e-8

#: Homogeneous scale factors with magnitude at or below this are treated as
#: points at infinity (the homography matrix is Frobenius-normalized).
W_EPSILON = 1e-12

#: Minimum determinant magnitude of a normalized homography.
MIN_DETERMINANT = 1e-12


class Frame(enum.Enum):
    """Coordinate frame tag for 2-D points."""

    CAMERA = "camera"
    TWIN = "twin"


@dataclass(frozen=True)
class Point2:
    """A 2-D position in a named coordinate frame (pixels)."""

    x: float
    y: float
    frame: Frame

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"point coordinates must be finite, got ({self.x}, {self.y})")
        if not isinstance(self.frame, Frame):
            raise TypeError(f"frame must be a Frame enum member, got {self.frame!r}")

    def distance_to(self, other: "Point2") -> float:
        if self.frame is not other.frame:
            raise FrameMismatchError(
                f"cannot mix frames: {self.frame.value} vs {other.frame.value}"
            )
        return math.hypot(self.x - other.x, self.y - other.y)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)


@dataclass(frozen=True)
class KeypointPair:
    """One correspondence between a camera pixel and a twin pixel."""

    camera: Point2
    twin: Point2
    label: str | None = None

    def __post_init__(self):
        if self.camera.frame is not Frame.CAMERA:
            raise FrameMismatchError("KeypointPair.camera must be in the camera frame")
        if self.twin.frame is not Frame.TWIN:
            raise FrameMismatchError("KeypointPair.twin must be in the twin frame")


@dataclass(frozen=True)
class KeypointSet:
    """An ordered collection of keypoint pairs plus the two image sizes.

    Camera points must lie within ``image_size_camera`` (closed box
    ``[0, w] x [0, h]``), twin points within ``image_size_twin``.  Two pairs
    may not share an identical camera point: duplicated source pixels make
    the correspondence system inconsistent and always indicate a click slip.
    """

    pairs: tuple[KeypointPair, ...]
    image_size_camera: tuple[int, int]
    image_size_twin: tuple[int, int]

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(self.pairs))
        for name in ("image_size_camera", "image_size_twin"):
            w, h = getattr(self, name)
            if int(w) <= 0 or int(h) <= 0:
                raise ValueError(f"{name} must be positive, got {(w, h)}")
            object.__setattr__(self, name, (int(w), int(h)))
        seen: set[tuple[float, float]] = set()
        for pair in self.pairs:
            self._check_bounds(pair.camera, self.image_size_camera)
            self._check_bounds(pair.twin, self.image_size_twin)
            key = (pair.camera.x, pair.camera.y)
            if key in seen:
                raise DuplicateCameraPointError(
                    f"duplicate camera point ({pair.camera.x}, {pair.camera.y})"
                )
            seen.add(key)

    @staticmethod
    def _check_bounds(point: Point2, size: tuple[int, int]) -> None:
        w, h = size
        if not (0.0 <= point.x <= w and 0.0 <= point.y <= h):
            raise OutOfBoundsError(
                f"{point.frame.value} point ({point.x}, {point.y}) outside image {w}x{h}"
            )

    def __len__(self) -> int:
        return len(self.pairs)

    def camera_array(self) -> np.ndarray:
        """(n, 2) array of camera points."""
        return np.array([[p.camera.x, p.camera.y] for p in self.pairs], dtype=float)

    def twin_array(self) -> np.ndarray:
        """(n, 2) array of twin points."""
        return np.array([[p.twin.x, p.twin.y] for p in self.pairs], dtype=float)

    def subset(self, indices: Iterable[int]) -> "KeypointSet":
        picked = tuple(self.pairs[i] for i in indices)
        return KeypointSet(picked, self.image_size_camera, self.image_size_twin)


@dataclass(frozen=True)
class Homography:
    """A 3x3 projective map from the camera frame to the twin frame.

    The stored matrix follows a fixed normalization so that matrices are
    directly comparable across runs: Frobenius norm 1 and sign chosen so the
    bottom-right entry is >= 0 (first nonzero entry positive if that entry
    is exactly 0).
    """

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (3, 3):
            raise ValueError(f"homography matrix must be 3x3, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("homography matrix contains non-finite entries")
        norm = float(np.linalg.norm(m))
        if norm == 0.0:
            raise DegenerateConfigurationError("homography matrix is all zeros")
        m = m / norm
        if m[2, 2] < 0.0:
            m = -m
        elif m[2, 2] == 0.0:
            flat = m.ravel()
            nonzero = flat[flat != 0.0]
            if nonzero.size and nonzero[0] < 0.0:
                m = -m
        if abs(np.linalg.det(m)) <= MIN_DETERMINANT:
            raise DegenerateConfigurationError(
                f"homography is not invertible (|det| = {abs(np.linalg.det(m)):.3e})"
            )
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def inverse(self) -> "Homography":
        return Homography(np.linalg.inv(self.matrix))

    def apply_array(self, points: np.ndarray) -> np.ndarray:
        """Map an (n, 2) array of camera points to twin coordinates.

        Raises
        ------
        PointAtInfinityError
            If any mapped point's homogeneous scale is ~0.
        """
        pts = np.asarray(points, dtype=float)
        squeeze = pts.ndim == 1
        pts = np.atleast_2d(pts)
        ones = np.ones((pts.shape[0], 1))
        homogeneous = np.hstack([pts, ones]) @ self.matrix.T
        w = homogeneous[:, 2]
        bad = np.abs(w) <= W_EPSILON
        if np.any(bad):
            index = int(np.argmax(bad))
            raise PointAtInfinityError(
                f"point ({pts[index, 0]}, {pts[index, 1]}) maps to infinity (|w| <= {W_EPSILON})"
            )
        mapped = homogeneous[:, :2] / w[:, None]
        return mapped[0] if squeeze else mapped


@dataclass(frozen=True)
class CalibrationDiagnostics:
    """Reprojection-error summary over a set of check points.

    ``accumulated_error`` is the plain sum of the per-point Euclidean errors
    and ``average_error`` that sum divided by the point count; both are kept
    because a single bad keypoint inflates the accumulated error far faster
    than the average.
    """

    average_error: float
    accumulated_error: float
    per_point_errors: tuple[float, ...]
    keypoint_count: int

    @classmethod
    def from_errors(cls, errors: Sequence[float]) -> "CalibrationDiagnostics":
        errs = tuple(float(e) for e in errors)
        if not errs:
            raise ValueError("diagnostics require at least one error value")
        total = float(sum(errs))
        return cls(
            average_error=total / len(errs),
            accumulated_error=total,
            per_point_errors=errs,
            keypoint_count=len(errs),
        )

    def to_dict(self) -> dict:
        return {
            "average_error_px": self.average_error,
            "accumulated_error_px": self.accumulated_error,
            "per_point_errors_px": list(self.per_point_errors),
            "keypoint_count": self.keypoint_count,
        }


def _normalization_transform(points: np.ndarray) -> np.ndarray:
    """Similarity transform taking ``points`` to centroid 0, RMS radius sqrt(2)."""
    centroid = points.mean(axis=0)
    shifted = points - centroid
    rms = float(np.sqrt(np.mean(np.sum(shifted**2, axis=1))))
    if rms == 0.0:
        raise DegenerateConfigurationError("all points coincide; cannot normalize")
    s = math.sqrt(2.0) / rms
    return np.array(
        [
            [s, 0.0, -s * centroid[0]],
            [0.0, s, -s * centroid[1]],
            [0.0, 0.0, 1.0],
        ]
    )


def _apply_transform(t: np.ndarray, points: np.ndarray) -> np.ndarray:
    homogeneous = np.hstack([points, np.ones((points.shape[0], 1))]) @ t.T
    return homogeneous[:, :2] / homogeneous[:, 2:3]


def estimate_homography(keypoints: KeypointSet) -> Homography:
    """Fit the camera-to-twin homography by normalized DLT.

    Both point sets are translated/scaled to centroid 0 and RMS distance
    sqrt(2); the solution is the least-singular-vector of the stacked 2n x 9
    system, denormalized, then normalized per the :class:`Homography`
    convention.  With more than 4 pairs this minimizes algebraic error over
    all pairs.

    Raises
    ------
    TooFewPointsError
        Fewer than 4 pairs.
    DegenerateConfigurationError
        Rank-deficient system (e.g. 3 collinear points among 4) — the user
        must add or fix keypoints.
    """
    n = len(keypoints)
    if n < 4:
        raise TooFewPointsError(f"homography estimation needs >= 4 pairs, got {n}")
    cam = keypoints.camera_array()
    twin = keypoints.twin_array()

    t_cam = _normalization_transform(cam)
    t_twin = _normalization_transform(twin)
    cam_n = _apply_transform(t_cam, cam)
    twin_n = _apply_transform(t_twin, twin)

    a = np.zeros((2 * n, 9))
    x, y = cam_n[:, 0], cam_n[:, 1]
    u, v = twin_n[:, 0], twin_n[:, 1]
    a[0::2, 0] = -x
    a[0::2, 1] = -y
    a[0::2, 2] = -1.0
    a[0::2, 6] = u * x
    a[0::2, 7] = u * y
    a[0::2, 8] = u
    a[1::2, 3] = -x
    a[1::2, 4] = -y
    a[1::2, 5] = -1.0
    a[1::2, 6] = v * x
    a[1::2, 7] = v * y
    a[1::2, 8] = v

    _, singular, vt = np.linalg.svd(a)
    padded = np.zeros(9)
    padded[: singular.size] = singular
    # Rank < 8 means the null space is at least 2-dimensional: the
    # correspondences do not pin down a unique homography.
    if padded[7] <= DEGENERACY_RTOL * padded[0]:
        raise DegenerateConfigurationError(
            "correspondences are degenerate (rank-deficient system, e.g. collinear "
            "points); add or spread out keypoints"
        )
    h_normalized = vt[-1].reshape(3, 3)
    h = np.linalg.inv(t_twin) @ h_normalized @ t_cam
    return Homography(h)


def apply_homography(h: Homography, p: Point2) -> Point2:
    """Map a camera-frame point into the twin frame by perspective division."""
    if p.frame is not Frame.CAMERA:
        raise FrameMismatchError("apply_homography expects a camera-frame point")
    mapped = h.apply_array(p.as_array())
    return Point2(float(mapped[0]), float(mapped[1]), Frame.TWIN)


def reprojection_diagnostics(h: Homography, check_points: KeypointSet) -> CalibrationDiagnostics:
    """Euclidean twin-pixel error of each pair's camera point under ``h``."""
    if len(check_points) == 0:
        raise TooFewPointsError("diagnostics require at least one pair")
    mapped = h.apply_array(check_points.camera_array())
    errors = np.linalg.norm(mapped - check_points.twin_array(), axis=1)
    return CalibrationDiagnostics.from_errors(errors.tolist())


def leave_one_out_diagnostics(keypoints: KeypointSet) -> CalibrationDiagnostics:
    """Held-out reprojection error of each pair against a fit to the others.

    Each pair i is scored against the homography estimated from the n-1
    remaining pairs, so the reported error reflects generalization rather
    than in-sample residual (which is identically ~0 for n = 4).

    Raises
    ------
    TooFewPointsError
        Fewer than 5 pairs (each fold must keep >= 4).
    DegenerateConfigurationError
        Some fold's remaining points are degenerate.
    """
    n = len(keypoints)
    if n < 5:
        raise TooFewPointsError(f"leave-one-out needs >= 5 pairs, got {n}")
    errors = []
    for i in range(n):
        fold = keypoints.subset([j for j in range(n) if j != i])
        h = estimate_homography(fold)
        held_out = keypoints.pairs[i]
        mapped = h.apply_array(held_out.camera.as_array())
        errors.append(float(np.hypot(mapped[0] - held_out.twin.x, mapped[1] - held_out.twin.y)))
    return CalibrationDiagnostics.from_errors(errors)


def keypoint_error_curve(
    keypoints: KeypointSet, min_count: int = 4
) -> list[tuple[int, CalibrationDiagnostics]]:
    """Leave-one-out error as a function of keypoints used per fit.

    Entry k answers "how accurate is a homography fitted from k points?":
    it cross-validates over the first k+1 pairs in list order, holding out
    each in turn and fitting the other k.  Exactly-determined fits (k = 4)
    interpolate any click noise and score poorly on the held-out pair;
    overdetermined fits (k >= 5) average noise out, which is why the curve
    drops sharply at 5 and flattens beyond.

    Returns entries for k from ``min_count`` to ``len(pairs) - 1``.

    Raises
    ------
    TooFewPointsError
        ``min_count`` < 4, or fewer than ``min_count + 1`` pairs.
    """
    if min_count < 4:
        raise TooFewPointsError(f"min_count must be >= 4, got {min_count}")
    n = len(keypoints)
    if n < min_count + 1:
        raise TooFewPointsError(
            f"error curve needs >= {min_count + 1} pairs for fits of {min_count}, got {n}"
        )
    curve = []
    for k in range(min_count, n):
        pool = keypoints.subset(range(k + 1))
        curve.append((k, leave_one_out_diagnostics(pool)))
    return curve


# --- keypoints file format --------------------------------------------------
#
# JSON object:
#   {"image_size_camera": [w, h], "image_size_twin": [w, h],
#    "pairs": [{"camera": [x, y], "twin": [x, y], "label": "..."}]}

def keypoints_to_dict(keypoints: KeypointSet) -> dict:
    pairs = []
    for p in keypoints.pairs:
        entry: dict = {
            "camera": [p.camera.x, p.camera.y],
            "twin": [p.twin.x, p.twin.y],
        }
        if p.label is not None:
            entry["label"] = p.label
        pairs.append(entry)
    return {
        "image_size_camera": list(keypoints.image_size_camera),
        "image_size_twin": list(keypoints.image_size_twin),
        "pairs": pairs,
    }


def _as_xy(value, what: str) -> tuple[float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ValueError(f"{what} must be a [x, y] pair, got {value!r}")
    x, y = value
    if not all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in (x, y)):
        raise ValueError(f"{what} coordinates must be numbers, got {value!r}")
    return float(x), float(y)


def keypoints_from_dict(data: dict) -> KeypointSet:
    if not isinstance(data, dict):
        raise ValueError("keypoints document must be a JSON object")
    for key in ("image_size_camera", "image_size_twin", "pairs"):
        if key not in data:
            raise ValueError(f"keypoints document is missing {key!r}")
    cw, ch = _as_xy(data["image_size_camera"], "image_size_camera")
    tw, th = _as_xy(data["image_size_twin"], "image_size_twin")
    pairs = []
    raw_pairs = data["pairs"]
    if not isinstance(raw_pairs, list):
        raise ValueError("'pairs' must be a list")
    for i, raw in enumerate(raw_pairs):
        if not isinstance(raw, dict) or "camera" not in raw or "twin" not in raw:
            raise ValueError(f"pair {i} must be an object with 'camera' and 'twin'")
        cx, cy = _as_xy(raw["camera"], f"pair {i} camera")
        tx, ty = _as_xy(raw["twin"], f"pair {i} twin")
        label = raw.get("label")
        if label is not None and not isinstance(label, str):
            raise ValueError(f"pair {i} label must be a string")
        pairs.append(
            KeypointPair(
                camera=Point2(cx, cy, Frame.CAMERA),
                twin=Point2(tx, ty, Frame.TWIN),
                label=label,
            )
        )
    return KeypointSet(tuple(pairs), (int(cw), int(ch)), (int(tw), int(th)))


def load_keypoints(path: str | Path) -> KeypointSet:
    with open(path, "r", encoding="utf-8") as fh:
        return keypoints_from_dict(json.load(fh))


def save_keypoints(keypoints: KeypointSet, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(keypoints_to_dict(keypoints), fh, indent=2, sort_keys=True)
        fh.write("\n")
