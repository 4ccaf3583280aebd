"""Detection-stream parsing and camera-frame trajectory assembly.

The toolkit does not run a detector itself: any external tool may produce the
robot's per-frame location, as long as it emits one JSON object per line with
``frame_index`` plus a ``bbox`` and/or ``centroid``.  This module validates
that stream, collapses duplicate frames, attaches timestamps, and turns the
result into a :class:`Trajectory` that the metrics layer can score.  Gaps
(frames with no surviving detection) are recorded, never interpolated.
"""

from __future__ import annotations

import json
import math
import shlex
import subprocess
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DetectorRunError,
    MalformedLineError,
    NoDetectionsError,
    NonMonotonicFramesError,
    PointAtInfinityError,
)
from .geometry import W_EPSILON, Frame, Homography, Point2

#: Detections below this confidence are dropped unless the caller overrides it.
DEFAULT_MIN_CONFIDENCE = 0.25

#: Largest allowed gap between a given centroid and its bbox center, in px.
CENTROID_BBOX_TOLERANCE = 0.5


@dataclass(frozen=True)
class DetectionRecord:
    """One validated detector output line.

    ``bbox`` is corner-form ``(x_min, y_min, x_max, y_max)`` in camera pixels.
    At least one of ``bbox``/``centroid`` must be present; when both are, the
    centroid must sit within :data:`CENTROID_BBOX_TOLERANCE` of the bbox
    center.
    """

    frame_index: int
    bbox: tuple[float, float, float, float] | None = None
    centroid: Point2 | None = None
    confidence: float = 1.0

    def __post_init__(self):
        if not isinstance(self.frame_index, int) or isinstance(self.frame_index, bool):
            raise ValueError("frame_index must be an integer")
        if self.frame_index < 0:
            raise ValueError("frame_index must be non-negative")
        if self.bbox is None and self.centroid is None:
            raise ValueError("record needs a bbox or a centroid")
        if self.bbox is not None:
            x_min, y_min, x_max, y_max = self.bbox
            for value in self.bbox:
                if not math.isfinite(value):
                    raise ValueError("bbox coordinates must be finite")
            if not (x_min < x_max and y_min < y_max):
                raise ValueError("bbox must satisfy x_min < x_max and y_min < y_max")
        if self.centroid is not None and self.centroid.frame is not Frame.CAMERA:
            raise ValueError("centroid must be a camera-frame point")
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError("confidence must lie in [0, 1]")
        if self.bbox is not None and self.centroid is not None:
            center = self._bbox_center()
            if self.centroid.distance_to(center) > CENTROID_BBOX_TOLERANCE:
                raise ValueError(
                    "centroid disagrees with bbox center by more than "
                    f"{CENTROID_BBOX_TOLERANCE} px"
                )

    def _bbox_center(self) -> Point2:
        x_min, y_min, x_max, y_max = self.bbox
        return Point2((x_min + x_max) / 2.0, (y_min + y_max) / 2.0, Frame.CAMERA)

    def centroid_point(self) -> Point2:
        """The point used for trajectory building (centroid, else bbox center)."""
        if self.centroid is not None:
            return self.centroid
        return self._bbox_center()


@dataclass(frozen=True)
class Trajectory:
    """Timestamped robot positions in one coordinate frame.

    ``gaps`` lists inclusive ``(start_frame, end_frame)`` ranges with no
    surviving detection between the first and last sampled frames.  Times are
    ``frame_index / fps`` and strictly increase.
    """

    times: tuple[float, ...]
    points: tuple[Point2, ...]
    frame: Frame
    fps: float
    gaps: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        if len(self.times) != len(self.points):
            raise ValueError("times and points must have equal length")
        if not self.times:
            raise ValueError("trajectory needs at least one sample")
        if self.fps <= 0 or not math.isfinite(self.fps):
            raise ValueError("fps must be positive and finite")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("times must be strictly increasing")
        for point in self.points:
            if point.frame is not self.frame:
                raise ValueError("all points must share the trajectory frame")
        for start, end in self.gaps:
            if start > end:
                raise ValueError("gap start must not exceed gap end")

    def __len__(self) -> int:
        return len(self.times)

    @property
    def samples(self) -> tuple[tuple[float, Point2], ...]:
        return tuple(zip(self.times, self.points))

    def times_array(self) -> np.ndarray:
        return np.array(self.times, dtype=float)

    def points_array(self) -> np.ndarray:
        return np.array([(p.x, p.y) for p in self.points], dtype=float)

    def frame_indices(self) -> tuple[int, ...]:
        """Video frame numbers recovered from the timestamps."""
        return tuple(int(round(t * self.fps)) for t in self.times)

    def duration(self) -> float:
        return self.times[-1] - self.times[0]


def parse_detections(stream: str | Iterable[str]) -> list[DetectionRecord]:
    """Parse a JSONL detection stream into validated records.

    Blank lines are skipped; unknown keys are ignored so detectors can emit
    extra metadata (class names, track ids, ...).  ``frame_index`` must be
    non-decreasing across lines; when several lines share a frame, the
    highest-confidence record wins and ties keep the first occurrence.

    Raises
    ------
    MalformedLineError
        A line is not a JSON object or fails field validation.  Carries the
        1-based line number and a reason.
    NonMonotonicFramesError
        ``frame_index`` decreased between lines.
    """
    lines = stream.splitlines() if isinstance(stream, str) else stream
    kept: dict[int, DetectionRecord] = {}
    previous_frame = None
    for line_number, line in enumerate(lines, start=1):
        text = line.strip()
        if not text:
            continue
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as exc:
            raise MalformedLineError(line_number, f"invalid JSON ({exc.msg})") from exc
        if not isinstance(payload, dict):
            raise MalformedLineError(line_number, "line is not a JSON object")
        record = _record_from_payload(payload, line_number)
        if previous_frame is not None and record.frame_index < previous_frame:
            raise NonMonotonicFramesError(
                f"line {line_number}: frame_index {record.frame_index} after "
                f"{previous_frame}; detections must be frame-ordered"
            )
        previous_frame = record.frame_index
        existing = kept.get(record.frame_index)
        if existing is None or record.confidence > existing.confidence:
            kept[record.frame_index] = record
    return list(kept.values())


def _record_from_payload(payload: dict, line_number: int) -> DetectionRecord:
    frame_index = payload.get("frame_index")
    if frame_index is None:
        raise MalformedLineError(line_number, "missing frame_index")

    bbox = payload.get("bbox")
    if bbox is not None:
        if not (isinstance(bbox, list) and len(bbox) == 4):
            raise MalformedLineError(line_number, "bbox must be a list of 4 numbers")
        try:
            bbox = tuple(float(v) for v in bbox)
        except (TypeError, ValueError):
            raise MalformedLineError(line_number, "bbox must be a list of 4 numbers")

    centroid = payload.get("centroid")
    if centroid is not None:
        if not (isinstance(centroid, list) and len(centroid) == 2):
            raise MalformedLineError(line_number, "centroid must be a list of 2 numbers")
        try:
            centroid = Point2(float(centroid[0]), float(centroid[1]), Frame.CAMERA)
        except (TypeError, ValueError) as exc:
            raise MalformedLineError(line_number, f"bad centroid ({exc})")

    confidence = payload.get("confidence", 1.0)
    if not isinstance(confidence, (int, float)) or isinstance(confidence, bool):
        raise MalformedLineError(line_number, "confidence must be a number")

    try:
        return DetectionRecord(
            frame_index=frame_index,
            bbox=bbox,
            centroid=centroid,
            confidence=float(confidence),
        )
    except ValueError as exc:
        raise MalformedLineError(line_number, str(exc)) from exc


def load_detections(path) -> list[DetectionRecord]:
    """Read and parse a JSONL detections file."""
    with open(path, "r", encoding="utf-8") as handle:
        return parse_detections(handle.read())


def build_trajectory(
    records: Sequence[DetectionRecord],
    fps: float,
    min_confidence: float = DEFAULT_MIN_CONFIDENCE,
) -> Trajectory:
    """Assemble a camera-frame trajectory from parsed records.

    One sample per surviving frame at time ``frame_index / fps``; frames whose
    every record falls below ``min_confidence`` become gaps.

    Raises
    ------
    NoDetectionsError
        Nothing survives the confidence filter.
    """
    if fps <= 0:
        raise ValueError("fps must be positive")
    surviving = sorted(
        (r for r in records if r.confidence >= min_confidence),
        key=lambda r: r.frame_index,
    )
    if not surviving:
        raise NoDetectionsError(
            f"no detection with confidence >= {min_confidence} "
            f"({len(records)} records inspected)"
        )
    times = tuple(r.frame_index / fps for r in surviving)
    points = tuple(r.centroid_point() for r in surviving)
    gaps = []
    for a, b in zip(surviving, surviving[1:]):
        if b.frame_index > a.frame_index + 1:
            gaps.append((a.frame_index + 1, b.frame_index - 1))
    return Trajectory(
        times=times, points=points, frame=Frame.CAMERA, fps=fps, gaps=tuple(gaps)
    )


def transform_trajectory(trajectory: Trajectory, homography: Homography) -> Trajectory:
    """Map a camera-frame trajectory into the twin frame.

    Times, fps, and gaps are preserved.  If any sample would map to infinity,
    the raised :class:`PointAtInfinityError` carries that sample's video frame
    index.
    """
    if trajectory.frame is not Frame.CAMERA:
        raise ValueError("transform_trajectory expects a camera-frame trajectory")
    pts = trajectory.points_array()
    w = pts @ homography.matrix[2, :2] + homography.matrix[2, 2]
    bad = np.abs(w) <= W_EPSILON
    if np.any(bad):
        row = int(np.argmax(bad))
        frame_index = trajectory.frame_indices()[row]
        raise PointAtInfinityError(
            f"sample at frame {frame_index} maps to infinity", frame_index=frame_index
        )
    mapped = homography.apply_array(pts)
    points = tuple(Point2(float(x), float(y), Frame.TWIN) for x, y in mapped)
    return replace(trajectory, points=points, frame=Frame.TWIN)


def smooth_trajectory(trajectory: Trajectory, window: int) -> Trajectory:
    """Centered moving average per coordinate, truncated at run edges.

    Averaging never reaches across a gap: each contiguous frame run is
    smoothed independently.  ``window`` must be odd; ``window=1`` is the
    identity.
    """
    if window < 1 or window % 2 == 0:
        raise ValueError("window must be an odd positive integer")
    if window == 1:
        return trajectory
    indices = trajectory.frame_indices()
    pts = trajectory.points_array()
    half = window // 2
    smoothed = np.empty_like(pts)
    run_start = 0
    for i in range(1, len(indices) + 1):
        if i == len(indices) or indices[i] != indices[i - 1] + 1:
            run = pts[run_start:i]
            k = len(run)
            for j in range(k):
                lo = max(0, j - half)
                hi = min(k, j + half + 1)
                smoothed[run_start + j] = run[lo:hi].mean(axis=0)
            run_start = i
    points = tuple(
        Point2(float(x), float(y), trajectory.frame) for x, y in smoothed
    )
    return replace(trajectory, points=points)


def run_detector(command: str, frame_glob: str) -> str:
    """Invoke an external detector and return its JSONL stdout.

    The contract: the command is run as ``<command> <frame_glob>`` (the glob
    passed through as a literal argument), must write detections JSONL to
    stdout, and exit 0.
    """
    argv = shlex.split(command) + [frame_glob]
    try:
        result = subprocess.run(argv, capture_output=True, text=True)
    except OSError:
        raise DetectorRunError(command, returncode=None)
    if result.returncode != 0:
        raise DetectorRunError(command, result.returncode, result.stderr)
    return result.stdout
