"""Trajectory scoring: path distances, similarity, lap timing, failure events.

Distances operate on plain (n, 2) point arrays in twin pixels.  Two metrics
are provided:

* `dtw_distance` — dynamic time warping with the accumulated cost divided by
  the warping-path length, i.e. the MEAN per-step cost.  Raw accumulated DTW
  grows with sequence length, which would make a fixed similarity baseline
  meaningless across trials of different durations; the mean keeps the
  result in pixels and comparable.  Among equal-cost warping paths the
  longest is used (smallest achievable mean), deterministically.
* `frechet_distance` — discrete Fréchet distance, the classic min-max
  "leash length" over order-preserving couplings.

Both accept an optional clamp δ applied to each LOCAL point-to-point
distance before aggregation, which bounds either metric by δ and caps the
influence of extreme excursions.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptySequenceError
from .geometry import Frame, Point2
from .track import ReferencePath

__all__ = [
    "MetricKind",
    "Direction",
    "EventKind",
    "SimilarityConfig",
    "PathDistanceResult",
    "FailureEvent",
    "BenchmarkScore",
    "StartLine",
    "Crossing",
    "dtw_distance",
    "frechet_distance",
    "path_distance",
    "similarity_score",
    "detect_crossings",
    "completion_time",
    "off_track_events",
    "point_to_path_distances",
    "rotate_closed_path",
    "reverse_path",
    "scored_window",
    "score_trajectory",
]


class MetricKind(enum.Enum):
    DTW = "dtw"
    FRECHET = "frechet"


class Direction(enum.Enum):
    FORWARD = "forward"
    BACKWARD = "backward"


class EventKind(enum.Enum):
    OFF_TRACK = "off_track"
    DID_NOT_FINISH = "did_not_finish"


@dataclass(frozen=True)
class SimilarityConfig:
    """Metric choice plus the clamp δ and baseline B (both in twin pixels)."""

    metric: MetricKind
    baseline: float
    clamp_delta: float | None = None

    def __post_init__(self):
        if not (self.baseline > 0):
            raise ValueError(f"baseline must be > 0, got {self.baseline}")
        if self.clamp_delta is not None and not (self.clamp_delta > 0):
            raise ValueError(f"clamp_delta must be > 0 when given, got {self.clamp_delta}")


@dataclass(frozen=True)
class PathDistanceResult:
    distance: float
    metric: MetricKind
    clamped: bool

    def __post_init__(self):
        if not (self.distance >= 0 and math.isfinite(self.distance)):
            raise ValueError(f"distance must be finite and >= 0, got {self.distance}")


@dataclass(frozen=True)
class FailureEvent:
    time: float
    kind: EventKind
    detail: str

    def to_dict(self) -> dict:
        return {"time_s": self.time, "kind": self.kind.value, "detail": self.detail}


@dataclass(frozen=True)
class BenchmarkScore:
    similarity_percent: float
    distance: PathDistanceResult
    completion_seconds: float | None
    failure_events: tuple[FailureEvent, ...] = field(default_factory=tuple)
    reference_reversed: bool = False

    def __post_init__(self):
        object.__setattr__(self, "failure_events", tuple(self.failure_events))
        dnf = any(e.kind is EventKind.DID_NOT_FINISH for e in self.failure_events)
        if dnf == (self.completion_seconds is not None):
            raise ValueError(
                "completion_seconds must be absent exactly when a did-not-finish "
                "event is present"
            )
        if not (0.0 <= self.similarity_percent <= 100.0):
            raise ValueError(f"similarity must be within [0, 100], got {self.similarity_percent}")

    def to_dict(self) -> dict:
        return {
            "path_similarity_percent": self.similarity_percent,
            "completion_seconds": self.completion_seconds,
            "distance_px": self.distance.distance,
            "metric": self.distance.metric.value,
            "clamped": self.distance.clamped,
            "reference_reversed": self.reference_reversed,
            "failure_events": [e.to_dict() for e in self.failure_events],
        }


@dataclass(frozen=True)
class StartLine:
    """A finish/start gate segment in twin pixels with a crossing debounce."""

    a: Point2
    b: Point2
    min_crossing_interval: float = 0.0

    def __post_init__(self):
        if self.a.frame is not Frame.TWIN or self.b.frame is not Frame.TWIN:
            raise ValueError("start-line endpoints must be twin-frame points")
        if (self.a.x, self.a.y) == (self.b.x, self.b.y):
            raise ValueError("start-line endpoints must differ")
        if self.min_crossing_interval < 0:
            raise ValueError("min_crossing_interval must be >= 0")


@dataclass(frozen=True)
class Crossing:
    time: float
    direction: Direction


def _as_points(seq, name: str) -> np.ndarray:
    arr = np.asarray(seq, dtype=float)
    if arr.size == 0:
        raise EmptySequenceError(f"{name} sequence is empty")
    arr = np.atleast_2d(arr)
    if arr.shape[1] != 2:
        raise ValueError(f"{name} must be an (n, 2) point array, got shape {arr.shape}")
    return arr


def _cost_matrices(x: np.ndarray, y: np.ndarray, clamp_delta: float | None):
    diff = x[:, None, :] - y[None, :, :]
    raw = np.sqrt((diff**2).sum(axis=2))
    cost = raw if clamp_delta is None else np.minimum(raw, clamp_delta)
    return cost, raw


def _predecessors(i: int, j: int):
    # Fixed preference order: diagonal, vertical, horizontal.
    if i > 0 and j > 0:
        yield i - 1, j - 1
    if i > 0:
        yield i - 1, j
    if j > 0:
        yield i, j - 1


def _antidiagonal_indices(k: int, n: int, m: int):
    i_lo = max(0, k - m + 1)
    i_hi = min(n - 1, k)
    ii = np.arange(i_lo, i_hi + 1)
    return ii, k - ii


def dtw_distance(x, y, clamp_delta: float | None = None) -> PathDistanceResult:
    """Mean-per-step dynamic-time-warping distance between two point chains.

    Classic O(n·m) grid with steps (i-1, j), (i, j-1), (i-1, j-1); local
    cost is the Euclidean distance, clamped to min(cost, δ) when a clamp is
    given; the reported distance is the optimal accumulated cost divided by
    the optimal warping-path length.  ``clamped`` tells whether the clamp
    actually bit on the optimal path.
    """
    x = _as_points(x, "x")
    y = _as_points(y, "y")
    cost, raw = _cost_matrices(x, y, clamp_delta)
    n, m = cost.shape

    acc = np.full((n, m), np.inf)
    length = np.zeros((n, m), dtype=np.int64)
    acc[0, 0] = cost[0, 0]
    length[0, 0] = 1
    for k in range(1, n + m - 1):
        ii, jj = _antidiagonal_indices(k, n, m)
        has_up = ii >= 1
        has_left = jj >= 1
        up_i = np.maximum(ii - 1, 0)
        left_j = np.maximum(jj - 1, 0)
        diag = np.where(has_up & has_left, acc[up_i, left_j], np.inf)
        up = np.where(has_up, acc[up_i, jj], np.inf)
        left = np.where(has_left, acc[ii, left_j], np.inf)
        best = np.minimum(np.minimum(diag, up), left)
        acc[ii, jj] = cost[ii, jj] + best
        l_diag = np.where(diag == best, length[up_i, left_j], -1)
        l_up = np.where(up == best, length[up_i, jj], -1)
        l_left = np.where(left == best, length[ii, left_j], -1)
        length[ii, jj] = 1 + np.maximum(np.maximum(l_diag, l_up), l_left)

    path = _backtrack_dtw(acc, length)
    distance = float(acc[n - 1, m - 1] / length[n - 1, m - 1])
    clamped = clamp_delta is not None and any(raw[i, j] > clamp_delta for i, j in path)
    return PathDistanceResult(distance=distance, metric=MetricKind.DTW, clamped=clamped)


def _backtrack_dtw(acc: np.ndarray, length: np.ndarray) -> list[tuple[int, int]]:
    n, m = acc.shape
    i, j = n - 1, m - 1
    path = [(i, j)]
    while (i, j) != (0, 0):
        best = min(acc[p] for p in _predecessors(i, j))
        want_len = length[i, j] - 1
        for p in _predecessors(i, j):
            if acc[p] == best and length[p] == want_len:
                i, j = p
                break
        else:  # pragma: no cover - DP construction guarantees a predecessor
            raise AssertionError("warping-path backtrack lost its predecessor")
        path.append((i, j))
    path.reverse()
    return path


def frechet_distance(x, y, clamp_delta: float | None = None) -> PathDistanceResult:
    """Discrete Fréchet distance (min over couplings of the max local cost)."""
    x = _as_points(x, "x")
    y = _as_points(y, "y")
    cost, raw = _cost_matrices(x, y, clamp_delta)
    n, m = cost.shape

    acc = np.full((n, m), np.inf)
    acc[0, 0] = cost[0, 0]
    for k in range(1, n + m - 1):
        ii, jj = _antidiagonal_indices(k, n, m)
        has_up = ii >= 1
        has_left = jj >= 1
        up_i = np.maximum(ii - 1, 0)
        left_j = np.maximum(jj - 1, 0)
        diag = np.where(has_up & has_left, acc[up_i, left_j], np.inf)
        up = np.where(has_up, acc[up_i, jj], np.inf)
        left = np.where(has_left, acc[ii, left_j], np.inf)
        acc[ii, jj] = np.maximum(cost[ii, jj], np.minimum(np.minimum(diag, up), left))

    clamped = False
    if clamp_delta is not None:
        i, j = n - 1, m - 1
        witness = [(i, j)]
        while (i, j) != (0, 0):
            i, j = min(_predecessors(i, j), key=lambda p: acc[p])
            witness.append((i, j))
        clamped = any(raw[i, j] > clamp_delta for i, j in witness)
    return PathDistanceResult(
        distance=float(acc[n - 1, m - 1]), metric=MetricKind.FRECHET, clamped=clamped
    )


def path_distance(x, y, config: SimilarityConfig) -> PathDistanceResult:
    """Dispatch to the configured metric."""
    if config.metric is MetricKind.DTW:
        return dtw_distance(x, y, config.clamp_delta)
    return frechet_distance(x, y, config.clamp_delta)


def similarity_score(d: PathDistanceResult, config: SimilarityConfig) -> float:
    """Similarity percentage: min(100, 100 * max(0, 1 - d/B))."""
    return min(100.0, 100.0 * max(0.0, 1.0 - d.distance / config.baseline))


def detect_crossings(times, points, line: StartLine) -> list[Crossing]:
    """Find where the sampled trajectory properly crosses the gate segment.

    A crossing requires the two consecutive samples to lie strictly on
    opposite sides of the gate AND the gate endpoints to lie strictly on
    opposite sides of the motion segment (proper segment intersection); the
    crossing time interpolates linearly between the two sample times.
    Crossings closer than ``min_crossing_interval`` to the previously
    accepted one are debounced away.
    """
    t = np.asarray(times, dtype=float)
    p = _as_points(points, "trajectory")
    if len(t) != len(p):
        raise ValueError("times and points must have equal length")
    if len(p) < 2:
        raise ValueError("crossing detection needs >= 2 samples")
    a = np.array([line.a.x, line.a.y])
    b = np.array([line.b.x, line.b.y])
    gate = b - a

    # Side of the gate line for every sample.
    rel = p - a
    side = gate[0] * rel[:, 1] - gate[1] * rel[:, 0]

    crossings: list[Crossing] = []
    last_accepted: float | None = None
    for i in range(len(p) - 1):
        d1, d2 = side[i], side[i + 1]
        if not (d1 * d2 < 0.0):
            continue
        motion = p[i + 1] - p[i]
        # Gate endpoints must straddle the motion segment as well.
        rel_a = a - p[i]
        rel_b = b - p[i]
        e1 = motion[0] * rel_a[1] - motion[1] * rel_a[0]
        e2 = motion[0] * rel_b[1] - motion[1] * rel_b[0]
        if not (e1 * e2 < 0.0):
            continue
        s = d1 / (d1 - d2)
        when = float(t[i] + s * (t[i + 1] - t[i]))
        cross = gate[0] * motion[1] - gate[1] * motion[0]
        direction = Direction.FORWARD if cross > 0 else Direction.BACKWARD
        if last_accepted is not None and when - last_accepted < line.min_crossing_interval:
            continue
        crossings.append(Crossing(time=when, direction=direction))
        last_accepted = when
    return crossings


def completion_time(
    crossings: list[Crossing], required_laps: int = 1
) -> tuple[float | None, list[FailureEvent]]:
    """Elapsed time from the first crossing to the one completing the laps.

    The lap direction is the direction of the first accepted crossing; a lap
    completes at each later crossing with the same direction.  When there
    are not enough crossings the result is ``(None, [did-not-finish])``.
    """
    if required_laps < 1:
        raise ValueError(f"required_laps must be >= 1, got {required_laps}")
    if not crossings:
        return None, [
            FailureEvent(
                time=0.0,
                kind=EventKind.DID_NOT_FINISH,
                detail=f"no start-line crossing (0 of {required_laps} laps)",
            )
        ]
    lap_direction = crossings[0].direction
    same = [c for c in crossings if c.direction == lap_direction]
    if len(same) >= required_laps + 1:
        return same[required_laps].time - same[0].time, []
    return None, [
        FailureEvent(
            time=crossings[-1].time,
            kind=EventKind.DID_NOT_FINISH,
            detail=f"completed {len(same) - 1} of {required_laps} laps",
        )
    ]


def point_to_path_distances(points, ref: ReferencePath) -> np.ndarray:
    """Distance from each point to the nearest reference-path segment."""
    p = _as_points(points, "points")
    verts = ref.points_array()
    if ref.closed:
        verts = np.vstack([verts, verts[:1]])
    starts = verts[:-1]
    deltas = verts[1:] - starts
    seg_len_sq = (deltas**2).sum(axis=1)
    seg_len_sq[seg_len_sq == 0.0] = 1.0
    # (n, m) projection parameter of each point onto each segment.
    rel = p[:, None, :] - starts[None, :, :]
    tproj = (rel * deltas[None, :, :]).sum(axis=2) / seg_len_sq[None, :]
    tproj = np.clip(tproj, 0.0, 1.0)
    nearest = starts[None, :, :] + tproj[:, :, None] * deltas[None, :, :]
    dists = np.sqrt(((p[:, None, :] - nearest) ** 2).sum(axis=2))
    return dists.min(axis=1)


def off_track_events(
    times, points, ref: ReferencePath, corridor_px: float, min_duration_s: float
) -> list[FailureEvent]:
    """One event per maximal run of samples outside the corridor.

    A run must stay beyond ``corridor_px`` from the reference path for at
    least ``min_duration_s`` to count; shorter blips are ignored.
    """
    if corridor_px <= 0:
        raise ValueError(f"corridor_px must be > 0, got {corridor_px}")
    t = np.asarray(times, dtype=float)
    distances = point_to_path_distances(points, ref)
    outside = distances > corridor_px
    events: list[FailureEvent] = []
    i = 0
    n = len(outside)
    while i < n:
        if not outside[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and outside[j + 1]:
            j += 1
        duration = float(t[j] - t[i])
        if duration >= min_duration_s:
            events.append(
                FailureEvent(
                    time=float(t[i]),
                    kind=EventKind.OFF_TRACK,
                    detail=(
                        f"off track for {duration:.3f} s "
                        f"(max excursion {float(distances[i : j + 1].max()):.1f} px)"
                    ),
                )
            )
        i = j + 1
    return events


def rotate_closed_path(ref: ReferencePath, anchor) -> ReferencePath:
    """Cyclically shift a closed path so it starts at the vertex nearest ``anchor``.

    Path distances between a lap and a closed reference depend on where the
    listing starts; anchoring the reference to the trajectory's first scored
    sample removes that arbitrary offset.  Open paths are returned unchanged.
    """
    if not ref.closed:
        return ref
    xy = ref.points_array()
    a = np.asarray(anchor, dtype=float).reshape(2)
    start = int(np.argmin(((xy - a) ** 2).sum(axis=1)))
    if start == 0:
        return ref
    return ReferencePath.from_arrays(np.roll(xy, -start, axis=0), closed=True)


def reverse_path(ref: ReferencePath) -> ReferencePath:
    """The same path traversed in the opposite direction."""
    return ReferencePath.from_arrays(ref.points_array()[::-1], closed=ref.closed)


def scored_window(times, crossings: list[Crossing], completion: float | None):
    """Boolean mask selecting the samples that are scored against the reference.

    With a completed run this is the half-open lap window [t_first, t_first +
    completion); with crossings but no completion, everything from the first
    crossing on; with no crossings at all, every sample.  If the window would
    be empty, all samples are kept (scoring something honest beats scoring
    nothing).
    """
    t = np.asarray(times, dtype=float)
    if crossings:
        t_start = crossings[0].time
        if completion is not None:
            mask = (t >= t_start) & (t < t_start + completion)
        else:
            mask = t >= t_start
    else:
        mask = np.ones(len(t), dtype=bool)
    if not mask.any():
        mask = np.ones(len(t), dtype=bool)
    return mask


def score_trajectory(
    times,
    points,
    ref: ReferencePath,
    start_line: StartLine | None,
    config: SimilarityConfig,
    required_laps: int = 1,
    corridor_px: float = 40.0,
    min_offtrack_s: float = 0.5,
    direction_auto: bool = True,
) -> BenchmarkScore:
    """Full scoring of a twin-frame trajectory against a reference path.

    Detects start-line crossings and lap completion, trims the trajectory to
    the scored lap window, anchors a closed reference at the first scored
    sample, scores against both traversal directions when ``direction_auto``
    (keeping the better one; ties prefer the stored direction), and collects
    off-track events inside the window.
    """
    t = np.asarray(times, dtype=float)
    pts = _as_points(points, "trajectory")

    if start_line is not None:
        crossings = detect_crossings(t, pts, start_line)
        completion, events = completion_time(crossings, required_laps)
    else:
        crossings, completion, events = [], None, []
        events.append(
            FailureEvent(
                time=0.0,
                kind=EventKind.DID_NOT_FINISH,
                detail="no start line configured; completion not measured",
            )
        )
    mask = scored_window(t, crossings, completion)
    scored_t = t[mask]
    scored_pts = pts[mask]

    anchored = rotate_closed_path(ref, scored_pts[0])
    candidates = [(anchored, False)]
    if direction_auto:
        candidates.append((rotate_closed_path(reverse_path(ref), scored_pts[0]), True))

    best: PathDistanceResult | None = None
    best_reversed = False
    for candidate, is_reversed in candidates:
        result = path_distance(scored_pts, candidate.points_array(), config)
        if best is None or result.distance < best.distance:
            best, best_reversed = result, is_reversed

    events = list(events) + off_track_events(
        scored_t, scored_pts, ref, corridor_px, min_offtrack_s
    )
    events.sort(key=lambda e: e.time)
    return BenchmarkScore(
        similarity_percent=similarity_score(best, config),
        distance=best,
        completion_seconds=completion,
        failure_events=tuple(events),
        reference_reversed=best_reversed,
    )
