"""Reference-path extraction from a digital-twin track image.

The digital twin is a top-down image of the physical track.  The route the
robot is expected to follow is recovered as an ordered centerline:
threshold the image, thin the foreground to a 1-pixel-wide skeleton
(Zhang-Suen), order the skeleton pixels by walking the curve, then resample
to uniform arc-length spacing so downstream distance computations see a
controlled number of points.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import (
    BranchingSkeletonError,
    DisconnectedSkeletonError,
    EmptyMaskError,
    TrackError,
)
from .geometry import Frame, Point2

__all__ = [
    "TrackImage",
    "ReferencePath",
    "binarize",
    "thin",
    "trace_path",
    "resample",
    "extract_reference_path",
    "load_reference_path",
    "save_reference_path",
]


@dataclass(frozen=True)
class TrackImage:
    """An 8-bit grayscale twin image plus its binarization threshold."""

    width: int
    height: int
    pixels: np.ndarray  # (height, width) uint8, read-only
    threshold: int = 128

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.uint8)
        if px.shape != (self.height, self.width):
            raise ValueError(
                f"pixels shape {px.shape} does not match (height, width) = "
                f"({self.height}, {self.width})"
            )
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image dimensions must be positive")
        if not (0 <= self.threshold <= 255):
            raise ValueError(f"threshold must be in [0, 255], got {self.threshold}")
        px = px.copy()
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @classmethod
    def from_file(cls, path: str | Path, threshold: int = 128) -> "TrackImage":
        """Load a PNG or PGM image; color inputs are reduced to luma."""
        with Image.open(path) as img:
            gray = img if img.mode == "L" else img.convert("L")
            arr = np.asarray(gray, dtype=np.uint8)
        return cls(width=arr.shape[1], height=arr.shape[0], pixels=arr, threshold=threshold)


@dataclass(frozen=True)
class ReferencePath:
    """Ordered centerline points in twin pixels.

    ``arc_length`` includes the closing segment for closed paths.  For a
    closed path the first and last stored points are one resample spacing
    apart (the seam is implicit, never duplicated).
    """

    points: tuple[Point2, ...]
    closed: bool
    arc_length: float
    resample_count: int

    def __post_init__(self):
        pts = tuple(self.points)
        if len(pts) < 2:
            raise ValueError(f"reference path needs >= 2 points, got {len(pts)}")
        for p in pts:
            if p.frame is not Frame.TWIN:
                raise ValueError("reference-path points must be in the twin frame")
        for a, b in zip(pts, pts[1:]):
            if a.x == b.x and a.y == b.y:
                raise ValueError("consecutive reference-path points must be distinct")
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_arrays(cls, xy: np.ndarray, closed: bool) -> "ReferencePath":
        xy = np.asarray(xy, dtype=float)
        points = tuple(Point2(float(x), float(y), Frame.TWIN) for x, y in xy)
        return cls(
            points=points,
            closed=closed,
            arc_length=_polyline_length(xy, closed),
            resample_count=len(points),
        )

    def points_array(self) -> np.ndarray:
        return np.array([[p.x, p.y] for p in self.points], dtype=float)

    def to_dict(self) -> dict:
        return {
            "closed": self.closed,
            "points": [[p.x, p.y] for p in self.points],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ReferencePath":
        if not isinstance(data, dict) or "closed" not in data or "points" not in data:
            raise ValueError("reference-path document needs 'closed' and 'points'")
        if not isinstance(data["closed"], bool):
            raise ValueError("'closed' must be a boolean")
        pts = data["points"]
        if not isinstance(pts, list) or any(
            not isinstance(p, (list, tuple)) or len(p) != 2 for p in pts
        ):
            raise ValueError("'points' must be a list of [x, y] pairs")
        return cls.from_arrays(np.asarray(pts, dtype=float), bool(data["closed"]))


def _polyline_length(xy: np.ndarray, closed: bool) -> float:
    diffs = np.diff(xy, axis=0)
    length = float(np.sqrt((diffs**2).sum(axis=1)).sum())
    if closed:
        length += float(np.linalg.norm(xy[0] - xy[-1]))
    return length


def binarize(image: TrackImage, is_bright: bool = True) -> np.ndarray:
    """Threshold the image into a boolean foreground mask.

    A pixel is foreground when its intensity is >= threshold (bright track
    on dark background) or <= threshold when ``is_bright`` is false.
    """
    if is_bright:
        mask = image.pixels >= image.threshold
    else:
        mask = image.pixels <= image.threshold
    if not mask.any():
        raise EmptyMaskError(
            f"binarization produced an empty mask (threshold {image.threshold}, "
            f"is_bright={is_bright}); check threshold and polarity"
        )
    return mask


def thin(mask: np.ndarray) -> np.ndarray:
    """Thin a mask to a 1-pixel-wide 8-connected skeleton (Zhang-Suen).

    Two sub-iterations per pass, each removing its marked pixels in
    parallel, repeated until stable; a final cleanup removes the redundant
    staircase pixels the raw recurrence leaves on diagonal runs, so curve
    pixels end up with exactly two skeleton neighbours (endpoints with one).
    Idempotent, and deterministic: the result depends only on the input.
    """
    grid = _zhang_suen_fixpoint(mask)
    return _remove_staircase_pixels(grid)


def _zhang_suen_fixpoint(mask: np.ndarray) -> np.ndarray:
    grid = np.asarray(mask, dtype=bool).copy()
    if grid.ndim != 2:
        raise ValueError("mask must be 2-D")
    while True:
        changed = False
        for step in (0, 1):
            p = np.pad(grid, 1)
            # Neighbours P2..P9 clockwise starting from the pixel above.
            p2 = p[:-2, 1:-1]
            p3 = p[:-2, 2:]
            p4 = p[1:-1, 2:]
            p5 = p[2:, 2:]
            p6 = p[2:, 1:-1]
            p7 = p[2:, :-2]
            p8 = p[1:-1, :-2]
            p9 = p[:-2, :-2]
            ring = (p2, p3, p4, p5, p6, p7, p8, p9)
            b = np.zeros(grid.shape, dtype=np.uint8)
            for neighbour in ring:
                b += neighbour
            a = np.zeros(grid.shape, dtype=np.uint8)
            for k in range(8):
                a += (~ring[k]) & ring[(k + 1) % 8]
            removable = grid & (b >= 2) & (b <= 6) & (a == 1)
            if step == 0:
                removable &= ~(p2 & p4 & p6) & ~(p4 & p6 & p8)
            else:
                removable &= ~(p2 & p4 & p8) & ~(p2 & p6 & p8)
            if removable.any():
                grid[removable] = False
                changed = True
        if not changed:
            return grid


def _neighbour_offsets():
    return [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]


def _remove_staircase_pixels(grid: np.ndarray) -> np.ndarray:
    """Drop skeleton pixels that only thicken a diagonal staircase.

    A non-endpoint pixel whose foreground neighbours form a single
    8-connected group is redundant: the curve stays 8-connected without it.
    Pixels are visited in row-major order and removal repeats until stable,
    which keeps the operation deterministic and idempotent.  Genuine curve
    pixels (two opposite neighbours) and junctions (neighbours in separate
    groups) are untouched.
    """
    grid = grid.copy()
    offsets = _neighbour_offsets()
    while True:
        changed = False
        ys, xs = np.nonzero(grid)
        for y, x in zip(ys.tolist(), xs.tolist()):
            if not grid[y, x]:
                continue
            neighbours = [
                (y + dy, x + dx)
                for dy, dx in offsets
                if 0 <= y + dy < grid.shape[0]
                and 0 <= x + dx < grid.shape[1]
                and grid[y + dy, x + dx]
            ]
            if len(neighbours) < 2:
                continue
            if _group_count(neighbours) == 1:
                grid[y, x] = False
                changed = True
        if not changed:
            return grid


def _group_count(cells) -> int:
    """Number of 8-connected groups among a handful of cells."""
    remaining = set(cells)
    groups = 0
    while remaining:
        groups += 1
        stack = [remaining.pop()]
        while stack:
            cy, cx = stack.pop()
            linked = [c for c in remaining if abs(c[0] - cy) <= 1 and abs(c[1] - cx) <= 1]
            for c in linked:
                remaining.remove(c)
                stack.append(c)
    return groups


def trace_path(skeleton: np.ndarray) -> ReferencePath:
    """Order the skeleton pixels by walking the curve.

    The skeleton must be a single 8-connected curve: every pixel with 1 or 2
    skeleton neighbours (open curve, exactly two endpoints) or every pixel
    with exactly 2 (closed loop).  Open curves start at the endpoint with
    the smallest (y, x); closed loops start at the smallest-(y, x) pixel and
    step toward the neighbour at the smallest angle from the +x axis.

    Raises
    ------
    BranchingSkeletonError
        Some pixel has >= 3 neighbours (spurs in the track image).
    DisconnectedSkeletonError
        More than one connected component.
    """
    grid = np.asarray(skeleton, dtype=bool)
    ys, xs = np.nonzero(grid)
    count = len(ys)
    if count < 2:
        raise TrackError(f"skeleton has {count} pixel(s); need at least 2 to form a path")
    pixel_set = set(zip(ys.tolist(), xs.tolist()))

    def neighbours(yx):
        y, x = yx
        return [(y + dy, x + dx) for dy, dx in _neighbour_offsets() if (y + dy, x + dx) in pixel_set]

    degree = {yx: len(neighbours(yx)) for yx in pixel_set}
    branches = sorted(yx for yx, d in degree.items() if d >= 3)
    if branches:
        raise BranchingSkeletonError([(x, y) for y, x in branches])

    components = _component_count(pixel_set)
    if components != 1:
        raise DisconnectedSkeletonError(components)

    endpoints = sorted(yx for yx, d in degree.items() if d == 1)
    if endpoints:
        start = endpoints[0]
        closed = False
        first_step = None
    else:
        start = min(pixel_set)
        closed = True
        # Smallest angle from +x measured in image coordinates (y down),
        # wrapped to [0, 2*pi).
        def angle(yx):
            return math.atan2(yx[0] - start[0], yx[1] - start[1]) % (2.0 * math.pi)

        first_step = min(neighbours(start), key=angle)

    order = [start]
    visited = {start}
    current = start
    prev = None
    if first_step is not None:
        order.append(first_step)
        visited.add(first_step)
        prev, current = start, first_step
    while len(order) < count:
        nxt = [n for n in neighbours(current) if n != prev and n not in visited]
        if not nxt:
            break
        step = nxt[0]
        order.append(step)
        visited.add(step)
        prev, current = current, step
    if len(order) != count:
        # A well-formed curve walk covers everything; anything else means the
        # degree checks were satisfied by a shape that is not a single curve.
        raise TrackError("skeleton walk did not cover every pixel; not a single curve")

    xy = np.array([[x, y] for y, x in order], dtype=float)
    return ReferencePath.from_arrays(xy, closed=closed)


def _component_count(pixel_set) -> int:
    seen = set()
    components = 0
    for yx in pixel_set:
        if yx in seen:
            continue
        components += 1
        stack = [yx]
        seen.add(yx)
        while stack:
            y, x = stack.pop()
            for dy, dx in _neighbour_offsets():
                n = (y + dy, x + dx)
                if n in pixel_set and n not in seen:
                    seen.add(n)
                    stack.append(n)
    return components


def polyline_cumulative(xy: np.ndarray) -> np.ndarray:
    """Cumulative arc length at each vertex of a polyline (first entry 0)."""
    diffs = np.diff(xy, axis=0)
    seg_lengths = np.sqrt((diffs**2).sum(axis=1))
    return np.concatenate([[0.0], np.cumsum(seg_lengths)])


def point_at_arc(xy: np.ndarray, cumulative: np.ndarray, target: float) -> np.ndarray:
    """Point at arc position ``target`` along the polyline ``xy``.

    Shared by resampling and the synthetic driver so that a simulated robot
    sampled at the resampling arc positions lands on the resampled vertices
    bit-for-bit.
    """
    seg = int(np.searchsorted(cumulative, target, side="right")) - 1
    seg = min(max(seg, 0), len(xy) - 2)
    seg_len = cumulative[seg + 1] - cumulative[seg]
    t = 0.0 if seg_len == 0.0 else (target - cumulative[seg]) / seg_len
    return xy[seg] + t * (xy[seg + 1] - xy[seg])


def closed_polyline(path: "ReferencePath") -> np.ndarray:
    """Vertex array with the seam vertex appended for closed paths."""
    xy = path.points_array()
    if path.closed:
        xy = np.vstack([xy, xy[:1]])
    return xy


def resample(path: ReferencePath, count: int) -> ReferencePath:
    """Redistribute ``count`` points at equal arc-length spacing.

    Open paths keep both endpoints exactly (spacing L/(count-1)); closed
    paths keep the first point and space all ``count`` points L/count apart
    around the seam.
    """
    if count < 2:
        raise ValueError(f"resample count must be >= 2, got {count}")
    xy = closed_polyline(path)
    cumulative = polyline_cumulative(xy)
    total = float(cumulative[-1])
    if path.closed:
        targets = np.arange(count) * total / count
    else:
        targets = np.linspace(0.0, total, count)
    out = np.empty((count, 2))
    for i, target in enumerate(targets):
        out[i] = point_at_arc(xy, cumulative, float(target))
    out[0] = xy[0]
    if not path.closed:
        out[-1] = xy[-1]
    return ReferencePath.from_arrays(out, closed=path.closed)


def extract_reference_path(
    image: TrackImage, is_bright: bool = True, resample_count: int = 512
) -> ReferencePath:
    """Full extraction: binarize, thin, trace, resample."""
    mask = binarize(image, is_bright=is_bright)
    skeleton = thin(mask)
    traced = trace_path(skeleton)
    return resample(traced, resample_count)


def load_reference_path(path: str | Path) -> ReferencePath:
    with open(path, "r", encoding="utf-8") as fh:
        return ReferencePath.from_dict(json.load(fh))


def save_reference_path(ref: ReferencePath, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(ref.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
