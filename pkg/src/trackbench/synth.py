"""Synthetic trial generation with an exact analytic camera model.

A pinhole camera sits at a known height above flat ground, pitched down by a
known angle, and the digital-twin image is a scaled top-down map of that
ground anchored so the twin center lies on the camera's optical axis.  Every
mapping in the chain (twin -> ground -> camera) is composed analytically, so
the module can hand the rest of the toolkit fixtures whose correct answers
are known in closed form: the exact plane-induced homography, a rendered
track image whose centerline is the generating path, and detection streams
sampled from a constant-speed drive with optional seeded Gaussian pixel
noise (numpy's default PCG64 generator, stable across platforms).

Driven samples reuse the arc-interpolation helpers from ``track`` at the
same arc positions the resampler uses, so a noise-free robot at one frame
per resampled vertex reproduces the reference vertices bit-for-bit.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from .geometry import (
    Frame,
    Homography,
    KeypointPair,
    KeypointSet,
    Point2,
    save_keypoints,
)
from .metrics import (
    BenchmarkScore,
    MetricKind,
    SimilarityConfig,
    StartLine,
    score_trajectory,
)
from .track import (
    ReferencePath,
    TrackImage,
    closed_polyline,
    point_at_arc,
    polyline_cumulative,
    resample,
    save_reference_path,
)

#: Vertices used for the analytic shape before resampling.
DENSE_SAMPLES = 4096

#: Half-length of the generated start line, in twin pixels.
START_LINE_HALF_PX = 40.0

#: Corridor defaults mirrored into the generated benchmark config.
DEFAULT_CORRIDOR_PX = 40.0
DEFAULT_MIN_OFFTRACK_S = 0.5


class PathKind(enum.Enum):
    OVAL = "oval"
    FIGURE_EIGHT = "figure_eight"


@dataclass(frozen=True)
class CameraPose:
    """Overhead camera intrinsics/extrinsics plus the twin ground mapping.

    ``pitch_deg`` is measured down from the horizon (90 would be straight
    down); ``ground_scale`` is twin pixels per meter of ground.
    """

    height_m: float = 2.15
    pitch_deg: float = 41.0
    focal_length_px: float = 1000.0
    image_size: tuple[int, int] = (1920, 1080)
    ground_scale: float = 100.0
    twin_size: tuple[int, int] = (300, 300)

    def __post_init__(self):
        if self.height_m <= 0:
            raise ValueError("camera height must be positive")
        if not (0.0 < self.pitch_deg < 90.0):
            raise ValueError("pitch must lie strictly between 0 and 90 degrees")
        if self.focal_length_px <= 0:
            raise ValueError("focal length must be positive")
        if self.ground_scale <= 0:
            raise ValueError("ground scale must be positive")
        for size in (self.image_size, self.twin_size):
            if size[0] <= 0 or size[1] <= 0:
                raise ValueError("image sizes must be positive")


@dataclass(frozen=True)
class SimScenario:
    """Everything needed to generate one deterministic trial."""

    pose: CameraPose = CameraPose()
    path_kind: PathKind = PathKind.OVAL
    lap_time_s: float = 20.0
    fps: float = 25.6
    noise_sigma_px: float = 0.0
    rng_seed: int = 0
    resample_count: int = 512
    drive_laps: float = 1.25
    metric_kind: MetricKind = MetricKind.DTW
    baseline_px: float = 25.0
    clamp_delta_px: float | None = None
    required_laps: int = 1
    start_fraction: float = 0.1
    stroke_width_px: int = 7

    def __post_init__(self):
        if self.lap_time_s <= 0 or self.fps <= 0:
            raise ValueError("lap_time_s and fps must be positive")
        if self.noise_sigma_px < 0:
            raise ValueError("noise_sigma_px must be non-negative")
        if self.resample_count < 2:
            raise ValueError("resample_count must be >= 2")
        if self.drive_laps <= 0:
            raise ValueError("drive_laps must be positive")
        if not (0.0 < self.start_fraction < 1.0):
            raise ValueError("start_fraction must lie strictly between 0 and 1")
        if self.stroke_width_px < 5:
            raise ValueError("stroke width below 5 px breaks centerline extraction")
        if self.required_laps < 1:
            raise ValueError("required_laps must be >= 1")

    def similarity_config(self) -> SimilarityConfig:
        return SimilarityConfig(
            metric=self.metric_kind,
            baseline=self.baseline_px,
            clamp_delta=self.clamp_delta_px,
        )


# --- analytic camera model -------------------------------------------------

def _ground_to_camera(pose: CameraPose) -> np.ndarray:
    """Homography from ground meters (x east, y forward) to camera pixels."""
    theta = math.radians(pose.pitch_deg)
    s, c = math.sin(theta), math.cos(theta)
    f = pose.focal_length_px
    cx, cy = pose.image_size[0] / 2.0, pose.image_size[1] / 2.0
    intrinsics = np.array([[f, 0.0, cx], [0.0, f, cy], [0.0, 0.0, 1.0]])
    # Rows: camera x (east), camera y (down-forward), camera z (optical axis)
    # applied to ground point (x, y, 0) seen from height h.
    h = pose.height_m
    extrinsics = np.array(
        [[1.0, 0.0, 0.0], [0.0, -s, h * c], [0.0, c, h * s]]
    )
    return intrinsics @ extrinsics


def _twin_to_ground(pose: CameraPose) -> np.ndarray:
    """Affine map from twin pixels to ground meters.

    Twin x grows east, twin y grows toward the camera (image rows point
    down); the twin center is pinned to the point where the optical axis
    meets the ground, ``height / tan(pitch)`` meters ahead of the camera.
    """
    theta = math.radians(pose.pitch_deg)
    scale = pose.ground_scale
    w, h = pose.twin_size
    forward = pose.height_m / math.tan(theta)
    return np.array(
        [
            [1.0 / scale, 0.0, -w / (2.0 * scale)],
            [0.0, -1.0 / scale, h / (2.0 * scale) + forward],
            [0.0, 0.0, 1.0],
        ]
    )


def twin_to_camera_matrix(pose: CameraPose) -> np.ndarray:
    """The exact 3x3 map sending twin pixels to camera pixels."""
    return _ground_to_camera(pose) @ _twin_to_ground(pose)


def plane_homography(pose: CameraPose) -> Homography:
    """The camera-to-twin homography induced by the ground plane.

    This is the value `estimate_homography` should recover from keypoints
    sampled with `project_to_camera`.
    """
    return Homography(np.linalg.inv(twin_to_camera_matrix(pose)))


def ground_depths(pose: CameraPose, twin_points: np.ndarray) -> np.ndarray:
    """Distance along the optical axis for each twin point (must be > 0)."""
    theta = math.radians(pose.pitch_deg)
    ground = _twin_to_ground(pose)
    pts = np.atleast_2d(np.asarray(twin_points, dtype=float))
    homogeneous = np.hstack([pts, np.ones((len(pts), 1))]) @ ground.T
    y = homogeneous[:, 1]
    return y * math.cos(theta) + pose.height_m * math.sin(theta)


def project_to_camera(pose: CameraPose, twin_points: np.ndarray) -> np.ndarray:
    """Project twin points to camera pixels, checking they are viewable."""
    pts = np.atleast_2d(np.asarray(twin_points, dtype=float))
    depths = ground_depths(pose, pts)
    if np.any(depths <= 1e-6):
        raise ValueError("twin point projects behind the camera")
    homogeneous = np.hstack([pts, np.ones((len(pts), 1))]) @ twin_to_camera_matrix(pose).T
    return homogeneous[:, :2] / homogeneous[:, 2:3]


# --- shapes ----------------------------------------------------------------

def _dense_shape(kind: PathKind, twin_size: tuple[int, int]) -> np.ndarray:
    w, h = twin_size
    cx, cy = w / 2.0, h / 2.0
    t = np.linspace(0.0, 2.0 * math.pi, DENSE_SAMPLES, endpoint=False)
    if kind is PathKind.OVAL:
        x = cx + 0.38 * w * np.cos(t)
        y = cy + 0.30 * h * np.sin(t)
    elif kind is PathKind.FIGURE_EIGHT:
        # Gerono lemniscate; self-intersects at the center on purpose, so it
        # exercises the reference-path override route (a rendered crossing
        # cannot be traced as a branch-free skeleton).
        x = cx + 0.40 * w * np.cos(t)
        y = cy + 0.60 * h * np.sin(t) * np.cos(t)
    else:  # pragma: no cover - enum is closed
        raise ValueError(f"unknown path kind: {kind}")
    return np.column_stack([x, y])


def generate_reference(scenario: SimScenario) -> ReferencePath:
    """The resampled reference path for a scenario."""
    dense = _dense_shape(scenario.path_kind, scenario.pose.twin_size)
    return resample(
        ReferencePath.from_arrays(dense, closed=True), scenario.resample_count
    )


def render_track(scenario: SimScenario) -> TrackImage:
    """Rasterize the analytic shape as a bright stroke on black."""
    w, h = scenario.pose.twin_size
    dense = _dense_shape(scenario.path_kind, scenario.pose.twin_size)
    img = Image.new("L", (w, h), 0)
    draw = ImageDraw.Draw(img)
    coords = [tuple(p) for p in dense] + [tuple(dense[0])]
    draw.line(coords, fill=255, width=scenario.stroke_width_px, joint="curve")
    return TrackImage(width=w, height=h, pixels=np.asarray(img, dtype=np.uint8))


# --- trial assembly --------------------------------------------------------

@dataclass(frozen=True)
class SimulatedTrial:
    scenario: SimScenario
    track_image: TrackImage
    reference: ReferencePath
    keypoints: KeypointSet
    detections_jsonl: str
    truth: BenchmarkScore
    start_line: StartLine
    camera_to_twin: Homography
    times: np.ndarray
    twin_points: np.ndarray
    camera_points: np.ndarray


def _drive(scenario: SimScenario) -> tuple[np.ndarray, np.ndarray]:
    """Constant-speed samples along the shape: (times, twin points)."""
    dense = _dense_shape(scenario.path_kind, scenario.pose.twin_size)
    xy = closed_polyline(ReferencePath.from_arrays(dense, closed=True))
    cumulative = polyline_cumulative(xy)
    total = float(cumulative[-1])

    frames_per_lap = scenario.fps * scenario.lap_time_s
    n_frames = int(round(scenario.drive_laps * frames_per_lap)) + 1
    times = np.arange(n_frames) / scenario.fps
    points = np.empty((n_frames, 2))
    for k in range(n_frames):
        lap_position = k % frames_per_lap
        # Same expression shape as the resampler's targets so that, when
        # frames_per_lap == resample_count, positions match its vertices
        # bit-for-bit.
        target = lap_position * total / frames_per_lap
        points[k] = point_at_arc(xy, cumulative, float(target))
    return times, points


def make_keypoints(pose: CameraPose, grid_fractions=(0.15, 0.5, 0.85)) -> KeypointSet:
    """Exact twin/camera correspondences on a grid inside the twin image."""
    w, h = pose.twin_size
    pairs = []
    for r, fy in enumerate(grid_fractions):
        for c, fx in enumerate(grid_fractions):
            twin = np.array([fx * w, fy * h])
            camera = project_to_camera(pose, twin)[0]
            pairs.append(
                KeypointPair(
                    camera=Point2(float(camera[0]), float(camera[1]), Frame.CAMERA),
                    twin=Point2(float(twin[0]), float(twin[1]), Frame.TWIN),
                    label=f"grid-{r}{c}",
                )
            )
    return KeypointSet(
        pairs=tuple(pairs),
        image_size_camera=pose.image_size,
        image_size_twin=pose.twin_size,
    )


def make_start_line(reference: ReferencePath, scenario: SimScenario) -> StartLine:
    """A gate perpendicular to the path, a fixed fraction into the lap."""
    xy = reference.points_array()
    n = len(xy)
    i = int(round(scenario.start_fraction * n)) % n
    j = (i + 1) % n
    mid = (xy[i] + xy[j]) / 2.0
    chord = xy[j] - xy[i]
    normal = np.array([-chord[1], chord[0]])
    normal /= np.linalg.norm(normal)
    a = mid + START_LINE_HALF_PX * normal
    b = mid - START_LINE_HALF_PX * normal
    return StartLine(
        a=Point2(float(a[0]), float(a[1]), Frame.TWIN),
        b=Point2(float(b[0]), float(b[1]), Frame.TWIN),
        min_crossing_interval=scenario.lap_time_s / 4.0,
    )


def simulate_trial(scenario: SimScenario) -> SimulatedTrial:
    """Generate a complete deterministic trial.

    The ground-truth score is computed by scoring the noise-free twin-frame
    drive against the reference path; detector noise is then applied in
    camera pixels, where real detector error lives.
    """
    reference = generate_reference(scenario)
    times, twin_points = _drive(scenario)
    camera_points = project_to_camera(scenario.pose, twin_points)

    w, h = scenario.pose.image_size
    if camera_points[:, 0].min() < 0 or camera_points[:, 0].max() > w:
        raise ValueError("driven path leaves the camera image horizontally")
    if camera_points[:, 1].min() < 0 or camera_points[:, 1].max() > h:
        raise ValueError("driven path leaves the camera image vertically")

    if scenario.noise_sigma_px > 0:
        rng = np.random.default_rng(scenario.rng_seed)
        camera_points = camera_points + rng.normal(
            0.0, scenario.noise_sigma_px, size=camera_points.shape
        )

    lines = [
        json.dumps(
            {
                "frame_index": k,
                "centroid": [float(camera_points[k, 0]), float(camera_points[k, 1])],
                "confidence": 1.0,
            }
        )
        for k in range(len(camera_points))
    ]
    detections_jsonl = "\n".join(lines) + "\n"

    start_line = make_start_line(reference, scenario)
    truth = score_trajectory(
        times,
        twin_points,
        reference,
        start_line,
        scenario.similarity_config(),
        required_laps=scenario.required_laps,
        corridor_px=DEFAULT_CORRIDOR_PX,
        min_offtrack_s=DEFAULT_MIN_OFFTRACK_S,
    )
    return SimulatedTrial(
        scenario=scenario,
        track_image=render_track(scenario),
        reference=reference,
        keypoints=make_keypoints(scenario.pose),
        detections_jsonl=detections_jsonl,
        truth=truth,
        start_line=start_line,
        camera_to_twin=plane_homography(scenario.pose),
        times=times,
        twin_points=twin_points,
        camera_points=camera_points,
    )


def scenario_to_dict(scenario: SimScenario) -> dict:
    pose = scenario.pose
    return {
        "pose": {
            "height_m": pose.height_m,
            "pitch_deg": pose.pitch_deg,
            "focal_length_px": pose.focal_length_px,
            "image_size": list(pose.image_size),
            "ground_scale": pose.ground_scale,
            "twin_size": list(pose.twin_size),
        },
        "path": scenario.path_kind.value,
        "lap_time_s": scenario.lap_time_s,
        "fps": scenario.fps,
        "noise_sigma_px": scenario.noise_sigma_px,
        "seed": scenario.rng_seed,
        "resample_count": scenario.resample_count,
        "drive_laps": scenario.drive_laps,
        "metric": {
            "kind": scenario.metric_kind.value,
            "baseline_px": scenario.baseline_px,
            "clamp_delta_px": scenario.clamp_delta_px,
            "required_laps": scenario.required_laps,
        },
        "start_fraction": scenario.start_fraction,
        "stroke_width_px": scenario.stroke_width_px,
    }


def write_fixture(trial: SimulatedTrial, out_dir: str | Path) -> dict[str, Path]:
    """Write the full fixture directory and return the file map.

    Files: track.png, ref_path.json, keypoints.json, detections.jsonl,
    truth.json, plus a ready-to-run benchmark_config.json pointing at them.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "track": out / "track.png",
        "reference": out / "ref_path.json",
        "keypoints": out / "keypoints.json",
        "detections": out / "detections.jsonl",
        "truth": out / "truth.json",
        "config": out / "benchmark_config.json",
    }
    Image.fromarray(np.asarray(trial.track_image.pixels)).save(paths["track"])
    save_reference_path(trial.reference, paths["reference"])
    save_keypoints(trial.keypoints, paths["keypoints"])
    paths["detections"].write_text(trial.detections_jsonl, encoding="utf-8")
    truth_doc = {
        "score": trial.truth.to_dict(),
        "scenario": scenario_to_dict(trial.scenario),
    }
    paths["truth"].write_text(
        json.dumps(truth_doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

    scenario = trial.scenario
    config = {
        "fps": scenario.fps,
        "keypoints": "keypoints.json",
        "detections": "detections.jsonl",
        "track": {
            "image": "track.png",
            "reference_path": "ref_path.json",
            "resample_count": scenario.resample_count,
        },
        "metric": {
            "kind": scenario.metric_kind.value,
            "baseline_px": scenario.baseline_px,
            "required_laps": scenario.required_laps,
        },
        "start_line": {
            "a": [trial.start_line.a.x, trial.start_line.a.y],
            "b": [trial.start_line.b.x, trial.start_line.b.y],
            "min_crossing_interval_s": trial.start_line.min_crossing_interval,
        },
        "output": {"directory": "out"},
    }
    if scenario.clamp_delta_px is not None:
        config["metric"]["clamp_delta_px"] = scenario.clamp_delta_px
    paths["config"].write_text(
        json.dumps(config, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return paths
