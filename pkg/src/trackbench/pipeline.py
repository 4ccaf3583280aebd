"""End-to-end benchmark run: config in, report + overlay out.

Stages run strictly in order — reference acquisition, calibration,
detection ingest, projection, scoring — and any module error is re-raised
tagged with the stage where it happened, so a failing run names its phase
instead of leaking a bare exception from three layers down.  Nothing is
written to disk until every stage has finished; a failed run leaves no
partial report.

Reports are plain JSON with sorted keys.  Two runs over identical inputs
produce byte-identical reports except for the ``timestamp`` field, which is
the only value sourced from the environment.
"""

from __future__ import annotations

import datetime
import hashlib
import json
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .config import BenchmarkConfig, config_echo
from .detections import (
    build_trajectory,
    load_detections,
    parse_detections,
    run_detector,
    smooth_trajectory,
    transform_trajectory,
)
from .errors import CalibrationGateError, PipelineStageError, TrackbenchError
from .geometry import (
    estimate_homography,
    leave_one_out_diagnostics,
    load_keypoints,
    reprojection_diagnostics,
)
from .metrics import BenchmarkScore, score_trajectory
from .overlay import render_overlay
from .track import ReferencePath, TrackImage, extract_reference_path, load_reference_path

#: Fraction of the reference arc length suggested as a similarity baseline.
BASELINE_FRACTION = 0.10

REPORT_SCHEMA = {
    "type": "object",
    "required": [
        "config",
        "calibration",
        "score",
        "trajectory_stats",
        "version",
        "timestamp",
    ],
    "additionalProperties": False,
    "properties": {
        "config": {"type": "object"},
        "calibration": {
            "type": "object",
            "required": ["num_keypoints", "reprojection", "leave_one_out", "gate_px"],
            "additionalProperties": False,
            "properties": {
                "num_keypoints": {"type": "integer", "minimum": 4},
                "reprojection": {"$ref": "#/$defs/diagnostics"},
                "leave_one_out": {
                    "anyOf": [{"$ref": "#/$defs/diagnostics"}, {"type": "null"}]
                },
                "gate_px": {"type": ["number", "null"]},
            },
        },
        "score": {
            "type": "object",
            "required": [
                "path_similarity_percent",
                "completion_seconds",
                "distance_px",
                "metric",
                "clamped",
                "reference_reversed",
                "failure_events",
            ],
            "additionalProperties": False,
            "properties": {
                "path_similarity_percent": {"type": "number", "minimum": 0, "maximum": 100},
                "completion_seconds": {"type": ["number", "null"], "minimum": 0},
                "distance_px": {"type": "number", "minimum": 0},
                "metric": {"enum": ["dtw", "frechet"]},
                "clamped": {"type": "boolean"},
                "reference_reversed": {"type": "boolean"},
                "failure_events": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["time_s", "kind", "detail"],
                        "additionalProperties": False,
                        "properties": {
                            "time_s": {"type": "number"},
                            "kind": {"enum": ["off_track", "did_not_finish"]},
                            "detail": {"type": "string"},
                        },
                    },
                },
            },
        },
        "trajectory_stats": {
            "type": "object",
            "required": ["sample_count", "gap_count", "gap_frames", "duration_s"],
            "additionalProperties": False,
            "properties": {
                "sample_count": {"type": "integer", "minimum": 1},
                "gap_count": {"type": "integer", "minimum": 0},
                "gap_frames": {"type": "integer", "minimum": 0},
                "duration_s": {"type": "number", "minimum": 0},
            },
        },
        "version": {"type": "string"},
        "timestamp": {"type": "string"},
    },
    "$defs": {
        "diagnostics": {
            "type": "object",
            "required": [
                "average_error_px",
                "accumulated_error_px",
                "per_point_errors_px",
                "keypoint_count",
            ],
            "additionalProperties": False,
            "properties": {
                "average_error_px": {"type": "number", "minimum": 0},
                "accumulated_error_px": {"type": "number", "minimum": 0},
                "per_point_errors_px": {
                    "type": "array",
                    "items": {"type": "number", "minimum": 0},
                },
                "keypoint_count": {"type": "integer", "minimum": 1},
            },
        }
    },
}


@dataclass(frozen=True)
class BenchmarkReport:
    config: dict
    calibration: dict
    score: BenchmarkScore
    trajectory_stats: dict
    version: str
    timestamp: str

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "calibration": self.calibration,
            "score": self.score.to_dict(),
            "trajectory_stats": self.trajectory_stats,
            "version": self.version,
            "timestamp": self.timestamp,
        }


@dataclass(frozen=True)
class RunResult:
    report: BenchmarkReport
    overlay_svg: str


@contextmanager
def _stage(name: str):
    try:
        yield
    except (CalibrationGateError, PipelineStageError):
        raise
    except (TrackbenchError, OSError, ValueError) as exc:
        raise PipelineStageError(name, exc) from exc


def _sha256(path: Path) -> str:
    return "sha256:" + hashlib.sha256(path.read_bytes()).hexdigest()


def input_hashes(config: BenchmarkConfig) -> dict:
    """Content hashes of every input file the run depends on."""
    hashes = {
        "track.image": _sha256(config.track_image_path),
        "keypoints": _sha256(config.keypoints_path),
    }
    if config.reference_path_path is not None:
        hashes["track.reference_path"] = _sha256(config.reference_path_path)
    if config.detections_path is not None:
        hashes["detections"] = _sha256(config.detections_path)
    return hashes


def run_benchmark(config: BenchmarkConfig) -> RunResult:
    """Execute every stage and assemble the report and overlay.

    Raises CalibrationGateError when the average reprojection error exceeds
    ``calibration.max_average_error_px`` (the run aborts before scoring);
    every other failure is a PipelineStageError naming its stage.
    """
    with _stage("track"):
        image = TrackImage.from_file(config.track_image_path, config.threshold)
        if config.reference_path_path is not None:
            reference = load_reference_path(config.reference_path_path)
        else:
            reference = extract_reference_path(
                image, is_bright=config.is_bright, resample_count=config.resample_count
            )
        twin_size = (image.width, image.height)

    with _stage("calibration"):
        keypoints = load_keypoints(config.keypoints_path)
        homography = estimate_homography(keypoints)
        reprojection = reprojection_diagnostics(homography, keypoints)
        leave_one_out = (
            leave_one_out_diagnostics(keypoints) if len(keypoints.pairs) >= 5 else None
        )
        gate = config.max_average_error_px
        if gate is not None and reprojection.average_error > gate:
            raise CalibrationGateError(reprojection.average_error, gate)

    with _stage("detections"):
        if config.detections_path is not None:
            records = load_detections(config.detections_path)
        else:
            frame_glob = str(config.frames_directory / config.frames_pattern)
            records = parse_detections(run_detector(config.detector_command, frame_glob))
        trajectory = build_trajectory(records, config.fps, config.min_confidence)
        if config.smoothing_window > 1:
            trajectory = smooth_trajectory(trajectory, config.smoothing_window)

    with _stage("projection"):
        twin_trajectory = transform_trajectory(trajectory, homography)

    with _stage("scoring"):
        times = twin_trajectory.times_array()
        points = twin_trajectory.points_array()
        score = score_trajectory(
            times,
            points,
            reference,
            config.start_line,
            config.similarity,
            required_laps=config.required_laps,
            corridor_px=config.corridor_px,
            min_offtrack_s=config.min_offtrack_s,
            direction_auto=config.direction_auto,
        )

    report = BenchmarkReport(
        config={**config_echo(config), "input_hashes": input_hashes(config)},
        calibration={
            "num_keypoints": len(keypoints.pairs),
            "reprojection": reprojection.to_dict(),
            "leave_one_out": leave_one_out.to_dict() if leave_one_out else None,
            "gate_px": config.max_average_error_px,
        },
        score=score,
        trajectory_stats={
            "sample_count": len(twin_trajectory),
            "gap_count": len(twin_trajectory.gaps),
            "gap_frames": sum(b - a + 1 for a, b in twin_trajectory.gaps),
            "duration_s": twin_trajectory.duration(),
        },
        version=__version__,
        timestamp=datetime.datetime.now(datetime.timezone.utc).isoformat(
            timespec="seconds"
        ),
    )
    jsonschema.validate(report.to_dict(), REPORT_SCHEMA)

    event_positions = []
    for event in score.failure_events:
        nearest = int(np.argmin(np.abs(times - event.time)))
        event_positions.append((float(points[nearest, 0]), float(points[nearest, 1])))
    overlay_svg = render_overlay(
        twin_size,
        reference,
        points,
        start_line=config.start_line,
        keypoints=keypoints,
        events=list(score.failure_events),
        event_xy=event_positions,
    )
    return RunResult(report=report, overlay_svg=overlay_svg)


def report_json(report: BenchmarkReport) -> str:
    """Canonical serialization: sorted keys, two-space indent, newline EOF."""
    return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"


def write_run(result: RunResult, out_dir: str | Path) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"report": out / "report.json", "overlay": out / "overlay.svg"}
    paths["report"].write_text(report_json(result.report), encoding="utf-8")
    paths["overlay"].write_text(result.overlay_svg, encoding="utf-8")
    return paths


def suggest_baseline(reference: ReferencePath) -> float:
    """A starting similarity baseline: one tenth of the reference length."""
    return BASELINE_FRACTION * reference.arc_length
