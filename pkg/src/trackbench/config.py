"""Strict JSON configuration loading for benchmark runs and simulations.

One format for everything: a single JSON document.  Parsing is deliberately
unforgiving — unknown keys are errors (silent misconfiguration is the main
failure mode of config-driven benchmarks), required keys are named in full
dotted form when missing, and every referenced file must exist at load time.
A ``"_comment"`` key is allowed at any nesting level and ignored, since JSON
has no comment syntax.

Relative paths are resolved against the directory containing the config
file, so fixture directories stay relocatable.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from .errors import (
    ConfigError,
    MissingFileError,
    MissingKeyError,
    UnknownKeyError,
)
from .geometry import Frame, Point2
from .metrics import MetricKind, SimilarityConfig, StartLine
from .synth import CameraPose, PathKind, SimScenario

COMMENT_KEY = "_comment"


@dataclass(frozen=True)
class BenchmarkConfig:
    """Validated, path-resolved inputs for one benchmark run."""

    fps: float
    keypoints_path: Path
    track_image_path: Path
    reference_path_path: Path | None
    threshold: int
    is_bright: bool
    resample_count: int
    detections_path: Path | None
    frames_directory: Path | None
    frames_pattern: str
    detector_command: str | None
    min_confidence: float
    smoothing_window: int
    similarity: SimilarityConfig
    required_laps: int
    corridor_px: float
    min_offtrack_s: float
    direction_auto: bool
    start_line: StartLine
    max_average_error_px: float | None
    output_directory: Path


def _load_json(path: Path) -> dict:
    if not path.exists():
        raise MissingFileError("config", path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    return data


def _reject_unknown(obj: dict, allowed: set[str], prefix: str) -> None:
    for key in obj:
        if key == COMMENT_KEY:
            continue
        if key not in allowed:
            dotted = f"{prefix}.{key}" if prefix else key
            raise UnknownKeyError(dotted)


def _section(data: dict, key: str, required: bool = False) -> dict:
    value = data.get(key)
    if value is None:
        if required:
            raise MissingKeyError(key)
        return {}
    if not isinstance(value, dict):
        raise ConfigError(f"config key {key!r} must be an object")
    return value


def _number(obj: dict, dotted: str, default=None, minimum=None, exclusive=False):
    key = dotted.rsplit(".", 1)[-1]
    value = obj.get(key, default)
    if value is None:
        return None
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ConfigError(f"config key {dotted!r} must be a number")
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(f"config key {dotted!r} must be finite")
    if minimum is not None:
        if exclusive and value <= minimum:
            raise ConfigError(f"config key {dotted!r} must be > {minimum}")
        if not exclusive and value < minimum:
            raise ConfigError(f"config key {dotted!r} must be >= {minimum}")
    return value


def _integer(obj: dict, dotted: str, default=None, minimum=None):
    key = dotted.rsplit(".", 1)[-1]
    value = obj.get(key, default)
    if value is None:
        return None
    if not isinstance(value, int) or isinstance(value, bool):
        raise ConfigError(f"config key {dotted!r} must be an integer")
    if minimum is not None and value < minimum:
        raise ConfigError(f"config key {dotted!r} must be >= {minimum}")
    return value


def _boolean(obj: dict, dotted: str, default: bool) -> bool:
    key = dotted.rsplit(".", 1)[-1]
    value = obj.get(key, default)
    if not isinstance(value, bool):
        raise ConfigError(f"config key {dotted!r} must be true or false")
    return value


def _string(obj: dict, dotted: str, default=None):
    key = dotted.rsplit(".", 1)[-1]
    value = obj.get(key, default)
    if value is None:
        return None
    if not isinstance(value, str) or not value:
        raise ConfigError(f"config key {dotted!r} must be a non-empty string")
    return value


def _existing_path(base: Path, obj: dict, dotted: str, required: bool) -> Path | None:
    raw = _string(obj, dotted)
    if raw is None:
        if required:
            raise MissingKeyError(dotted)
        return None
    resolved = (base / raw).resolve() if not Path(raw).is_absolute() else Path(raw)
    if not resolved.exists():
        raise MissingFileError(dotted, resolved)
    return resolved


def _twin_point(obj: dict, dotted: str) -> Point2:
    key = dotted.rsplit(".", 1)[-1]
    value = obj.get(key)
    if value is None:
        raise MissingKeyError(dotted)
    if (
        not isinstance(value, list)
        or len(value) != 2
        or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in value)
    ):
        raise ConfigError(f"config key {dotted!r} must be a [x, y] pair of numbers")
    return Point2(float(value[0]), float(value[1]), Frame.TWIN)


def _metric_kind(obj: dict, dotted: str, default: str) -> MetricKind:
    raw = _string(obj, dotted, default)
    try:
        return MetricKind(raw)
    except ValueError:
        choices = ", ".join(k.value for k in MetricKind)
        raise ConfigError(f"config key {dotted!r} must be one of: {choices}")


def load_benchmark_config(path: str | Path) -> BenchmarkConfig:
    """Load and validate a benchmark config file.

    Raises ConfigError subclasses naming the offending dotted key: missing
    required keys, unknown keys, missing files, bad types or ranges, and a
    violated detections/detector exclusivity rule.
    """
    config_path = Path(path)
    data = _load_json(config_path)
    base = config_path.resolve().parent

    _reject_unknown(
        data,
        {
            "fps",
            "keypoints",
            "track",
            "detections",
            "frames",
            "detector",
            "min_confidence",
            "smoothing_window",
            "metric",
            "start_line",
            "calibration",
            "output",
        },
        "",
    )

    fps = _number(data, "fps", minimum=0.0, exclusive=True)
    if fps is None:
        raise MissingKeyError("fps")

    keypoints_path = _existing_path(base, data, "keypoints", required=True)

    track = _section(data, "track", required=True)
    _reject_unknown(
        track, {"image", "threshold", "is_bright", "resample_count", "reference_path"}, "track"
    )
    track_image = _existing_path(base, track, "track.image", required=True)
    threshold = _integer(track, "track.threshold", default=128, minimum=0)
    if threshold > 255:
        raise ConfigError("config key 'track.threshold' must be <= 255")
    is_bright = _boolean(track, "track.is_bright", True)
    resample_count = _integer(track, "track.resample_count", default=512, minimum=2)
    reference_path = _existing_path(base, track, "track.reference_path", required=False)

    detections_path = _existing_path(base, data, "detections", required=False)

    frames = _section(data, "frames")
    _reject_unknown(frames, {"directory", "pattern"}, "frames")
    frames_directory = _existing_path(base, frames, "frames.directory", required=False)
    frames_pattern = _string(frames, "frames.pattern", "*.png")

    detector = _section(data, "detector")
    _reject_unknown(detector, {"command"}, "detector")
    detector_command = _string(detector, "detector.command")

    has_detector_route = frames_directory is not None or detector_command is not None
    if detections_path is not None and has_detector_route:
        raise ConfigError(
            "set either 'detections' or 'frames'+'detector.command', not both"
        )
    if detections_path is None:
        if frames_directory is None and detector_command is None:
            raise ConfigError(
                "one of 'detections' or 'frames'+'detector.command' is required"
            )
        if frames_directory is None:
            raise MissingKeyError("frames.directory")
        if detector_command is None:
            raise MissingKeyError("detector.command")

    min_confidence = _number(data, "min_confidence", default=0.25, minimum=0.0)
    if min_confidence > 1.0:
        raise ConfigError("config key 'min_confidence' must be <= 1")
    smoothing_window = _integer(data, "smoothing_window", default=1, minimum=1)
    if smoothing_window % 2 == 0:
        raise ConfigError("config key 'smoothing_window' must be odd")

    metric = _section(data, "metric", required=True)
    _reject_unknown(
        metric,
        {
            "kind",
            "baseline_px",
            "clamp_delta_px",
            "required_laps",
            "corridor_px",
            "min_offtrack_s",
            "direction_auto",
        },
        "metric",
    )
    kind = _metric_kind(metric, "metric.kind", "dtw")
    baseline = _number(metric, "metric.baseline_px", minimum=0.0, exclusive=True)
    if baseline is None:
        raise MissingKeyError("metric.baseline_px")
    clamp = _number(metric, "metric.clamp_delta_px", minimum=0.0, exclusive=True)
    required_laps = _integer(metric, "metric.required_laps", default=1, minimum=1)
    corridor = _number(metric, "metric.corridor_px", default=40.0, minimum=0.0, exclusive=True)
    min_offtrack = _number(metric, "metric.min_offtrack_s", default=0.5, minimum=0.0)
    direction_auto = _boolean(metric, "metric.direction_auto", True)

    line = _section(data, "start_line", required=True)
    _reject_unknown(line, {"a", "b", "min_crossing_interval_s"}, "start_line")
    interval = _number(line, "start_line.min_crossing_interval_s", default=0.0, minimum=0.0)
    try:
        start_line = StartLine(
            a=_twin_point(line, "start_line.a"),
            b=_twin_point(line, "start_line.b"),
            min_crossing_interval=interval,
        )
    except ValueError as exc:
        raise ConfigError(f"bad start_line: {exc}") from exc

    calibration = _section(data, "calibration")
    _reject_unknown(calibration, {"max_average_error_px"}, "calibration")
    max_average_error = _number(
        calibration, "calibration.max_average_error_px", minimum=0.0, exclusive=True
    )

    output = _section(data, "output")
    _reject_unknown(output, {"directory"}, "output")
    out_raw = _string(output, "output.directory", "benchmark_out")
    output_directory = (
        (base / out_raw) if not Path(out_raw).is_absolute() else Path(out_raw)
    )

    return BenchmarkConfig(
        fps=fps,
        keypoints_path=keypoints_path,
        track_image_path=track_image,
        reference_path_path=reference_path,
        threshold=threshold,
        is_bright=is_bright,
        resample_count=resample_count,
        detections_path=detections_path,
        frames_directory=frames_directory,
        frames_pattern=frames_pattern,
        detector_command=detector_command,
        min_confidence=min_confidence,
        smoothing_window=smoothing_window,
        similarity=SimilarityConfig(metric=kind, baseline=baseline, clamp_delta=clamp),
        required_laps=required_laps,
        corridor_px=corridor,
        min_offtrack_s=min_offtrack,
        direction_auto=direction_auto,
        start_line=start_line,
        max_average_error_px=max_average_error,
        output_directory=output_directory,
    )


def config_echo(config: BenchmarkConfig) -> dict:
    """A JSON-ready snapshot of the resolved configuration."""
    return {
        "fps": config.fps,
        "keypoints": str(config.keypoints_path),
        "track": {
            "image": str(config.track_image_path),
            "threshold": config.threshold,
            "is_bright": config.is_bright,
            "resample_count": config.resample_count,
            "reference_path": (
                str(config.reference_path_path) if config.reference_path_path else None
            ),
        },
        "detections": str(config.detections_path) if config.detections_path else None,
        "frames": {
            "directory": str(config.frames_directory) if config.frames_directory else None,
            "pattern": config.frames_pattern,
        },
        "detector": {"command": config.detector_command},
        "min_confidence": config.min_confidence,
        "smoothing_window": config.smoothing_window,
        "metric": {
            "kind": config.similarity.metric.value,
            "baseline_px": config.similarity.baseline,
            "clamp_delta_px": config.similarity.clamp_delta,
            "required_laps": config.required_laps,
            "corridor_px": config.corridor_px,
            "min_offtrack_s": config.min_offtrack_s,
            "direction_auto": config.direction_auto,
        },
        "start_line": {
            "a": [config.start_line.a.x, config.start_line.a.y],
            "b": [config.start_line.b.x, config.start_line.b.y],
            "min_crossing_interval_s": config.start_line.min_crossing_interval,
        },
        "calibration": {"max_average_error_px": config.max_average_error_px},
        "output": {"directory": str(config.output_directory)},
    }


def load_sim_config(path: str | Path) -> tuple[SimScenario, Path]:
    """Load a simulation scenario; returns the scenario and its output dir."""
    config_path = Path(path)
    data = _load_json(config_path)
    base = config_path.resolve().parent

    _reject_unknown(
        data,
        {
            "pose",
            "path",
            "lap_time_s",
            "fps",
            "noise_sigma_px",
            "seed",
            "resample_count",
            "drive_laps",
            "metric",
            "start_fraction",
            "stroke_width_px",
            "output",
        },
        "",
    )

    pose_obj = _section(data, "pose")
    _reject_unknown(
        pose_obj,
        {"height_m", "pitch_deg", "focal_length_px", "image_size", "ground_scale", "twin_size"},
        "pose",
    )

    def size_pair(obj, dotted, default):
        key = dotted.rsplit(".", 1)[-1]
        value = obj.get(key, list(default))
        if (
            not isinstance(value, list)
            or len(value) != 2
            or any(isinstance(v, bool) or not isinstance(v, int) for v in value)
        ):
            raise ConfigError(f"config key {dotted!r} must be a [width, height] pair")
        return (value[0], value[1])

    defaults = CameraPose()
    try:
        pose = CameraPose(
            height_m=_number(pose_obj, "pose.height_m", defaults.height_m),
            pitch_deg=_number(pose_obj, "pose.pitch_deg", defaults.pitch_deg),
            focal_length_px=_number(
                pose_obj, "pose.focal_length_px", defaults.focal_length_px
            ),
            image_size=size_pair(pose_obj, "pose.image_size", defaults.image_size),
            ground_scale=_number(pose_obj, "pose.ground_scale", defaults.ground_scale),
            twin_size=size_pair(pose_obj, "pose.twin_size", defaults.twin_size),
        )
    except ValueError as exc:
        raise ConfigError(f"bad pose: {exc}") from exc

    path_raw = _string(data, "path", PathKind.OVAL.value)
    try:
        path_kind = PathKind(path_raw)
    except ValueError:
        choices = ", ".join(k.value for k in PathKind)
        raise ConfigError(f"config key 'path' must be one of: {choices}")

    metric = _section(data, "metric")
    _reject_unknown(
        metric, {"kind", "baseline_px", "clamp_delta_px", "required_laps"}, "metric"
    )
    scenario_defaults = SimScenario()
    try:
        scenario = SimScenario(
            pose=pose,
            path_kind=path_kind,
            lap_time_s=_number(data, "lap_time_s", scenario_defaults.lap_time_s),
            fps=_number(data, "fps", scenario_defaults.fps),
            noise_sigma_px=_number(
                data, "noise_sigma_px", scenario_defaults.noise_sigma_px
            ),
            rng_seed=_integer(data, "seed", scenario_defaults.rng_seed),
            resample_count=_integer(
                data, "resample_count", scenario_defaults.resample_count
            ),
            drive_laps=_number(data, "drive_laps", scenario_defaults.drive_laps),
            metric_kind=_metric_kind(metric, "metric.kind", "dtw"),
            baseline_px=_number(
                metric, "metric.baseline_px", scenario_defaults.baseline_px
            ),
            clamp_delta_px=_number(metric, "metric.clamp_delta_px"),
            required_laps=_integer(
                metric, "metric.required_laps", scenario_defaults.required_laps
            ),
            start_fraction=_number(
                data, "start_fraction", scenario_defaults.start_fraction
            ),
            stroke_width_px=_integer(
                data, "stroke_width_px", scenario_defaults.stroke_width_px
            ),
        )
    except ValueError as exc:
        raise ConfigError(f"bad simulation scenario: {exc}") from exc

    output = _section(data, "output")
    _reject_unknown(output, {"directory"}, "output")
    out_raw = _string(output, "output.directory", "sim_fixture")
    out_dir = (base / out_raw) if not Path(out_raw).is_absolute() else Path(out_raw)
    return scenario, out_dir
