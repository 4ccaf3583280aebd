import json

import pytest

from trackbench.config import load_benchmark_config, load_sim_config
from trackbench.errors import (
    ConfigError,
    MissingFileError,
    MissingKeyError,
    UnknownKeyError,
)
from trackbench.metrics import MetricKind
from trackbench.synth import CameraPose, PathKind, make_keypoints
from trackbench.geometry import save_keypoints


@pytest.fixture()
def fixture_dir(tmp_path):
    """A directory with the minimal input files a config can reference."""
    save_keypoints(make_keypoints(CameraPose()), tmp_path / "keypoints.json")
    from PIL import Image

    Image.new("L", (32, 32), 0).save(tmp_path / "track.png")
    (tmp_path / "detections.jsonl").write_text(
        '{"frame_index":0,"centroid":[1,1]}\n{"frame_index":1,"centroid":[2,2]}\n'
    )
    (tmp_path / "ref.json").write_text(
        json.dumps({"closed": False, "points": [[0, 0], [10, 0]]})
    )
    (tmp_path / "frames").mkdir()
    return tmp_path


def minimal(**overrides):
    base = {
        "fps": 30.0,
        "keypoints": "keypoints.json",
        "track": {"image": "track.png"},
        "detections": "detections.jsonl",
        "metric": {"baseline_px": 25.0},
        "start_line": {"a": [0, 0], "b": [10, 0]},
    }
    base.update(overrides)
    return base


def write_config(tmp_path, doc):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(doc))
    return path


class TestBenchmarkConfig:
    def test_minimal_applies_defaults(self, fixture_dir):
        config = load_benchmark_config(write_config(fixture_dir, minimal()))
        assert config.threshold == 128
        assert config.is_bright is True
        assert config.resample_count == 512
        assert config.min_confidence == 0.25
        assert config.smoothing_window == 1
        assert config.similarity.metric is MetricKind.DTW
        assert config.similarity.clamp_delta is None
        assert config.required_laps == 1
        assert config.corridor_px == 40.0
        assert config.min_offtrack_s == 0.5
        assert config.direction_auto is True
        assert config.start_line.min_crossing_interval == 0.0
        assert config.max_average_error_px is None
        assert config.output_directory == fixture_dir / "benchmark_out"

    def test_paths_resolved_relative_to_config(self, fixture_dir):
        config = load_benchmark_config(write_config(fixture_dir, minimal()))
        assert config.keypoints_path == fixture_dir / "keypoints.json"
        assert config.detections_path == fixture_dir / "detections.jsonl"

    def test_missing_baseline(self, fixture_dir):
        doc = minimal(metric={})
        with pytest.raises(MissingKeyError) as excinfo:
            load_benchmark_config(write_config(fixture_dir, doc))
        assert excinfo.value.key == "metric.baseline_px"

    def test_missing_fps(self, fixture_dir):
        doc = minimal()
        del doc["fps"]
        with pytest.raises(MissingKeyError) as excinfo:
            load_benchmark_config(write_config(fixture_dir, doc))
        assert excinfo.value.key == "fps"

    def test_unknown_top_level_key(self, fixture_dir):
        with pytest.raises(UnknownKeyError) as excinfo:
            load_benchmark_config(write_config(fixture_dir, minimal(fsp=30)))
        assert excinfo.value.key == "fsp"

    def test_unknown_nested_key_dotted(self, fixture_dir):
        doc = minimal(metric={"baseline_px": 25.0, "basline_px": 1})
        with pytest.raises(UnknownKeyError) as excinfo:
            load_benchmark_config(write_config(fixture_dir, doc))
        assert excinfo.value.key == "metric.basline_px"

    def test_comment_keys_ignored(self, fixture_dir):
        doc = minimal(_comment="top level note")
        doc["metric"]["_comment"] = "nested note"
        config = load_benchmark_config(write_config(fixture_dir, doc))
        assert config.similarity.baseline == 25.0

    def test_detections_and_detector_mutually_exclusive(self, fixture_dir):
        doc = minimal(detector={"command": "echo"}, frames={"directory": "frames"})
        with pytest.raises(ConfigError, match="not both"):
            load_benchmark_config(write_config(fixture_dir, doc))

    def test_neither_detections_nor_detector(self, fixture_dir):
        doc = minimal()
        del doc["detections"]
        with pytest.raises(ConfigError, match="required"):
            load_benchmark_config(write_config(fixture_dir, doc))

    def test_frames_without_detector_command(self, fixture_dir):
        doc = minimal(frames={"directory": "frames"})
        del doc["detections"]
        with pytest.raises(MissingKeyError) as excinfo:
            load_benchmark_config(write_config(fixture_dir, doc))
        assert excinfo.value.key == "detector.command"

    def test_missing_referenced_file(self, fixture_dir):
        doc = minimal(keypoints="nope.json")
        with pytest.raises(MissingFileError) as excinfo:
            load_benchmark_config(write_config(fixture_dir, doc))
        assert excinfo.value.key == "keypoints"
        assert "nope.json" in excinfo.value.path

    def test_missing_config_file(self, tmp_path):
        with pytest.raises(MissingFileError):
            load_benchmark_config(tmp_path / "absent.json")

    def test_invalid_json(self, fixture_dir):
        path = fixture_dir / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError, match="valid JSON"):
            load_benchmark_config(path)

    @pytest.mark.parametrize(
        "mutate,match",
        [
            (lambda d: d.update(fps="thirty"), "must be a number"),
            (lambda d: d.update(fps=0), "must be > 0"),
            (lambda d: d["track"].update(threshold=300), "<= 255"),
            (lambda d: d.update(smoothing_window=2), "odd"),
            (lambda d: d["metric"].update(kind="dtww"), "one of"),
            (lambda d: d["metric"].update(clamp_delta_px=0), "must be > 0"),
            (lambda d: d["metric"].update(required_laps=0), ">= 1"),
            (lambda d: d.update(start_line={"a": [0, 0], "b": [0]}), "pair"),
            (lambda d: d.update(start_line={"a": [0, 0], "b": [0, 0]}), "start_line"),
            (lambda d: d.update(min_confidence=2.0), "<= 1"),
        ],
    )
    def test_bad_values_rejected(self, fixture_dir, mutate, match):
        doc = minimal()
        mutate(doc)
        with pytest.raises(ConfigError, match=match):
            load_benchmark_config(write_config(fixture_dir, doc))

    def test_reference_override_accepted(self, fixture_dir):
        doc = minimal()
        doc["track"]["reference_path"] = "ref.json"
        config = load_benchmark_config(write_config(fixture_dir, doc))
        assert config.reference_path_path == fixture_dir / "ref.json"

    def test_frames_plus_detector_route(self, fixture_dir):
        doc = minimal(frames={"directory": "frames"}, detector={"command": "mydet"})
        del doc["detections"]
        config = load_benchmark_config(write_config(fixture_dir, doc))
        assert config.detections_path is None
        assert config.frames_directory == fixture_dir / "frames"
        assert config.frames_pattern == "*.png"
        assert config.detector_command == "mydet"


class TestSimConfig:
    def test_empty_config_gives_defaults(self, tmp_path):
        path = tmp_path / "sim.json"
        path.write_text("{}")
        scenario, out_dir = load_sim_config(path)
        assert scenario.fps == 25.6
        assert scenario.lap_time_s == 20.0
        assert scenario.path_kind is PathKind.OVAL
        assert scenario.pose.height_m == 2.15
        assert scenario.pose.pitch_deg == 41.0
        assert out_dir == tmp_path / "sim_fixture"

    def test_overrides(self, tmp_path):
        path = tmp_path / "sim.json"
        path.write_text(
            json.dumps(
                {
                    "path": "figure_eight",
                    "noise_sigma_px": 2.5,
                    "seed": 7,
                    "pose": {"pitch_deg": 55.0},
                    "metric": {"kind": "frechet", "baseline_px": 30.0},
                    "output": {"directory": "fixtures/run1"},
                }
            )
        )
        scenario, out_dir = load_sim_config(path)
        assert scenario.path_kind is PathKind.FIGURE_EIGHT
        assert scenario.noise_sigma_px == 2.5
        assert scenario.rng_seed == 7
        assert scenario.pose.pitch_deg == 55.0
        assert scenario.metric_kind is MetricKind.FRECHET
        assert out_dir == tmp_path / "fixtures" / "run1"

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "sim.json"
        path.write_text(json.dumps({"lapt_time_s": 10}))
        with pytest.raises(UnknownKeyError):
            load_sim_config(path)

    def test_bad_path_kind(self, tmp_path):
        path = tmp_path / "sim.json"
        path.write_text(json.dumps({"path": "triangle"}))
        with pytest.raises(ConfigError, match="one of"):
            load_sim_config(path)

    def test_invalid_scenario_value(self, tmp_path):
        path = tmp_path / "sim.json"
        path.write_text(json.dumps({"stroke_width_px": 2}))
        with pytest.raises(ConfigError, match="stroke"):
            load_sim_config(path)
