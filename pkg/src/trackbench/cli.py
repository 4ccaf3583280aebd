"""Command-line entry points.

Exit codes: 0 success, 2 configuration/input problems, 3 calibration gate
failure, 4 any other processing error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import load_benchmark_config, load_sim_config
from .errors import CalibrationGateError, ConfigError, TrackbenchError
from .pipeline import run_benchmark, suggest_baseline, write_run
from .track import (
    TrackImage,
    extract_reference_path,
    load_reference_path,
    save_reference_path,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_GATE = 3
EXIT_PROCESSING = 4


def _cmd_process_track(args: argparse.Namespace) -> int:
    image = TrackImage.from_file(args.image, threshold=args.threshold)
    reference = extract_reference_path(
        image, is_bright=not args.dark, resample_count=args.count
    )
    if args.output:
        save_reference_path(reference, args.output)
        print(f"wrote {args.output} ({len(reference.points)} points, "
              f"arc length {reference.arc_length:.1f} px)")
    else:
        json.dump(reference.to_dict(), sys.stdout, indent=2, sort_keys=True)
        print()
    return EXIT_OK


def _cmd_benchmark(args: argparse.Namespace) -> int:
    config = load_benchmark_config(args.config)
    result = run_benchmark(config)
    paths = write_run(result, config.output_directory)
    score = result.report.score
    print(f"path similarity: {score.similarity_percent:.2f}%")
    if score.completion_seconds is None:
        print("completion: did not finish")
    else:
        print(f"completion: {score.completion_seconds:.2f} s")
    print(f"failure events: {len(score.failure_events)}")
    for event in score.failure_events:
        print(f"  - t={event.time:.2f} s: {event.detail}")
    print(f"report: {paths['report']}")
    print(f"overlay: {paths['overlay']}")
    return EXIT_OK


def _cmd_simulate(args: argparse.Namespace) -> int:
    from .synth import simulate_trial, write_fixture

    scenario, out_dir = load_sim_config(args.config)
    trial = simulate_trial(scenario)
    paths = write_fixture(trial, out_dir)
    for name in sorted(paths):
        print(f"{name}: {paths[name]}")
    return EXIT_OK


def _cmd_calibrate(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    dist = Path(args.frontend_dist)
    app = create_app(frontend_dist=dist if dist.is_dir() else None)
    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def _cmd_suggest_baseline(args: argparse.Namespace) -> int:
    reference = load_reference_path(args.reference)
    print(f"{suggest_baseline(reference):.6g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trackbench",
        description="Overhead-camera benchmarking for driving trials on a "
        "digital-twin track.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser(
        "process-track",
        help="extract the track centerline from a twin image",
    )
    p.add_argument("image", help="twin track image (grayscale readable)")
    p.add_argument("-o", "--output", help="write the path JSON here instead of stdout")
    p.add_argument("--threshold", type=int, default=128,
                   help="binarization threshold 0-255 (default 128)")
    p.add_argument("--count", type=int, default=512,
                   help="number of resampled points (default 512)")
    p.add_argument("--dark", action="store_true",
                   help="track stroke is darker than the background")
    p.set_defaults(func=_cmd_process_track)

    p = sub.add_parser("benchmark", help="score a recorded trial against a config")
    p.add_argument("-c", "--config", required=True, help="benchmark config JSON")
    p.set_defaults(func=_cmd_benchmark)

    p = sub.add_parser("simulate", help="generate a synthetic trial fixture")
    p.add_argument("-c", "--config", required=True, help="simulation config JSON")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("calibrate", help="run the interactive calibration service")
    p.add_argument("--serve", action="store_true", required=True,
                   help="start the HTTP service (required)")
    p.add_argument("--host", default="127.0.0.1",
                   help="bind address (default loopback only)")
    p.add_argument("--port", type=int, default=8077, help="port (default 8077)")
    p.add_argument("--frontend-dist", default="frontend/dist",
                   help="static frontend directory to mount at /app if present")
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser(
        "suggest-baseline",
        help="print the scoring baseline implied by a reference path "
        "(10%% of its arc length)",
    )
    p.add_argument("reference", help="reference path JSON")
    p.set_defaults(func=_cmd_suggest_baseline)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CalibrationGateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GATE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TrackbenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PROCESSING


if __name__ == "__main__":
    raise SystemExit(main())
