"""SVG diagnostic overlay: every run artifact drawn in the twin frame.

The overlay is plain hand-built SVG so it stays a diffable text artifact.
Each ingredient lives in its own ``<g>`` layer with a stable id and a
``<title>`` label: the twin/track outline, the reference path, the driven
trajectory, the start line, the calibration keypoints, and one marker per
failure event.
"""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

from .geometry import KeypointSet
from .metrics import FailureEvent, StartLine
from .track import ReferencePath

_STYLE = {
    "track_outline": "fill:none;stroke:#9aa0a6;stroke-width:7;stroke-opacity:0.45",
    "reference": "fill:none;stroke:#1a73e8;stroke-width:1.5",
    "trajectory": "fill:none;stroke:#d93025;stroke-width:1.5",
    "start_line": "stroke:#188038;stroke-width:2",
    "keypoint": "fill:#f9ab00;stroke:#202124;stroke-width:0.5",
    "event": "stroke:#d93025;stroke-width:2",
}


def _fmt(value: float) -> str:
    return f"{value:.3f}"


def _polyline(points: np.ndarray, closed: bool, style: str) -> str:
    coords = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in points)
    tag = "polygon" if closed else "polyline"
    return f'<{tag} points="{coords}" style="{style}"/>'


def _layer(layer_id: str, label: str, body: list[str]) -> str:
    inner = "\n    ".join(body)
    return (
        f'  <g id="{layer_id}">\n'
        f"    <title>{escape(label)}</title>\n"
        f"    {inner}\n"
        f"  </g>"
    )


def render_overlay(
    twin_size: tuple[int, int],
    reference: ReferencePath,
    trajectory_xy: np.ndarray,
    start_line: StartLine | None = None,
    keypoints: KeypointSet | None = None,
    events: list[FailureEvent] | None = None,
    event_xy: list[tuple[float, float]] | None = None,
) -> str:
    """Build the SVG document as a string.

    ``event_xy`` supplies one marker position per entry in ``events``;
    events without a position (e.g. a did-not-finish with no crossing) may
    pass ``None`` in their slot and get no marker.
    """
    w, h = twin_size
    events = events or []
    event_xy = event_xy if event_xy is not None else [None] * len(events)
    if len(event_xy) != len(events):
        raise ValueError("event_xy must align with events")

    ref_xy = reference.points_array()
    traj = np.atleast_2d(np.asarray(trajectory_xy, dtype=float))

    layers = [
        _layer(
            "layer-track-outline",
            "Track outline",
            [
                f'<rect x="0" y="0" width="{w}" height="{h}" '
                'style="fill:none;stroke:#202124;stroke-width:1"/>',
                _polyline(ref_xy, reference.closed, _STYLE["track_outline"]),
            ],
        ),
        _layer(
            "layer-reference-path",
            "Reference path",
            [_polyline(ref_xy, reference.closed, _STYLE["reference"])],
        ),
        _layer(
            "layer-trajectory",
            "Driven trajectory",
            [_polyline(traj, False, _STYLE["trajectory"])],
        ),
    ]

    if start_line is not None:
        layers.append(
            _layer(
                "layer-start-line",
                "Start line",
                [
                    f'<line x1="{_fmt(start_line.a.x)}" y1="{_fmt(start_line.a.y)}" '
                    f'x2="{_fmt(start_line.b.x)}" y2="{_fmt(start_line.b.y)}" '
                    f'style="{_STYLE["start_line"]}"/>'
                ],
            )
        )

    if keypoints is not None and keypoints.pairs:
        body = []
        for pair in keypoints.pairs:
            body.append(
                f'<circle cx="{_fmt(pair.twin.x)}" cy="{_fmt(pair.twin.y)}" r="3" '
                f'style="{_STYLE["keypoint"]}">'
                f"<title>{escape(pair.label or 'keypoint')}</title></circle>"
            )
        layers.append(_layer("layer-keypoints", "Calibration keypoints", body))

    markers = []
    for event, position in zip(events, event_xy):
        if position is None:
            continue
        x, y = position
        label = f"{event.kind.value} at {event.time:.2f} s: {event.detail}"
        markers.append(
            f'<g class="event-marker"><title>{escape(label)}</title>'
            f'<line x1="{_fmt(x - 5)}" y1="{_fmt(y - 5)}" x2="{_fmt(x + 5)}" '
            f'y2="{_fmt(y + 5)}" style="{_STYLE["event"]}"/>'
            f'<line x1="{_fmt(x - 5)}" y1="{_fmt(y + 5)}" x2="{_fmt(x + 5)}" '
            f'y2="{_fmt(y - 5)}" style="{_STYLE["event"]}"/></g>'
        )
    if markers:
        layers.append(_layer("layer-events", "Failure events", markers))

    body = "\n".join(layers)
    return (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
        f'viewBox="0 0 {w} {h}">\n'
        f"{body}\n"
        "</svg>\n"
    )
