"""Local HTTP service backing interactive keypoint calibration.

A deliberately small, single-session tool: one camera frame, one twin image,
one working keypoint set.  Every mutation recomputes diagnostics through the
same estimation code the batch pipeline uses, so the numbers a user sees
while clicking are bit-for-bit the numbers a later benchmark run will
compute from the exported file.

Status-code policy: 400 for anything wrong with the request payload
(unreadable image paths, out-of-bounds coordinates, duplicate camera
points), 404 when there is no session or no pair at an index, 409 when an
operation needs more pairs than the session has.
"""

from __future__ import annotations

import io
import threading
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from PIL import Image
from pydantic import BaseModel

from .errors import (
    CalibrationError,
    DuplicateCameraPointError,
    OutOfBoundsError,
    TooFewPointsError,
)
from .geometry import (
    Frame,
    KeypointPair,
    KeypointSet,
    Point2,
    estimate_homography,
    keypoint_error_curve,
    keypoints_to_dict,
    leave_one_out_diagnostics,
    reprojection_diagnostics,
    save_keypoints,
)

#: Pairs needed before any fit is attempted.
MIN_PAIRS_FOR_FIT = 4

#: Pairs needed before leave-one-out diagnostics exist.
MIN_PAIRS_FOR_LOO = 5


class SessionBody(BaseModel):
    camera_path: str
    twin_path: str


class KeypointBody(BaseModel):
    camera: tuple[float, float]
    twin: tuple[float, float]
    label: str = ""


class ExportBody(BaseModel):
    path: str


@dataclass
class CalibrationSession:
    """In-memory working state between HTTP calls."""

    session_id: str
    camera_path: Path
    twin_path: Path
    image_size_camera: tuple[int, int]
    image_size_twin: tuple[int, int]
    pairs: list[KeypointPair] = field(default_factory=list)

    def keypoint_set(self) -> KeypointSet:
        return KeypointSet(
            pairs=tuple(self.pairs),
            image_size_camera=self.image_size_camera,
            image_size_twin=self.image_size_twin,
        )


def _image_size(path: Path) -> tuple[int, int]:
    with Image.open(path) as img:
        return img.size


def _png_bytes(path: Path) -> bytes:
    if path.suffix.lower() == ".png":
        return path.read_bytes()
    with Image.open(path) as img:
        buffer = io.BytesIO()
        img.save(buffer, format="PNG")
        return buffer.getvalue()


def _diagnostics_payload(session: CalibrationSession) -> dict:
    """Diagnostics for the current pairs, or a pending/degenerate status.

    Mirrors the session invariant: a fit exists from 4 pairs, the
    leave-one-out variant from 5.
    """
    count = len(session.pairs)
    if count < MIN_PAIRS_FOR_FIT:
        return {"status": "pending", "count": count}
    keypoints = session.keypoint_set()
    try:
        homography = estimate_homography(keypoints)
        reprojection = reprojection_diagnostics(homography, keypoints)
        loo = (
            leave_one_out_diagnostics(keypoints)
            if count >= MIN_PAIRS_FOR_LOO
            else None
        )
    except CalibrationError as exc:
        return {"status": "degenerate", "count": count, "detail": str(exc)}
    return {
        "status": "ok",
        "count": count,
        "reprojection": reprojection.to_dict(),
        "leave_one_out": loo.to_dict() if loo else None,
    }


def _session_payload(session: CalibrationSession) -> dict:
    return {
        "session_id": session.session_id,
        "camera_path": str(session.camera_path),
        "twin_path": str(session.twin_path),
        "image_size_camera": list(session.image_size_camera),
        "image_size_twin": list(session.image_size_twin),
        "pairs": [
            {
                "camera": [p.camera.x, p.camera.y],
                "twin": [p.twin.x, p.twin.y],
                "label": p.label,
            }
            for p in session.pairs
        ],
        "diagnostics": _diagnostics_payload(session),
    }


def create_app(frontend_dist: str | Path | None = None) -> FastAPI:
    """Build the service; state lives on the app instance, one session max."""
    app = FastAPI(title="trackbench calibration service")
    app.state.session = None
    app.state.session_counter = 0
    app.state.lock = threading.Lock()

    @app.exception_handler(RequestValidationError)
    async def _validation_as_400(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": exc.errors()})

    def current_session() -> CalibrationSession | None:
        return app.state.session

    def error(status: int, message: str) -> JSONResponse:
        return JSONResponse(status_code=status, content={"detail": message})

    @app.post("/session")
    def start_session(body: SessionBody):
        camera = Path(body.camera_path)
        twin = Path(body.twin_path)
        for label, path in (("camera", camera), ("twin", twin)):
            if not path.is_file():
                return error(400, f"{label} image not found: {path}")
            try:
                size = _image_size(path)
            except Exception:
                return error(400, f"{label} image is not a readable image: {path}")
            if label == "camera":
                camera_size = size
            else:
                twin_size = size
        with app.state.lock:
            app.state.session_counter += 1
            app.state.session = CalibrationSession(
                session_id=f"session-{app.state.session_counter}",
                camera_path=camera,
                twin_path=twin,
                image_size_camera=camera_size,
                image_size_twin=twin_size,
            )
            return _session_payload(app.state.session)

    @app.get("/session")
    def get_session():
        session = current_session()
        if session is None:
            return error(404, "no active session")
        with app.state.lock:
            return _session_payload(session)

    @app.get("/image/{which}")
    def get_image(which: str):
        session = current_session()
        if session is None:
            return error(404, "no active session")
        if which == "camera":
            path = session.camera_path
        elif which == "twin":
            path = session.twin_path
        else:
            return error(404, f"unknown image {which!r} (use camera or twin)")
        return Response(content=_png_bytes(path), media_type="image/png")

    @app.post("/keypoints")
    def add_keypoint(body: KeypointBody):
        session = current_session()
        if session is None:
            return error(404, "no active session")
        with app.state.lock:
            pair = KeypointPair(
                camera=Point2(body.camera[0], body.camera[1], Frame.CAMERA),
                twin=Point2(body.twin[0], body.twin[1], Frame.TWIN),
                label=body.label,
            )
            candidate = session.pairs + [pair]
            try:
                KeypointSet(
                    pairs=tuple(candidate),
                    image_size_camera=session.image_size_camera,
                    image_size_twin=session.image_size_twin,
                )
            except (OutOfBoundsError, DuplicateCameraPointError) as exc:
                return error(400, str(exc))
            session.pairs = candidate
            return _diagnostics_payload(session)

    @app.delete("/keypoints/{index}")
    def remove_keypoint(index: int):
        session = current_session()
        if session is None:
            return error(404, "no active session")
        with app.state.lock:
            if not (0 <= index < len(session.pairs)):
                return error(
                    404, f"no keypoint at index {index} (have {len(session.pairs)})"
                )
            session.pairs.pop(index)
            return _diagnostics_payload(session)

    @app.get("/diagnostics")
    def get_diagnostics():
        session = current_session()
        if session is None:
            return error(404, "no active session")
        with app.state.lock:
            payload = _diagnostics_payload(session)
        if payload["status"] == "pending":
            return error(
                409,
                f"need at least {MIN_PAIRS_FOR_FIT} pairs for diagnostics, "
                f"have {payload['count']}",
            )
        return payload

    @app.get("/error-curve")
    def get_error_curve():
        session = current_session()
        if session is None:
            return error(404, "no active session")
        with app.state.lock:
            try:
                curve = keypoint_error_curve(session.keypoint_set())
            except TooFewPointsError as exc:
                return error(409, str(exc))
            except CalibrationError as exc:
                return error(400, str(exc))
        return {
            "entries": [
                {"k": k, **diagnostics.to_dict()} for k, diagnostics in curve
            ]
        }

    @app.post("/export")
    def export_keypoints(body: ExportBody):
        session = current_session()
        if session is None:
            return error(404, "no active session")
        with app.state.lock:
            if len(session.pairs) < MIN_PAIRS_FOR_FIT:
                return error(
                    409,
                    f"need at least {MIN_PAIRS_FOR_FIT} pairs to export, "
                    f"have {len(session.pairs)}",
                )
            target = Path(body.path)
            if not target.parent.exists():
                return error(400, f"directory does not exist: {target.parent}")
            keypoints = session.keypoint_set()
            save_keypoints(keypoints, target)
            return {"path": str(target), "document": keypoints_to_dict(keypoints)}

    if frontend_dist is not None and Path(frontend_dist).is_dir():
        app.mount("/app", StaticFiles(directory=str(frontend_dist), html=True), name="app")

    return app
