"""Exception hierarchy shared across the toolkit.

Every error raised on a bad input or an unusable configuration derives from
:class:`TrackbenchError`, so callers (notably the CLI) can map failures to
exit codes without enumerating modules.
"""

from __future__ import annotations


class TrackbenchError(Exception):
    """Base class for all toolkit errors."""


# --- calibration / geometry ------------------------------------------------

class CalibrationError(TrackbenchError):
    """Base class for homography-estimation and keypoint errors."""


class TooFewPointsError(CalibrationError):
    """Fewer keypoint pairs than the operation requires."""


class DegenerateConfigurationError(CalibrationError):
    """The correspondence system is rank-deficient (e.g. collinear points)."""


class PointAtInfinityError(CalibrationError):
    """Perspective division would divide by a (near-)zero scale factor.

    ``frame_index`` is set when the point came from a video frame, so the
    offending sample can be located in the detections stream.
    """

    def __init__(self, message: str, frame_index: int | None = None):
        self.frame_index = frame_index
        super().__init__(message)


class FrameMismatchError(CalibrationError):
    """Arithmetic attempted between points of different coordinate frames."""


class OutOfBoundsError(CalibrationError):
    """A keypoint coordinate lies outside its image."""


class DuplicateCameraPointError(CalibrationError):
    """Two keypoint pairs share the same camera-frame source point."""


# --- track processing ------------------------------------------------------

class TrackError(TrackbenchError):
    """Base class for track-image processing errors."""


class EmptyMaskError(TrackError):
    """Binarization produced no foreground pixels (wrong threshold/polarity)."""


class BranchingSkeletonError(TrackError):
    """The skeleton has junction pixels; the track image has spurs.

    ``branch_pixels`` holds the offending ``(x, y)`` coordinates so the user
    can clean the image or raise the threshold.
    """

    def __init__(self, branch_pixels):
        self.branch_pixels = list(branch_pixels)
        shown = ", ".join(f"({x}, {y})" for x, y in self.branch_pixels[:5])
        more = "" if len(self.branch_pixels) <= 5 else f" (+{len(self.branch_pixels) - 5} more)"
        super().__init__(
            f"skeleton has {len(self.branch_pixels)} branch pixel(s) at {shown}{more}; "
            "clean the track image or adjust the threshold"
        )


class DisconnectedSkeletonError(TrackError):
    """The skeleton splits into multiple connected components."""

    def __init__(self, component_count: int):
        self.component_count = component_count
        super().__init__(f"skeleton has {component_count} connected components, expected 1")


# --- detections ------------------------------------------------------------

class DetectionError(TrackbenchError):
    """Base class for detection-stream errors."""


class MalformedLineError(DetectionError):
    """A detections line failed to parse or validate."""

    def __init__(self, line_number: int, reason: str):
        self.line_number = line_number
        self.reason = reason
        super().__init__(f"line {line_number}: {reason}")


class NonMonotonicFramesError(DetectionError):
    """frame_index values decreased between lines."""


class NoDetectionsError(DetectionError):
    """No detection survived confidence filtering."""


class DetectorRunError(DetectionError):
    """An external detector command failed to run or exited non-zero."""

    def __init__(self, command: str, returncode: int | None, stderr: str = ""):
        self.command = command
        self.returncode = returncode
        tail = stderr.strip().splitlines()[-3:]
        suffix = ("; stderr: " + " | ".join(tail)) if tail else ""
        super().__init__(
            f"detector command {command!r} "
            + ("could not be started" if returncode is None else f"exited with code {returncode}")
            + suffix
        )


# --- metrics ---------------------------------------------------------------

class EmptySequenceError(TrackbenchError):
    """A path distance was requested on an empty point sequence."""


# --- configuration / pipeline ----------------------------------------------

class ConfigError(TrackbenchError):
    """Base class for configuration problems (CLI exit code 2)."""


class MissingKeyError(ConfigError):
    """A required config key is absent."""

    def __init__(self, key: str):
        self.key = key
        super().__init__(f"missing required config key: {key!r}")


class UnknownKeyError(ConfigError):
    """A config key is not recognized (typo guard)."""

    def __init__(self, key: str):
        self.key = key
        super().__init__(f"unknown config key: {key!r}")


class MissingFileError(ConfigError):
    """A file referenced by the config does not exist."""

    def __init__(self, key: str, path):
        self.key = key
        self.path = str(path)
        super().__init__(f"file for config key {key!r} not found: {self.path}")


class CalibrationGateError(TrackbenchError):
    """Average calibration error exceeded the configured gate (exit code 3)."""

    def __init__(self, average_error: float, gate: float):
        self.average_error = average_error
        self.gate = gate
        super().__init__(
            f"calibration average error {average_error:.3f} px exceeds the "
            f"configured maximum {gate:.3f} px; refine or add keypoints"
        )


class PipelineStageError(TrackbenchError):
    """Wraps a module error with the pipeline stage where it occurred."""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[stage: {stage}] {cause}")
