"""Overhead-camera driving-trial benchmarking toolkit.

Calibrates a camera-to-twin homography from keypoints, extracts a reference
centerline from a digital-twin track image, projects per-frame robot
detections into twin coordinates, and scores the driven trajectory by path
similarity and completion time.
"""

__version__ = "0.1.0"
