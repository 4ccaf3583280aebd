import numpy as np
import pytest

from trackbench.geometry import Frame, KeypointPair, KeypointSet, Point2


def make_pairs(camera_points, twin_points, labels=None):
    pairs = []
    for i, (c, t) in enumerate(zip(camera_points, twin_points)):
        label = labels[i] if labels else None
        pairs.append(
            KeypointPair(
                camera=Point2(float(c[0]), float(c[1]), Frame.CAMERA),
                twin=Point2(float(t[0]), float(t[1]), Frame.TWIN),
                label=label,
            )
        )
    return tuple(pairs)


def make_keypoint_set(camera_points, twin_points, camera_size=(1920, 1080), twin_size=(1000, 1000)):
    return KeypointSet(
        pairs=make_pairs(camera_points, twin_points),
        image_size_camera=camera_size,
        image_size_twin=twin_size,
    )


def apply_matrix(matrix, points):
    """Reference projective application used to build correspondences."""
    pts = np.asarray(points, dtype=float)
    homogeneous = np.hstack([pts, np.ones((pts.shape[0], 1))]) @ np.asarray(matrix).T
    return homogeneous[:, :2] / homogeneous[:, 2:3]


def random_mild_homography(rng):
    """A well-conditioned random projective map keeping a 1920x1080 box sane.

    Composes rotation, anisotropic scale, translation and a small projective
    term; retries until the condition number is comfortably below 1e6.
    """
    while True:
        angle = rng.uniform(-0.5, 0.5)
        sx, sy = rng.uniform(0.4, 1.6, size=2)
        tx, ty = rng.uniform(-100, 100, size=2)
        px, py = rng.uniform(-1e-4, 1e-4, size=2)
        c, s = np.cos(angle), np.sin(angle)
        matrix = np.array(
            [
                [sx * c, -sx * s, tx],
                [sy * s, sy * c, ty],
                [px, py, 1.0],
            ]
        )
        if np.linalg.cond(matrix) < 1e5:
            return matrix


def exact_correspondences(matrix, rng, count, camera_size=(1920, 1080)):
    """Sample in-bounds camera points and map them exactly through ``matrix``.

    Twin bounds are derived from the mapped points so the KeypointSet
    validation passes whatever the map does.
    """
    w, h = camera_size
    camera = np.column_stack(
        [rng.uniform(0.05 * w, 0.95 * w, size=count), rng.uniform(0.05 * h, 0.95 * h, size=count)]
    )
    twin = apply_matrix(matrix, camera)
    lo = np.floor(twin.min(axis=0)).astype(int)
    shift = np.where(lo < 0, -lo, 0).astype(float)
    twin = twin + shift
    # Fold the shift into the generating matrix so tests can still compare.
    shifted = np.array([[1, 0, shift[0]], [0, 1, shift[1]], [0, 0, 1]]) @ np.asarray(matrix)
    hi = np.ceil(twin.max(axis=0)).astype(int) + 1
    ks = make_keypoint_set(camera, twin, camera_size=camera_size, twin_size=(int(hi[0]), int(hi[1])))
    return ks, shifted


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
