import json
import math

import numpy as np
import pytest

from trackbench.errors import (
    DegenerateConfigurationError,
    DuplicateCameraPointError,
    FrameMismatchError,
    OutOfBoundsError,
    PointAtInfinityError,
    TooFewPointsError,
)
from trackbench.geometry import (
    CalibrationDiagnostics,
    Frame,
    Homography,
    KeypointPair,
    KeypointSet,
    Point2,
    apply_homography,
    estimate_homography,
    keypoint_error_curve,
    keypoints_from_dict,
    keypoints_to_dict,
    leave_one_out_diagnostics,
    load_keypoints,
    reprojection_diagnostics,
    save_keypoints,
)

from conftest import apply_matrix, exact_correspondences, make_keypoint_set


def normalized(matrix):
    m = np.asarray(matrix, dtype=float)
    m = m / np.linalg.norm(m)
    if m[2, 2] < 0:
        m = -m
    return m


class TestPoint2:
    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            Point2(float("nan"), 0.0, Frame.CAMERA)
        with pytest.raises(ValueError):
            Point2(0.0, float("inf"), Frame.TWIN)

    def test_cross_frame_distance_rejected(self):
        a = Point2(0, 0, Frame.CAMERA)
        b = Point2(3, 4, Frame.TWIN)
        with pytest.raises(FrameMismatchError):
            a.distance_to(b)
        assert Point2(3, 4, Frame.CAMERA).distance_to(a) == 5.0


class TestKeypointSet:
    def test_out_of_bounds_camera_point(self):
        with pytest.raises(OutOfBoundsError):
            make_keypoint_set([(-5, 10)], [(0, 0)])

    def test_out_of_bounds_twin_point(self):
        with pytest.raises(OutOfBoundsError):
            make_keypoint_set([(5, 10)], [(0, 2000)], twin_size=(1000, 1000))

    def test_duplicate_camera_point_rejected(self):
        with pytest.raises(DuplicateCameraPointError):
            make_keypoint_set([(1, 2), (1, 2)], [(0, 0), (10, 10)])

    def test_pair_frames_enforced(self):
        with pytest.raises(FrameMismatchError):
            KeypointPair(camera=Point2(0, 0, Frame.TWIN), twin=Point2(0, 0, Frame.TWIN))


class TestEstimateHomography:
    def test_identity_from_unit_square(self):
        corners = [(0, 0), (1, 0), (1, 1), (0, 1)]
        ks = make_keypoint_set(corners, corners)
        h = estimate_homography(ks)
        expected = np.eye(3) / math.sqrt(3.0)
        assert np.allclose(h.matrix, expected, atol=1e-12)

    def test_recovers_known_scale_translation(self, rng):
        known = np.array([[2.0, 0.0, 5.0], [0.0, 2.0, 7.0], [0.0, 0.0, 1.0]])
        camera = np.column_stack(
            [rng.uniform(50, 1800, size=6), rng.uniform(50, 1000, size=6)]
        )
        twin = apply_matrix(known, camera)
        ks = make_keypoint_set(camera, twin, twin_size=(4000, 3000))
        h = estimate_homography(ks)
        assert np.abs(h.matrix - normalized(known)).max() < 1e-9

    def test_too_few_points(self):
        ks = make_keypoint_set([(0, 0), (1, 0), (1, 1)], [(0, 0), (1, 0), (1, 1)])
        with pytest.raises(TooFewPointsError):
            estimate_homography(ks)

    def test_three_collinear_points_degenerate(self):
        camera = [(0, 0), (10, 10), (20, 20), (50, 0)]
        twin = [(0, 0), (10, 10), (20, 20), (50, 0)]
        ks = make_keypoint_set(camera, twin)
        with pytest.raises(DegenerateConfigurationError):
            estimate_homography(ks)

    def test_overdetermined_exact_fit(self, rng):
        matrix = np.array([[1.1, 0.2, 40.0], [-0.1, 0.9, 25.0], [1e-4, 5e-5, 1.0]])
        ks, shifted = exact_correspondences(matrix, rng, count=9)
        h = estimate_homography(ks)
        assert np.abs(h.matrix - normalized(shifted)).max() < 1e-9

    def test_permutation_invariance(self, rng):
        matrix = np.array([[1.3, -0.1, 12.0], [0.2, 1.1, 3.0], [2e-5, -1e-5, 1.0]])
        ks, _ = exact_correspondences(matrix, rng, count=7)
        h1 = estimate_homography(ks)
        order = rng.permutation(len(ks))
        h2 = estimate_homography(ks.subset(order.tolist()))
        assert np.abs(h1.matrix - h2.matrix).max() < 1e-12


class TestHomographyType:
    def test_normalization_convention(self):
        h = Homography(np.diag([2.0, 2.0, 1.0]))
        assert math.isclose(np.linalg.norm(h.matrix), 1.0, rel_tol=1e-12)
        assert h.matrix[2, 2] > 0

    def test_negative_matrix_sign_flipped(self):
        h = Homography(-np.eye(3))
        assert h.matrix[2, 2] > 0

    def test_singular_matrix_rejected(self):
        with pytest.raises(DegenerateConfigurationError):
            Homography(np.array([[1.0, 0, 0], [0, 1.0, 0], [0, 0, 0.0]]))

    def test_matrix_is_read_only(self):
        h = Homography(np.eye(3))
        with pytest.raises(ValueError):
            h.matrix[0, 0] = 5.0

    def test_round_trip_inverse(self, rng):
        matrix = np.array([[1.2, 0.1, 30.0], [-0.05, 1.1, 20.0], [1e-4, -2e-5, 1.0]])
        h = Homography(matrix)
        pts = np.column_stack([rng.uniform(0, 1920, 50), rng.uniform(0, 1080, 50)])
        back = h.inverse().apply_array(h.apply_array(pts))
        assert np.abs(back - pts).max() < 1e-6


class TestApplyHomography:
    def test_identity(self):
        h = Homography(np.eye(3))
        p = apply_homography(h, Point2(10, 20, Frame.CAMERA))
        assert (p.x, p.y) == (10, 20)
        assert p.frame is Frame.TWIN

    def test_pure_translation(self):
        h = Homography(np.array([[1.0, 0, 5.0], [0, 1.0, 7.0], [0, 0, 1.0]]))
        p = apply_homography(h, Point2(0, 0, Frame.CAMERA))
        assert math.isclose(p.x, 5.0, abs_tol=1e-12)
        assert math.isclose(p.y, 7.0, abs_tol=1e-12)

    def test_twin_frame_input_rejected(self):
        h = Homography(np.eye(3))
        with pytest.raises(FrameMismatchError):
            apply_homography(h, Point2(0, 0, Frame.TWIN))

    def test_point_at_infinity(self):
        # Third row (0, 1, -5): any point with y = 5 has homogeneous w = 0.
        h = Homography(np.array([[1.0, 0, 0], [0, 1.0, 0], [0, 1.0, -5.0]]))
        with pytest.raises(PointAtInfinityError):
            apply_homography(h, Point2(3.0, 5.0, Frame.CAMERA))


class TestDiagnostics:
    def test_three_four_five_triangle(self):
        h = Homography(np.eye(3))
        ks = make_keypoint_set([(0, 0)], [(3, 4)])
        diag = reprojection_diagnostics(h, ks)
        assert diag.per_point_errors == (5.0,)
        assert diag.average_error == 5.0
        assert diag.accumulated_error == 5.0
        assert diag.keypoint_count == 1

    def test_two_pairs_sum(self):
        h = Homography(np.eye(3))
        ks = make_keypoint_set([(0, 0), (100, 0)], [(3, 4), (103, 4)])
        diag = reprojection_diagnostics(h, ks)
        assert diag.accumulated_error == 10.0
        assert diag.average_error == 5.0

    def test_exact_fit_zero_error(self, rng):
        matrix = np.array([[0.9, 0.1, 10.0], [0.0, 1.2, 5.0], [0.0, 0.0, 1.0]])
        ks, _ = exact_correspondences(matrix, rng, count=5)
        h = estimate_homography(ks)
        diag = reprojection_diagnostics(h, ks)
        assert diag.average_error < 1e-9
        assert diag.accumulated_error < 1e-8

    def test_invariants_hold(self):
        diag = CalibrationDiagnostics.from_errors([1.0, 2.0, 3.0])
        assert math.isclose(diag.accumulated_error, sum(diag.per_point_errors), rel_tol=1e-9)
        assert math.isclose(
            diag.average_error, diag.accumulated_error / diag.keypoint_count, rel_tol=1e-9
        )

    def test_scale_invariance(self, rng):
        # Scaling all coordinates in both frames by s scales the errors by s.
        matrix = np.array([[1.1, 0.05, 20.0], [-0.02, 0.95, 12.0], [5e-5, 1e-5, 1.0]])
        ks, _ = exact_correspondences(matrix, rng, count=8)
        noisy_twin = ks.twin_array() + rng.normal(0, 3, size=(len(ks), 2))
        noisy_twin -= noisy_twin.min(axis=0).clip(max=0)
        base = make_keypoint_set(ks.camera_array(), noisy_twin, twin_size=(5000, 5000))
        s = 3.0
        scaled = make_keypoint_set(
            ks.camera_array() * s,
            noisy_twin * s,
            camera_size=(1920 * 4, 1080 * 4),
            twin_size=(20000, 20000),
        )
        d1 = reprojection_diagnostics(estimate_homography(base), base)
        d2 = reprojection_diagnostics(estimate_homography(scaled), scaled)
        errs1 = np.array(d1.per_point_errors)
        errs2 = np.array(d2.per_point_errors)
        assert np.abs(errs2 - s * errs1).max() < 1e-9 * max(1.0, errs2.max())


class TestLeaveOneOut:
    def test_requires_five_pairs(self, rng):
        matrix = np.eye(3)
        ks, _ = exact_correspondences(matrix, rng, count=4)
        with pytest.raises(TooFewPointsError):
            leave_one_out_diagnostics(ks)

    def test_matches_manual_folds(self, rng):
        matrix = np.array([[1.05, 0.0, 8.0], [0.1, 0.9, 4.0], [1e-5, 0.0, 1.0]])
        ks, _ = exact_correspondences(matrix, rng, count=6)
        noisy_cam = ks.camera_array() + rng.normal(0, 2, size=(6, 2))
        ks = make_keypoint_set(noisy_cam, ks.twin_array(), twin_size=ks.image_size_twin)
        diag = leave_one_out_diagnostics(ks)
        # Recompute fold 0 and fold 5 by hand.
        for held_out in (0, 5):
            rest = ks.subset([i for i in range(6) if i != held_out])
            h = estimate_homography(rest)
            mapped = h.apply_array(ks.camera_array()[held_out])
            expected = float(np.linalg.norm(mapped - ks.twin_array()[held_out]))
            assert math.isclose(diag.per_point_errors[held_out], expected, rel_tol=1e-12)


class TestErrorCurve:
    def _noisy_set(self, rng, count=10, sigma=2.0):
        matrix = np.array([[1.15, 0.1, 60.0], [-0.08, 1.05, 40.0], [8e-5, -3e-5, 1.0]])
        ks, _ = exact_correspondences(matrix, rng, count=count)
        noisy_cam = ks.camera_array() + rng.normal(0.0, sigma, size=(count, 2))
        noisy_cam = np.clip(noisy_cam, 0.0, [1920.0, 1080.0])
        return make_keypoint_set(noisy_cam, ks.twin_array(), twin_size=ks.image_size_twin)

    def test_noiseless_curve_is_flat_zero(self, rng):
        matrix = np.array([[1.0, 0.05, 15.0], [0.0, 1.1, 9.0], [0.0, 2e-5, 1.0]])
        ks, _ = exact_correspondences(matrix, rng, count=8)
        curve = keypoint_error_curve(ks, min_count=4)
        assert [k for k, _ in curve] == [4, 5, 6, 7]
        assert all(diag.average_error < 1e-6 for _, diag in curve)

    def test_noisy_curve_drops_at_five(self):
        rng = np.random.default_rng(424242)
        ks = self._noisy_set(rng, count=10, sigma=2.0)
        curve = dict(keypoint_error_curve(ks, min_count=4))
        assert set(curve) == {4, 5, 6, 7, 8, 9}
        err = {k: d.average_error for k, d in curve.items()}
        assert err[5] < err[4]
        assert all(err[k] < err[4] for k in (6, 7, 8, 9))
        assert np.mean([err[k] for k in (6, 7, 8, 9)]) < err[4]

    def test_entries_match_manual_loo(self, rng):
        ks = self._noisy_set(rng, count=7)
        curve = dict(keypoint_error_curve(ks, min_count=4))
        manual = leave_one_out_diagnostics(ks.subset(range(5)))
        assert curve[4].per_point_errors == manual.per_point_errors

    def test_min_count_three_rejected(self, rng):
        ks = self._noisy_set(rng, count=10)
        with pytest.raises(TooFewPointsError):
            keypoint_error_curve(ks, min_count=3)

    def test_needs_min_count_plus_one_pairs(self, rng):
        ks = self._noisy_set(rng, count=4)
        with pytest.raises(TooFewPointsError):
            keypoint_error_curve(ks, min_count=4)


class TestKeypointsIo:
    def test_round_trip_file(self, tmp_path, rng):
        matrix = np.array([[1.0, 0.0, 3.5], [0.0, 1.0, -0.0], [0.0, 0.0, 1.0]])
        ks, _ = exact_correspondences(matrix, rng, count=5)
        path = tmp_path / "keypoints.json"
        save_keypoints(ks, path)
        loaded = load_keypoints(path)
        assert loaded == ks

    def test_document_shape(self):
        ks = make_keypoint_set([(1.5, 2.5)], [(10, 20)])
        doc = keypoints_to_dict(ks)
        assert doc["image_size_camera"] == [1920, 1080]
        assert doc["pairs"] == [{"camera": [1.5, 2.5], "twin": [10.0, 20.0]}]

    def test_labels_preserved(self, tmp_path):
        ks = KeypointSet(
            pairs=(
                KeypointPair(
                    Point2(5, 6, Frame.CAMERA), Point2(7, 8, Frame.TWIN), label="corner NW"
                ),
            ),
            image_size_camera=(100, 100),
            image_size_twin=(100, 100),
        )
        path = tmp_path / "kp.json"
        save_keypoints(ks, path)
        assert load_keypoints(path).pairs[0].label == "corner NW"

    def test_malformed_documents_rejected(self):
        with pytest.raises(ValueError):
            keypoints_from_dict({"pairs": []})
        with pytest.raises(ValueError):
            keypoints_from_dict(
                {
                    "image_size_camera": [10, 10],
                    "image_size_twin": [10, 10],
                    "pairs": [{"camera": [1, 2]}],
                }
            )
        with pytest.raises(ValueError):
            keypoints_from_dict(
                {
                    "image_size_camera": [10, 10],
                    "image_size_twin": [10, 10],
                    "pairs": [{"camera": [1, "x"], "twin": [0, 0]}],
                }
            )

    def test_json_is_stable(self, tmp_path):
        ks = make_keypoint_set([(1, 2), (3, 4), (5, 6), (7, 8)], [(1, 2), (3, 4), (5, 6), (7, 8)])
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        save_keypoints(ks, p1)
        save_keypoints(ks, p2)
        assert p1.read_bytes() == p2.read_bytes()
        json.loads(p1.read_text())
