import math

import numpy as np
import pytest

from core.data.geometry import (
    FaceBox, apply_affine, box_from_points, crop_resize, crop_to_box, gaussian_blur, gaussian_kernel,
    hflip, read_box, rotate, rotate_points, rotation_matrix, write_box,
)
from core.errors import LandmarkOutOfFrameError
from core.landmarks import LandmarkSet


def constant_points(x, y, width, height):
    return LandmarkSet(points = np.tile([x, y], (12, 1)).astype(float), width = width, height = height)


class TestCrop:
    def test_downscale_maps_coordinates(self, rng):
        image = rng.uniform(size = (512, 512, 3))
        _, local = crop_resize(image, FaceBox(x = 0, y = 0, w = 512, h = 512), constant_points(100, 300, 512, 512), 256)
        np.testing.assert_allclose(local.points, np.tile([50.0, 150.0], (12, 1)))
        assert (local.width, local.height) == (256, 256)

    def test_full_frame_box_is_identity(self, rng):
        image = rng.uniform(size = (64, 64, 3))
        landmarks = constant_points(10.5, 20.25, 64, 64)
        cropped, local = crop_resize(image, FaceBox(x = 0, y = 0, w = 64, h = 64), landmarks, 64)
        np.testing.assert_allclose(cropped, image, atol = 1e-6)
        np.testing.assert_array_equal(local.points, landmarks.points)

    def test_offset_box_preserves_ratios(self, rng):
        image = rng.uniform(size = (200, 300, 3))
        box = FaceBox(x = 40, y = 30, w = 160, h = 120)
        points = np.column_stack([np.linspace(45, 195, 12), np.linspace(35, 145, 12)])
        _, local = crop_resize(image, box, LandmarkSet(points, 300, 200), 64)
        np.testing.assert_allclose(local.points[:, 0], (points[:, 0] - 40) * 64 / 160)
        np.testing.assert_allclose(local.points[:, 1], (points[:, 1] - 30) * 64 / 120)

    def test_landmark_outside_box(self, rng):
        image = rng.uniform(size = (64, 64, 3))
        with pytest.raises(LandmarkOutOfFrameError):
            crop_resize(image, FaceBox(x = 16, y = 16, w = 32, h = 32), constant_points(8, 30, 64, 64), 32)

    def test_box_leaving_image(self, rng):
        with pytest.raises(ValueError, match = "leaves"):
            crop_to_box(rng.uniform(size = (32, 32, 3)), FaceBox(x = 10, y = 0, w = 32, h = 32), 16)

    def test_crop_to_box_matches_crop_resize(self, rng):
        image = rng.uniform(size = (80, 80, 3))
        box = FaceBox(x = 8, y = 12, w = 48, h = 48)
        cropped, _ = crop_resize(image, box, constant_points(30, 30, 80, 80), 32)
        np.testing.assert_array_equal(crop_to_box(image, box, 32), cropped)


class TestFlip:
    def test_mirror_coordinate(self, rng):
        _, flipped = hflip(rng.uniform(size = (256, 256, 3)), constant_points(10, 100, 256, 256))
        np.testing.assert_array_equal(flipped.points[:, 0], 246.0)

    def test_involution(self, rng):
        image = rng.uniform(size = (32, 48, 3))
        points = np.column_stack([np.linspace(1, 47, 12), np.linspace(2, 30, 12)])
        landmarks = LandmarkSet(points, 48, 32)
        once_image, once = hflip(image, landmarks)
        np.testing.assert_array_equal(once_image[:, ::-1], image)
        twice_image, twice = hflip(once_image, once)
        np.testing.assert_array_equal(twice_image, image)
        np.testing.assert_array_equal(twice.points, landmarks.points)

    def test_swaps_eye_indices(self):
        points = np.column_stack([np.arange(12, dtype = float) + 1, np.full(12, 5.0)])
        _, flipped = hflip(np.zeros((10, 20, 3)), LandmarkSet(points, 20, 10))
        assert flipped.points[0, 0] == 20 - points[9, 0]
        assert flipped.points[3, 0] == 20 - points[6, 0]

    def test_left_edge_landmark_is_dropped(self):
        with pytest.raises(LandmarkOutOfFrameError):
            hflip(np.zeros((8, 8, 3)), constant_points(0, 4, 8, 8))


class TestRotate:
    def test_zero_angle_is_identity(self, rng):
        image = rng.uniform(size = (40, 40, 3))
        landmarks = constant_points(12.5, 30.0, 40, 40)
        rotated, moved = rotate(image, landmarks, 0.0)
        np.testing.assert_allclose(rotated, image, atol = 1e-6)
        np.testing.assert_allclose(moved.points, landmarks.points, atol = 1e-12)

    def test_quarter_turn_about_origin(self):
        np.testing.assert_allclose(apply_affine(np.array([[1.0, 0.0]]), rotation_matrix(90.0, 0.0, 0.0)), [[0.0, -1.0]], atol = 1e-12)

    def test_centre_is_fixed(self):
        np.testing.assert_allclose(rotate_points(np.array([[32.0, 16.0]]), 10.0, 64, 32), [[32.0, 16.0]], atol = 1e-12)

    @pytest.mark.parametrize("angle", [-10.0, -5.0, 5.0, 10.0])
    def test_round_trip(self, angle):
        points = np.column_stack([np.linspace(20, 44, 12), np.linspace(24, 40, 12)])
        back = rotate_points(rotate_points(points, angle, 64, 64), -angle, 64, 64)
        np.testing.assert_allclose(back, points, atol = 1e-9)

    def test_corner_landmark_leaves_frame(self):
        with pytest.raises(LandmarkOutOfFrameError):
            rotate(np.zeros((64, 64, 3)), constant_points(1, 1, 64, 64), 10.0)


class TestBlur:
    def test_constant_image_unchanged(self):
        image = np.full((20, 20, 3), 0.4)
        np.testing.assert_allclose(gaussian_blur(image), image, atol = 1e-12)

    def test_impulse_response_is_kernel(self):
        image = np.zeros((21, 21))
        image[10, 10] = 1.0
        np.testing.assert_allclose(gaussian_blur(image)[6:15, 6:15], gaussian_kernel(), atol = 1e-12)

    def test_kernel_shape(self):
        kernel = gaussian_kernel()
        assert kernel.shape == (9, 9)
        assert kernel.sum() == pytest.approx(1.0)
        assert kernel[4, 4] / kernel[0, 0] == pytest.approx(math.exp(32 / (2 * 1.8 ** 2)))


class TestBox:
    def test_sidecar_round_trip(self, tmp_path):
        box = FaceBox(x = 1.5, y = 2.25, w = 100.0, h = 80.125)
        assert read_box(write_box(box, tmp_path / "a.box")) == box

    def test_malformed_sidecar(self, tmp_path):
        path = tmp_path / "a.box"
        path.write_text("1 2 3\n", encoding = "utf-8")
        with pytest.raises(ValueError):
            read_box(path)

    def test_from_points_is_clipped_square(self):
        points = np.array([[10.0, 10.0], [30.0, 20.0]])
        box = box_from_points(points, 100, 100, margin = 0.25)
        assert (box.x, box.y, box.w, box.h) == (5.0, 0.0, 30.0, 30.0)
