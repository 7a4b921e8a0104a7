import math

import numpy as np
import pytest

from core.data.images import read_image, to_gray
from core.heatmap import (
    blend_overlay, compose_heat, encode_gt, heatmap_logits, render_overlay, soft_argmax_decode,
)
from core.landmarks import LandmarkSet
from core.tensor import Graph, Tensor, ops
from core.tensor.gradcheck import check_gradients


def grid_landmarks(x0 = 8, y0 = 20, step = 9):
    xs = x0 + step * np.arange(6)
    points = np.stack([np.concatenate([xs, xs]), np.repeat([y0, y0 + 20], 6)], axis = 1).astype(float)
    return LandmarkSet(points = points, width = 64, height = 64)


class TestEncode:
    def test_peak_and_sigma_distance(self):
        lm = grid_landmarks()
        stack = encode_gt(lm, 64, 64, 5.0)
        assert stack.maps.shape == (12, 64, 64)
        assert stack.maps[0, 20, 8] == 1.0
        assert math.isclose(stack.maps[0, 20, 13], math.exp(-0.5), rel_tol = 1e-12)
        assert math.isclose(stack.maps[0, 25, 8], 0.606531, abs_tol = 1e-6)

    def test_coincident_landmarks_identical_maps(self):
        lm = LandmarkSet(points = np.full((12, 2), 31.3), width = 64, height = 64)
        maps = encode_gt(lm, 64, 64, 5.0).maps
        for i in range(1, 12):
            np.testing.assert_array_equal(maps[i], maps[0])

    def test_translation_equivariant(self):
        a = encode_gt(grid_landmarks(), 64, 64, 2.0).maps
        b = encode_gt(grid_landmarks(x0 = 11, y0 = 18), 64, 64, 2.0).maps
        np.testing.assert_allclose(b[:, 10:50, 10:50], a[:, 12:52, 7:47], atol = 1e-15)

    def test_scales_into_heatmap_grid(self):
        lm = LandmarkSet(points = np.full((12, 2), 100.0), width = 256, height = 256)
        maps = encode_gt(lm, 64, 64, 5.0).maps
        assert np.unravel_index(maps[0].argmax(), maps[0].shape) == (25, 25)

    def test_border_flags(self):
        points = np.full((12, 2), 32.0)
        points[3] = (3.0, 32.0)
        stack = encode_gt(LandmarkSet(points = points, width = 64, height = 64), 64, 64, 2.0)
        assert stack.border.tolist() == [i == 3 for i in range(12)]

    @pytest.mark.parametrize("sigma", [0.0, -1.0])
    def test_sigma_must_be_positive(self, landmarks64, sigma):
        with pytest.raises(ValueError):
            encode_gt(landmarks64, 64, 64, sigma)


class TestDecode:
    def test_one_hot_logits(self):
        logits = np.zeros((1, 12, 64, 64))
        logits[0, :, 20, 10] = 50.0
        coords = soft_argmax_decode(Tensor(logits)).data
        np.testing.assert_allclose(coords[0], np.tile([10 / 64, 20 / 64], (12, 1)), atol = 1e-6)

    def test_uniform_logits_give_centroid(self):
        coords = soft_argmax_decode(Tensor(np.zeros((2, 12, 16, 32)))).data
        np.testing.assert_allclose(coords[..., 0], 31 / 64, atol = 1e-12)
        np.testing.assert_allclose(coords[..., 1], 15 / 32, atol = 1e-12)

    def test_output_range(self, rng):
        coords = soft_argmax_decode(Tensor(rng.normal(size = (3, 12, 8, 8)) * 20)).data
        assert coords.shape == (3, 12, 2)
        assert np.all((coords >= 0) & (coords < 1))

    def test_round_trip_interior_placements(self):
        rng = np.random.default_rng(5)
        sigma, errors = 5.0, []
        for _ in range(84):
            points = rng.uniform(2 * sigma, 64 - 2 * sigma, size = (12, 2))
            lm = LandmarkSet(points = points, width = 64, height = 64)
            logits = heatmap_logits(encode_gt(lm, 64, 64, sigma).maps)[None]
            decoded = soft_argmax_decode(Tensor(logits)).data[0] * 64
            errors.append(np.linalg.norm(decoded - points, axis = 1))
        assert np.concatenate(errors).mean() < 0.5

    def test_round_trip_error_shrinks_with_sharpness(self):
        rng = np.random.default_rng(11)
        placements = [rng.integers(8, 56, size = (12, 2)).astype(float) for _ in range(6)]
        means = []
        for sharpness in (1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0):
            errors = []
            for points in placements:
                lm = LandmarkSet(points = points, width = 64, height = 64)
                logits = heatmap_logits(encode_gt(lm, 64, 64, 2.0).maps, sharpness)[None]
                decoded = soft_argmax_decode(Tensor(logits)).data[0] * 64
                errors.append(np.linalg.norm(decoded - points, axis = 1))
            means.append(float(np.concatenate(errors).mean()))
        assert all(later <= earlier + 1e-9 for earlier, later in zip(means, means[1:])), means
        assert means[0] > 1.0 and means[-1] < 1e-6

    def test_decode_gradients(self, rng, weighted_sum):
        logits = Tensor(rng.normal(size = (2, 3, 4, 4)), requires_grad = True, name = "logits")
        w = rng.normal(size = (2, 3, 2))
        errors = check_gradients(lambda: weighted_sum(soft_argmax_decode(logits), w), [logits], eps = 1e-6)
        assert errors["logits"] < 1e-4

    def test_decode_is_recorded(self):
        logits = Tensor(np.zeros((1, 12, 4, 4)), requires_grad = True, name = "logits")
        with Graph() as graph:
            grads = graph.backward(ops.sum_all(soft_argmax_decode(logits)))
        assert grads["logits"].shape == (1, 12, 4, 4)


class TestOverlay:
    def test_zero_heat_is_grayscale(self, rng):
        image = rng.uniform(size = (16, 16, 3))
        out = blend_overlay(image, np.zeros((12, 16, 16)))
        gray = np.rint(to_gray(image) * 255.0)
        for channel in range(3):
            np.testing.assert_array_equal(out[..., channel], gray)

    def test_peak_is_brightest(self):
        image = np.full((16, 16, 3), 0.5)
        heat = np.zeros((12, 16, 16))
        yy, xx = np.mgrid[0:16, 0:16]
        heat[4] = np.exp(-((xx - 11) ** 2 + (yy - 5) ** 2) / 8.0)
        out = blend_overlay(image, heat)
        assert np.unravel_index(out[..., 0].argmax(), (16, 16)) == (5, 11)

    def test_twelve_local_maxima(self):
        heat = compose_heat(encode_gt(grid_landmarks(), 64, 64, 2.0).maps)
        padded = np.pad(heat, 1, constant_values = -1.0)
        center = padded[1:-1, 1:-1]
        neighbours = [padded[1 + dy:65 + dy, 1 + dx:65 + dx] for dy in (-1, 0, 1) for dx in (-1, 0, 1) if dy or dx]
        peaks = np.all([center > n for n in neighbours], axis = 0)
        assert peaks.sum() == 12

    def test_render_writes_8bit_png(self, tmp_path, rng):
        image = rng.uniform(size = (32, 32, 3))
        maps = encode_gt(LandmarkSet(np.full((12, 2), 16.0), 32, 32), 8, 8, 1.0).maps
        path = tmp_path / "overlay" / "a.png"
        written = render_overlay(image, maps, path)
        assert written.dtype == np.uint8 and written.shape == (32, 32, 3)
        np.testing.assert_allclose(read_image(path) * 255.0, written, atol = 1e-9)
