"""Crop/resize, mirror, rotation and blur of an image together with its landmarks.

Landmarks use the continuous pixel convention (pixel ``i`` spans ``[i, i + 1)``);
OpenCV samples at pixel centres, so every affine matrix handed to OpenCV is
conjugated by a half-pixel shift. Images are RGB float64 in [0, 1].
"""

import logging
import math
from pathlib import Path
from typing import Tuple

import cv2
import numpy as np
from pydantic import BaseModel, field_validator

from core.errors import LandmarkOutOfFrameError
from core.landmarks import FLIP_PERMUTATION, LandmarkSet

logger = logging.getLogger(__name__)

BLUR_KERNEL_SIZE = 9
BLUR_SIGMA = 1.8


class FaceBox(BaseModel):
    """Axis-aligned face rectangle in image pixels."""
    x : float
    y : float
    w : float
    h : float

    @field_validator("w", "h")
    @classmethod
    def _extent_positive(cls, value : float) -> float:
        if not value > 0:
            raise ValueError("box extents must be positive")
        return value


def read_box(path : Path) -> FaceBox:
    """Reads a ``.box`` sidecar holding ``x y w h``.

    Raises:
        ValueError: If the file does not hold four numbers.
    """
    tokens = Path(path).read_text(encoding = "utf-8").split()
    if len(tokens) != 4:
        raise ValueError(f"{path}: expected 'x y w h', got {len(tokens)} values")
    x, y, w, h = (float(t) for t in tokens)
    return FaceBox(x = x, y = y, w = w, h = h)


def write_box(box : FaceBox, path : Path) -> Path:
    path.parent.mkdir(parents = True, exist_ok = True)
    path.write_text(f"{box.x:.6f} {box.y:.6f} {box.w:.6f} {box.h:.6f}\n", encoding = "utf-8")
    return path


def box_from_points(points : np.ndarray, width : int, height : int, margin : float = 0.25) -> FaceBox:
    """Square around all annotation points, enlarged by ``margin`` per side and clipped to the image."""
    lo = points.min(axis = 0)
    hi = points.max(axis = 0)
    center = (lo + hi) / 2.0
    side = float((hi - lo).max()) * (1.0 + 2.0 * margin)
    side = max(side, 1.0)
    x0 = max(0.0, center[0] - side / 2.0)
    y0 = max(0.0, center[1] - side / 2.0)
    x1 = min(float(width), center[0] + side / 2.0)
    y1 = min(float(height), center[1] + side / 2.0)
    return FaceBox(x = x0, y = y0, w = x1 - x0, h = y1 - y0)


def _to_opencv(matrix : np.ndarray) -> np.ndarray:
    """Converts a continuous-coordinate affine map to OpenCV's pixel-centre convention."""
    linear = matrix[:, :2]
    shift = matrix[:, 2] + linear @ np.array([0.5, 0.5]) - 0.5
    return np.hstack([linear, shift[:, None]])


def warp(image : np.ndarray, matrix : np.ndarray, width : int, height : int, border : int = cv2.BORDER_CONSTANT) -> np.ndarray:
    """Bilinear resampling of ``image`` through the forward affine ``matrix`` (continuous coordinates)."""
    out = cv2.warpAffine(
        image.astype(np.float32),
        _to_opencv(matrix),
        (width, height),
        flags = cv2.INTER_LINEAR,
        borderMode = border,
        borderValue = 0
    )
    return out.astype(np.float64)


def apply_affine(points : np.ndarray, matrix : np.ndarray) -> np.ndarray:
    return points @ matrix[:, :2].T + matrix[:, 2]


def crop_resize(image : np.ndarray, box : FaceBox, landmarks : LandmarkSet, size : int = 256) -> Tuple[np.ndarray, LandmarkSet]:
    """Crops the face box and rescales it to ``size`` × ``size``.

    Landmarks map as ``x_new = (x - box.x) * size / box.w`` (and likewise for y).

    Raises:
        ValueError: If the box leaves the image.
        LandmarkOutOfFrameError: If a landmark lies outside the box.
    """
    matrix = box_matrix(image, box, size)
    points = apply_affine(landmarks.points, matrix)
    outside = (points < 0).any(axis = 1) | (points[:, 0] >= size) | (points[:, 1] >= size)
    if outside.any():
        raise LandmarkOutOfFrameError(f"landmarks {np.flatnonzero(outside).tolist()} lie outside the face box")
    cropped = warp(image, matrix, size, size, border = cv2.BORDER_REPLICATE)
    return cropped, LandmarkSet(points = points, width = size, height = size)


def box_matrix(image : np.ndarray, box : FaceBox, size : int) -> np.ndarray:
    """Affine map from image coordinates to the ``size`` × ``size`` crop of ``box``.

    Raises:
        ValueError: If the box leaves the image.
    """
    height, width = image.shape[:2]
    if box.x < 0 or box.y < 0 or box.x + box.w > width + 1e-9 or box.y + box.h > height + 1e-9:
        raise ValueError(f"box {box.x, box.y, box.w, box.h} leaves the {width}x{height} image")
    sx, sy = size / box.w, size / box.h
    return np.array([[sx, 0.0, -box.x * sx], [0.0, sy, -box.y * sy]])


def crop_to_box(image : np.ndarray, box : FaceBox, size : int) -> np.ndarray:
    """The crop of :func:`crop_resize` without landmarks, for inference inputs."""
    return warp(image, box_matrix(image, box, size), size, size, border = cv2.BORDER_REPLICATE)


def hflip(image : np.ndarray, landmarks : LandmarkSet) -> Tuple[np.ndarray, LandmarkSet]:
    """Mirrors horizontally: ``x_new = W - x`` and the left/right eye indices swap.

    Raises:
        LandmarkOutOfFrameError: If a landmark at x = 0 would land on x = W.
    """
    width = landmarks.width
    points = landmarks.points.copy()
    points[:, 0] = width - points[:, 0]
    flipped = cv2.flip(np.ascontiguousarray(image), 1)
    return flipped, LandmarkSet(points = points[list(FLIP_PERMUTATION)], width = width, height = landmarks.height)


def rotation_matrix(theta_deg : float, cx : float, cy : float) -> np.ndarray:
    """``x' = x cos t + y sin t + x_off``, ``y' = -x sin t + y cos t + y_off`` with (cx, cy) fixed.

    Examples:
        >>> np.round(apply_affine(np.array([[1.0, 0.0]]), rotation_matrix(90.0, 0.0, 0.0)), 12)
        array([[ 0., -1.]])
    """
    t = math.radians(theta_deg)
    c, s = math.cos(t), math.sin(t)
    linear = np.array([[c, s], [-s, c]])
    offset = np.array([cx, cy]) - linear @ np.array([cx, cy])
    return np.hstack([linear, offset[:, None]])


def rotate_points(points : np.ndarray, theta_deg : float, width : int, height : int) -> np.ndarray:
    return apply_affine(points, rotation_matrix(theta_deg, width / 2.0, height / 2.0))


def rotate(image : np.ndarray, landmarks : LandmarkSet, theta_deg : float) -> Tuple[np.ndarray, LandmarkSet]:
    """Rotates about the image centre with bilinear resampling.

    Raises:
        LandmarkOutOfFrameError: If a rotated landmark leaves the frame.
    """
    width, height = landmarks.width, landmarks.height
    matrix = rotation_matrix(theta_deg, width / 2.0, height / 2.0)
    points = apply_affine(landmarks.points, matrix)
    rotated_set = LandmarkSet(points = points, width = width, height = height)
    return warp(image, matrix, width, height), rotated_set


def gaussian_kernel(size : int = BLUR_KERNEL_SIZE, sigma_x : float = BLUR_SIGMA, sigma_y : float = BLUR_SIGMA) -> np.ndarray:
    """``exp(-(x^2 + y^2) / (2 sigma_x sigma_y))`` on a centred grid, normalized to sum 1."""
    r = np.arange(size, dtype = np.float64) - (size - 1) / 2.0
    kernel = np.exp(-(r[None, :] ** 2 + r[:, None] ** 2) / (2.0 * sigma_x * sigma_y))
    return kernel / kernel.sum()


def gaussian_blur(image : np.ndarray, size : int = BLUR_KERNEL_SIZE, sigma : float = BLUR_SIGMA) -> np.ndarray:
    """Convolves every channel with :func:`gaussian_kernel`; landmarks are unaffected."""
    return cv2.filter2D(
        np.asarray(image, dtype = np.float64), -1, gaussian_kernel(size, sigma, sigma),
        borderType = cv2.BORDER_REFLECT_101
    )
