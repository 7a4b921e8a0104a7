"""Conversion between landmark coordinates and per-landmark heatmaps.

Ground truth is encoded as unnormalized Gaussians (peak 1.0) evaluated at the
integer cells of the heatmap grid; predictions are decoded with a two-axis
soft-argmax, which keeps the whole path differentiable.
"""

import logging
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

from core.data.images import to_gray, write_image
from core.errors import ShapeError
from core.landmarks import LandmarkSet
from core.tensor import Tensor, ops

logger = logging.getLogger(__name__)

DEFAULT_SHARPNESS = 50.0


@dataclass(frozen = True)
class HeatmapStack:
    """One map per landmark at model output resolution.

    Attributes:
        maps (np.ndarray): Shape [12, Hm, Wm].
        border (np.ndarray): Bool [12]; True when the landmark lies within 2σ of the
            heatmap border, where decode accuracy is not guaranteed.
    """
    maps : np.ndarray
    border : np.ndarray

    @property
    def resolution(self) -> tuple:
        return self.maps.shape[1], self.maps.shape[2]


def heatmap_centers(landmarks : LandmarkSet, height : int, width : int) -> np.ndarray:
    """Landmark positions in heatmap cell units, shape [12, 2]."""
    factor = np.asarray([width / landmarks.width, height / landmarks.height])
    return landmarks.points * factor


def border_flags(landmarks : LandmarkSet, height : int, width : int, sigma : float) -> np.ndarray:
    centers = heatmap_centers(landmarks, height, width)
    margin = 2.0 * sigma
    return (
        (centers[:, 0] < margin) | (centers[:, 0] >= width - margin)
        | (centers[:, 1] < margin) | (centers[:, 1] >= height - margin)
    )


def encode_gt(landmarks : LandmarkSet, height : int, width : int, sigma : float) -> HeatmapStack:
    """Renders one Gaussian per landmark.

    ``map_i(x, y) = exp(-((x - x_i)^2 + (y - y_i)^2) / (2 sigma^2))`` with ``(x_i, y_i)``
    the landmark scaled to the heatmap grid.

    Args:
        landmarks (LandmarkSet): Points in their image frame.
        height (int): Heatmap rows Hm.
        width (int): Heatmap columns Wm.
        sigma (float): Standard deviation in heatmap cells.

    Returns:
        HeatmapStack: Maps of shape [12, Hm, Wm].

    Raises:
        ValueError: If ``sigma`` is not positive.

    Examples:
        >>> stack = encode_gt(LandmarkSet(np.full((12, 2), 10.0), 64, 64), 64, 64, 5.0)
        >>> float(stack.maps[0, 10, 10])
        1.0
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    centers = heatmap_centers(landmarks, height, width)
    xs = np.arange(width, dtype = np.float64)
    ys = np.arange(height, dtype = np.float64)
    dx2 = (xs[None, :] - centers[:, 0, None]) ** 2
    dy2 = (ys[None, :] - centers[:, 1, None]) ** 2
    maps = np.exp(-(dy2[:, :, None] + dx2[:, None, :]) / (2.0 * sigma * sigma))
    return HeatmapStack(maps = maps, border = border_flags(landmarks, height, width, sigma))


def heatmap_logits(maps : np.ndarray, sharpness : float = DEFAULT_SHARPNESS) -> np.ndarray:
    """Scales peak-1 maps into logits whose softmax concentrates at the peak."""
    return np.asarray(maps, dtype = np.float64) * float(sharpness)


def coordinate_grids(height : int, width : int) -> np.ndarray:
    """[2, H, W] grids holding x / W and y / H of every cell."""
    ys, xs = np.meshgrid(
        np.arange(height, dtype = np.float64) / height,
        np.arange(width, dtype = np.float64) / width,
        indexing = "ij"
    )
    return np.stack([xs, ys])


def soft_argmax_decode(logits : Tensor) -> Tensor:
    """Differentiable soft-argmax.

    ``p = spatial_softmax(logits)``; the x and y outputs are the two separate
    expectations ``sum p(x, y) * x / Wm`` and ``sum p(x, y) * y / Hm``.

    Args:
        logits (Tensor): Shape [N, L, Hm, Wm].

    Returns:
        Tensor: Normalized coordinates of shape [N, L, 2] in [0, 1).
    """
    if logits.data.ndim != 4:
        raise ShapeError("soft_argmax_decode", logits.shape, detail = "expected [N, L, Hm, Wm]")
    p = ops.spatial_softmax(logits)
    return ops.spatial_expectation(p, coordinate_grids(logits.shape[2], logits.shape[3]))


def probability_maps(logits : np.ndarray) -> np.ndarray:
    """Softmax maps rescaled so each has peak 1, for display."""
    n, c, h, w = logits.shape
    flat = logits.reshape(n, c, h * w)
    e = np.exp(flat - flat.max(axis = -1, keepdims = True))
    return e.reshape(n, c, h, w)


def compose_heat(heatmaps : np.ndarray) -> np.ndarray:
    """Collapses [L, Hm, Wm] maps into one [Hm, Wm] map by per-cell maximum, clipped to [0, 1]."""
    if heatmaps.ndim != 3:
        raise ShapeError("compose_heat", heatmaps.shape, detail = "expected [L, Hm, Wm]")
    return np.clip(heatmaps.max(axis = 0), 0.0, 1.0)


def blend_overlay(image : np.ndarray, heatmaps : np.ndarray) -> np.ndarray:
    """Blends heat over the grayscale image as an 8-bit RGB array.

    With heat ``h`` in [0, 1] and gray value ``g`` in [0, 255]:
    ``R = g + (255 - g) h`` and ``G = B = g (1 - h)``.
    """
    gray = to_gray(image) * 255.0
    heat = compose_heat(heatmaps)
    if heat.shape != gray.shape:
        heat = cv2.resize(heat, (gray.shape[1], gray.shape[0]), interpolation = cv2.INTER_NEAREST)
    red = gray + (255.0 - gray) * heat
    rest = gray * (1.0 - heat)
    rgb = np.stack([red, rest, rest], axis = -1)
    return np.clip(np.rint(rgb), 0, 255).astype(np.uint8)


def render_overlay(image : np.ndarray, heatmaps : np.ndarray, out_path : Path) -> np.ndarray:
    """Writes an 8-bit RGB PNG with the heatmaps blended over the grayscale image.

    Args:
        image (np.ndarray): RGB [H, W, 3] or grayscale [H, W] image, float in [0, 1] or uint8.
        heatmaps (np.ndarray): Maps [L, Hm, Wm] with values in [0, 1].
        out_path (Path): Destination file.

    Returns:
        np.ndarray: The written RGB image.

    Raises:
        OSError: If the file cannot be written.
    """
    overlay = blend_overlay(image, heatmaps)
    write_image(Path(out_path), overlay)
    return overlay
