"""Procedurally drawn faces with exact 68-point ground truth.

Each sample is a PNG with a ``.pts`` annotation and a ``.box`` sidecar, laid out
as ``raw_dir/<group>/synth_<index>.*`` exactly like real raw data, so every verb
can run without the benchmark datasets. A sample is a deterministic function of
``(seed, index)``.
"""

import logging
import math
from pathlib import Path
from typing import List

import cv2
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from core.data.geometry import box_from_points, write_box
from core.data.images import write_image
from core.data.pts import PtsAnnotation, write_pts

logger = logging.getLogger(__name__)

_SHIFT = 4
_SCALE = 1 << _SHIFT


class SyntheticConfig(BaseModel):
    """Settings of the synthetic fixture.

    Attributes:
        size (int): Extent of the square raw images.
        groups (List[str]): Group directories; sample ``i`` goes to ``groups[i % len(groups)]``.
        seed (int): Fixture seed.
        noise (float): Standard deviation of additive pixel noise (8-bit units).
    """
    model_config = ConfigDict(extra = "forbid")

    size : int = 160
    groups : List[str] = Field(default_factory = lambda: ["indoor", "outdoor"])
    seed : int = 0
    noise : float = 3.0

    @field_validator("size")
    @classmethod
    def _size_min(cls, value : int) -> int:
        if value < 32:
            raise ValueError("data.synthetic.size must be at least 32")
        return value

    @field_validator("groups")
    @classmethod
    def _groups_nonempty(cls, value : List[str]) -> List[str]:
        if not value:
            raise ValueError("data.synthetic.groups must name at least one group")
        return value


def _eye(cx : float, cy : float, hw : float, hh : float) -> List[tuple]:
    """Six contour points: left corner, upper lid, right corner, lower lid."""
    left, right = (cx - hw, cy), (cx + hw, cy)
    upper = [(cx - hw / 3, cy - hh), (cx + hw / 3, cy - hh)]
    lower = [(cx + hw / 3, cy + 0.8 * hh), (cx - hw / 3, cy + 0.8 * hh)]
    return [left, *upper, right, *lower]


def face_points(rng : np.random.Generator, size : int) -> np.ndarray:
    """Draws a plausible 68-point face layout in a ``size`` × ``size`` frame."""
    cx = size / 2 + rng.uniform(-0.04, 0.04) * size
    cy = size / 2 + rng.uniform(-0.04, 0.04) * size
    a = rng.uniform(0.28, 0.33) * size
    b = a * rng.uniform(1.1, 1.25)
    roll = math.radians(rng.uniform(-8.0, 8.0))

    eye_u = rng.uniform(0.36, 0.44)
    eye_v = -0.2 + rng.uniform(-0.03, 0.03)
    hw = rng.uniform(0.16, 0.21)
    hh = hw * rng.uniform(0.3, 0.5) * a / b

    local : List[tuple] = []
    for phi in np.linspace(0.0, math.pi, 17):
        local.append((-0.95 * math.cos(phi), -0.1 + 0.95 * math.sin(phi)))
    for side in (-1.0, 1.0):
        xs = np.linspace(-1.2 * hw, 1.0 * hw, 5) if side < 0 else np.linspace(-1.0 * hw, 1.2 * hw, 5)
        for k, du in enumerate(xs):
            arch = 0.04 * math.sin(math.pi * k / 4)
            local.append((side * eye_u + du, eye_v - 0.2 - arch))
    for v in np.linspace(-0.12, 0.2, 4):
        local.append((0.0, v))
    for u in np.linspace(-0.12, 0.12, 5):
        local.append((u, 0.28 + 0.03 * (1 - abs(u) / 0.12)))
    local.extend(_eye(-eye_u, eye_v, hw, hh))
    local.extend(_eye(eye_u, eye_v, hw, hh))
    mouth_w = rng.uniform(0.25, 0.33)
    for t in np.linspace(math.pi, -math.pi, 12, endpoint = False):
        local.append((mouth_w * math.cos(t), 0.55 + 0.1 * math.sin(-t)))
    for t in np.linspace(math.pi, -math.pi, 8, endpoint = False):
        local.append((0.7 * mouth_w * math.cos(t), 0.55 + 0.04 * math.sin(-t)))

    uv = np.asarray(local) * np.array([a, b])
    rot = np.array([[math.cos(roll), -math.sin(roll)], [math.sin(roll), math.cos(roll)]])
    return uv @ rot.T + np.array([cx, cy])


def _fixed(points : np.ndarray) -> np.ndarray:
    """Continuous coordinates to OpenCV fixed-point pixel-centre coordinates."""
    return np.rint((points - 0.5) * _SCALE).astype(np.int32).reshape(-1, 1, 2)


def draw_face(rng : np.random.Generator, points : np.ndarray, size : int, noise : float) -> np.ndarray:
    """Renders an 8-bit RGB image for a 68-point layout."""
    base = rng.uniform(60, 190)
    ramp = np.linspace(-25, 25, size)
    image = np.clip(base + ramp[None, :, None] + np.zeros((size, size, 3)), 0, 255).astype(np.uint8)

    skin = tuple(float(v) for v in rng.uniform([170, 120, 90], [235, 190, 160]))
    jaw = points[0:17]
    center = (jaw[0] + jaw[16]) / 2.0
    across = jaw[16] - jaw[0]
    axes = (float(np.linalg.norm(across)) / 2.0, float(np.linalg.norm(jaw[8] - center)))
    angle = math.degrees(math.atan2(across[1], across[0]))
    cv2.ellipse(
        image, tuple(int(v) for v in _fixed(center[None])[0, 0]),
        tuple(int(v * _SCALE) for v in axes), angle, 0, 360, skin, -1, cv2.LINE_AA, _SHIFT
    )

    dark = (40.0, 30.0, 25.0)
    cv2.polylines(image, [_fixed(points[17:22]), _fixed(points[22:27])], False, dark, 2, cv2.LINE_AA, _SHIFT)
    cv2.polylines(image, [_fixed(points[27:31]), _fixed(points[31:36])], False, (120.0, 80.0, 60.0), 1, cv2.LINE_AA, _SHIFT)
    cv2.fillPoly(image, [_fixed(points[48:60])], (170.0, 60.0, 70.0), lineType = cv2.LINE_AA, shift = _SHIFT)

    iris_color = tuple(float(v) for v in rng.uniform([30, 20, 10], [110, 90, 60]))
    for eye in (points[36:42], points[42:48]):
        mask = np.zeros((size, size), dtype = np.uint8)
        cv2.fillPoly(mask, [_fixed(eye)], 255, lineType = cv2.LINE_AA, shift = _SHIFT)
        layer = np.full_like(image, 245)
        eye_center = eye.mean(axis = 0)
        radius = 0.9 * float(eye[:, 1].max() - eye[:, 1].min())
        cv2.circle(layer, tuple(int(v) for v in _fixed(eye_center[None])[0, 0]), int(radius * _SCALE), iris_color, -1, cv2.LINE_AA, _SHIFT)
        cv2.circle(layer, tuple(int(v) for v in _fixed(eye_center[None])[0, 0]), int(0.4 * radius * _SCALE), (10.0, 10.0, 10.0), -1, cv2.LINE_AA, _SHIFT)
        alpha = (mask.astype(np.float64) / 255.0)[:, :, None]
        image = np.rint(alpha * layer + (1 - alpha) * image).astype(np.uint8)
        cv2.polylines(image, [_fixed(eye)], True, dark, 1, cv2.LINE_AA, _SHIFT)

    if noise > 0:
        image = np.clip(image + rng.normal(0.0, noise, image.shape), 0, 255).astype(np.uint8)
    return image


def generate_sample(index : int, config : SyntheticConfig):
    """Returns ``(rgb_image, points68)`` for one fixture index."""
    rng = np.random.default_rng([config.seed, index])
    points = face_points(rng, config.size)
    return draw_face(rng, points, config.size, config.noise), points


def generate_fixture(raw_dir : Path, count : int, config : SyntheticConfig) -> List[Path]:
    """Writes ``count`` samples under ``raw_dir`` and returns the image paths.

    Examples:
        >>> paths = generate_fixture(Path("raw"), 2, SyntheticConfig(size = 64))
        >>> [p.parent.name for p in paths]
        ['indoor', 'outdoor']
    """
    paths : List[Path] = []
    for index in range(count):
        image, points = generate_sample(index, config)
        group = config.groups[index % len(config.groups)]
        stem = raw_dir / group / f"synth_{index:04d}"
        image_path = write_image(stem.with_suffix(".png"), image)
        write_pts(PtsAnnotation(points = [tuple(p) for p in points.tolist()]), stem.with_suffix(".pts"))
        write_box(box_from_points(points, config.size, config.size, margin = 0.1), stem.with_suffix(".box"))
        paths.append(image_path)
    logger.info(f"Generated {count} synthetic samples under {raw_dir}")
    return paths
