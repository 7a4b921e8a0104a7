"""Image file I/O on top of OpenCV.

In memory an image is an RGB ``float64`` array of shape [H, W, 3] with values
in [0, 1]; on disk it is an 8-bit PNG or JPEG.
"""

import logging
from pathlib import Path

import cv2
import numpy as np

logger = logging.getLogger(__name__)


def read_image(path : Path) -> np.ndarray:
    """Reads an image file as RGB float64 in [0, 1].

    Raises:
        OSError: If the file cannot be read or decoded.
    """
    bgr = cv2.imread(str(path), cv2.IMREAD_COLOR)
    if bgr is None:
        raise OSError(f"cannot read image: {path}")
    return cv2.cvtColor(bgr, cv2.COLOR_BGR2RGB).astype(np.float64) / 255.0


def to_uint8(image : np.ndarray) -> np.ndarray:
    """Quantizes a [0, 1] float image (or passes an 8-bit image through)."""
    if image.dtype == np.uint8:
        return image
    return np.clip(np.rint(image * 255.0), 0, 255).astype(np.uint8)


def write_image(path : Path, image : np.ndarray) -> Path:
    """Writes an RGB (or grayscale) image as an 8-bit file.

    Raises:
        OSError: If the path is not writable.
    """
    data = to_uint8(image)
    if data.ndim == 3:
        data = cv2.cvtColor(data, cv2.COLOR_RGB2BGR)
    try:
        path.parent.mkdir(parents = True, exist_ok = True)
        ok = cv2.imwrite(str(path), data)
    except (cv2.error, OSError) as e:
        raise OSError(f"cannot write image: {path}: {e}") from e
    if not ok:
        raise OSError(f"cannot write image: {path}")
    logger.debug("Wrote image %s", path)
    return path


def to_gray(image : np.ndarray) -> np.ndarray:
    """Returns a [H, W] float64 luminance image in [0, 1]."""
    if image.dtype == np.uint8:
        image = image.astype(np.float64) / 255.0
    if image.ndim == 2:
        return np.asarray(image, dtype = np.float64)
    gray = cv2.cvtColor(image.astype(np.float32), cv2.COLOR_RGB2GRAY)
    return gray.astype(np.float64)


def to_chw(image : np.ndarray) -> np.ndarray:
    """[H, W, 3] -> [3, H, W] for the network input."""
    return np.ascontiguousarray(image.transpose(2, 0, 1), dtype = np.float64)
