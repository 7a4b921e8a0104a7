"""The 12-point eye landmark set and its index conventions.

Local index ``k`` corresponds to 1-based index ``37 + k`` of the 68-point
markup: 0-5 contour the eye with the smaller image x (outer corner 0, upper
lid 1-2, inner corner 3, lower lid 4-5), 6-11 the other eye (inner corner 6,
upper lid 7-8, outer corner 9, lower lid 10-11).

Coordinates use the continuous pixel convention: pixel ``i`` spans ``[i, i + 1)``.
"""

from dataclasses import dataclass

import numpy as np

from core.errors import LandmarkOutOfFrameError, ShapeError

NUM_LANDMARKS = 12

# 1-based indices 37..48 of the 68-point markup, 0-based here.
EYE_INDICES = tuple(range(36, 48))

# Outer eye corners used for the inter-ocular distance (68-pt 37 and 46).
OUTER_CORNERS = (0, 9)

# Left/right mirror symmetry of the eye contour (68-pt 37<->46, 38<->45, 39<->44,
# 40<->43, 41<->48, 42<->47).
FLIP_PERMUTATION = (9, 8, 7, 6, 11, 10, 3, 2, 1, 0, 5, 4)


@dataclass(frozen = True)
class LandmarkSet:
    """Twelve (x, y) points in the pixel units of an image frame.

    Attributes:
        points (np.ndarray): Array of shape [12, 2].
        width (int): Frame width in pixels.
        height (int): Frame height in pixels.
    """
    points : np.ndarray
    width : int
    height : int

    def __post_init__(self):
        pts = np.array(self.points, dtype = np.float64)
        if pts.shape != (NUM_LANDMARKS, 2):
            raise ShapeError("LandmarkSet", pts.shape, (NUM_LANDMARKS, 2))
        if not np.all(np.isfinite(pts)):
            raise LandmarkOutOfFrameError("landmark coordinates must be finite")
        inside = (
            (pts[:, 0] >= 0) & (pts[:, 0] < self.width)
            & (pts[:, 1] >= 0) & (pts[:, 1] < self.height)
        )
        if not inside.all():
            outside = [int(i) for i in np.flatnonzero(~inside)]
            raise LandmarkOutOfFrameError(
                f"landmarks {outside} fall outside the {self.width}x{self.height} frame"
            )
        pts.setflags(write = False)
        object.__setattr__(self, "points", pts)

    def normalized(self) -> np.ndarray:
        """Coordinates divided by the frame extent, in [0, 1)."""
        return self.points / np.asarray([self.width, self.height], dtype = np.float64)

    @classmethod
    def from_normalized(cls, coords : np.ndarray, width : int, height : int) -> "LandmarkSet":
        """Maps normalized [0, 1) coordinates back into a pixel frame."""
        scale = np.asarray([width, height], dtype = np.float64)
        return cls(points = np.asarray(coords, dtype = np.float64) * scale, width = width, height = height)

    def permuted(self, order = FLIP_PERMUTATION) -> np.ndarray:
        return self.points[list(order)]
