"""Reading and writing 68-point ``.pts`` annotation files.

Layout::

    version: 1
    n_points: 68
    {
    x y
    ...
    }
"""

import logging
import math
from pathlib import Path
from typing import List, Tuple

import numpy as np
from pydantic import BaseModel, model_validator

from core.errors import PtsFormatError
from core.landmarks import EYE_INDICES, LandmarkSet

logger = logging.getLogger(__name__)

FACE_POINTS = 68


class PtsAnnotation(BaseModel):
    """Contents of one ``.pts`` file.

    Attributes:
        version (int): Header version.
        n_points (int): Declared point count.
        points (List[Tuple[float, float]]): (x, y) pixel pairs.
    """
    version : int = 1
    n_points : int = FACE_POINTS
    points : List[Tuple[float, float]]

    @model_validator(mode = "after")
    def _count_and_finite(self) -> "PtsAnnotation":
        if len(self.points) != self.n_points:
            raise ValueError(f"n_points is {self.n_points} but {len(self.points)} points are given")
        if not all(math.isfinite(v) for p in self.points for v in p):
            raise ValueError("point coordinates must be finite")
        return self

    def as_array(self) -> np.ndarray:
        return np.asarray(self.points, dtype = np.float64).reshape(-1, 2)


def _header(path : Path, lineno : int, line : str, key : str) -> int:
    name, sep, value = line.partition(":")
    if not sep or name.strip() != key:
        raise PtsFormatError(path, lineno, f"expected '{key}:' header, got {line.strip()!r}")
    try:
        return int(float(value.strip()))
    except ValueError:
        raise PtsFormatError(path, lineno, f"'{key}' is not a number: {value.strip()!r}") from None


def parse_pts(path : Path) -> PtsAnnotation:
    """Parses a ``.pts`` file.

    Args:
        path (Path): File to read.

    Returns:
        PtsAnnotation: The parsed annotation.

    Raises:
        PtsFormatError: On a malformed header, a wrong point count or a non-numeric
            token; the error carries the 1-based line number.
        OSError: If the file cannot be read.
    """
    path = Path(path)
    lines = path.read_text(encoding = "utf-8").splitlines()
    rows = [(i + 1, line) for i, line in enumerate(lines) if line.strip()]
    if len(rows) < 3:
        raise PtsFormatError(path, len(lines) + 1, "file ends before the point block")

    version = _header(path, rows[0][0], rows[0][1], "version")
    n_points = _header(path, rows[1][0], rows[1][1], "n_points")
    if n_points < 0:
        raise PtsFormatError(path, rows[1][0], "n_points must not be negative")
    if rows[2][1].strip() != "{":
        raise PtsFormatError(path, rows[2][0], "expected '{'")

    points : List[Tuple[float, float]] = []
    closed = False
    for lineno, line in rows[3:]:
        if closed:
            raise PtsFormatError(path, lineno, "content after closing '}'")
        if line.strip() == "}":
            if len(points) != n_points:
                raise PtsFormatError(path, lineno, f"n_points is {n_points} but {len(points)} points were read")
            closed = True
            continue
        if len(points) == n_points:
            raise PtsFormatError(path, lineno, f"more than n_points={n_points} points")
        tokens = line.split()
        if len(tokens) != 2:
            raise PtsFormatError(path, lineno, f"expected two coordinates, got {len(tokens)} tokens")
        try:
            x, y = float(tokens[0]), float(tokens[1])
        except ValueError:
            raise PtsFormatError(path, lineno, f"non-numeric coordinate in {line.strip()!r}") from None
        if not (math.isfinite(x) and math.isfinite(y)):
            raise PtsFormatError(path, lineno, "coordinates must be finite")
        points.append((x, y))

    if not closed:
        raise PtsFormatError(path, len(lines) + 1, "missing closing '}'")
    return PtsAnnotation(version = version, n_points = n_points, points = points)


def write_pts(annotation : PtsAnnotation, path : Path) -> Path:
    """Writes an annotation with six decimals per coordinate."""
    body = "".join(f"{x:.6f} {y:.6f}\n" for x, y in annotation.points)
    path.parent.mkdir(parents = True, exist_ok = True)
    path.write_text(
        f"version: {annotation.version}\nn_points: {annotation.n_points}\n{{\n{body}}}\n",
        encoding = "utf-8"
    )
    return path


def select_eyes(annotation : PtsAnnotation, width : int, height : int) -> LandmarkSet:
    """Picks the 12 eye points (1-based 37..48) as local indices 0..11.

    Raises:
        ValueError: If the annotation is not a 68-point markup.
        LandmarkOutOfFrameError: If an eye point lies outside the ``width`` × ``height`` frame.
    """
    if annotation.n_points != FACE_POINTS:
        raise ValueError(f"eye selection needs {FACE_POINTS} points, got {annotation.n_points}")
    points = annotation.as_array()[list(EYE_INDICES)]
    return LandmarkSet(points = points, width = width, height = height)
