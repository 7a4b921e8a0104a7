"""In-memory training data assembled from a manifest."""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, List, Sequence

import numpy as np

from core.data.images import read_image, to_chw
from core.data.manifest import SampleRecord, read_manifest
from core.errors import EyemarkError, ShapeError

logger = logging.getLogger(__name__)


@dataclass
class LandmarkDataset:
    """Images and normalized landmark targets.

    Attributes:
        images (np.ndarray): [N, 3, S, S] float64 in [0, 1].
        coords (np.ndarray): [N, 12, 2] landmarks divided by the frame extent.
        records (List[SampleRecord]): Manifest records, in the same order.
    """
    images : np.ndarray
    coords : np.ndarray
    records : List[SampleRecord]

    def __len__(self) -> int:
        return len(self.records)

    @property
    def image_size(self) -> int:
        return self.images.shape[-1]

    @classmethod
    def from_records(cls, records : Sequence[SampleRecord], root : Path) -> "LandmarkDataset":
        """Loads every record's image from ``root / record.image``.

        Raises:
            EyemarkError: If the records are empty or their frames differ in size.
            OSError: If an image cannot be read.
        """
        if not records:
            raise EyemarkError("dataset is empty")
        images, coords = [], []
        for record in records:
            image = read_image(root / record.image)
            if image.shape[:2] != (record.height, record.width):
                raise ShapeError("dataset", image.shape[:2], (record.height, record.width), detail = record.image)
            images.append(to_chw(image))
            coords.append(record.landmarks().normalized())
        shapes = {im.shape for im in images}
        if len(shapes) != 1:
            raise EyemarkError(f"images differ in size: {sorted(shapes)}")
        return cls(images = np.stack(images), coords = np.stack(coords), records = list(records))

    @classmethod
    def from_manifest(cls, path : Path) -> "LandmarkDataset":
        path = Path(path)
        dataset = cls.from_records(read_manifest(path), path.parent)
        logger.info(f"Loaded {len(dataset)} samples from {path}")
        return dataset

    def subset(self, indices : Sequence[int]) -> "LandmarkDataset":
        idx = np.asarray(indices, dtype = np.int64)
        return LandmarkDataset(
            images = self.images[idx], coords = self.coords[idx],
            records = [self.records[i] for i in idx]
        )

    def batches(self, batch_size : int, rng : np.random.Generator) -> Iterator[np.ndarray]:
        """Shuffled index batches covering every sample once; the last one may be shorter."""
        order = rng.permutation(len(self))
        for start in range(0, len(order), batch_size):
            yield order[start:start + batch_size]

    def pixel_points(self, coords : np.ndarray) -> np.ndarray:
        """Normalized [N, 12, 2] coordinates back to each record's pixel frame."""
        extent = np.asarray([[r.width, r.height] for r in self.records], dtype = np.float64)
        return coords * extent[:, None, :]
