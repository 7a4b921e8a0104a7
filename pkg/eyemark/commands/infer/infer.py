import argparse
import logging
from pathlib import Path
from typing import Iterator, List, Tuple

import numpy as np

from app import AppConfig, Command
from core.data.geometry import FaceBox, crop_to_box, read_box
from core.data.images import read_image, to_chw
from core.data.manifest import MANIFEST_NAME, discover_raw, read_manifest
from core.errors import EyemarkError
from core.file_model_registory import FileModelRegistry
from core.metrics import Prediction, PredictionSet
from core.model import load_checkpoint

logger = logging.getLogger(__name__)


def _frame_box(path : Path, image : np.ndarray) -> FaceBox:
    sidecar = path.with_suffix(".box")
    if sidecar.exists():
        return read_box(sidecar)
    height, width = image.shape[:2]
    return FaceBox(x = 0, y = 0, w = width, h = height)


def to_frame(coords : np.ndarray, box : FaceBox, width : int, height : int) -> np.ndarray:
    """Maps normalized crop coordinates [12, 2] back into the image frame."""
    points = np.empty_like(coords)
    points[:, 0] = box.x + coords[:, 0] * box.w
    points[:, 1] = box.y + coords[:, 1] * box.h
    points[:, 0] = np.clip(points[:, 0], 0.0, np.nextafter(float(width), 0.0))
    points[:, 1] = np.clip(points[:, 1], 0.0, np.nextafter(float(height), 0.0))
    return points


class Infer(Command):
    """Predicts the 12 eye landmarks of every input image.

    Images are cropped to their ``.box`` sidecar when one exists (the whole
    frame otherwise) and resized to the model input. Output:
    ``infer/predictions.json`` with points in each input image's own frame.
    """
    name = "infer"
    help = "predict eye landmarks for a directory of images or a manifest"

    def add_arguments(self, parser : argparse.ArgumentParser):
        source = parser.add_mutually_exclusive_group()
        source.add_argument("--images", type = Path, help = "directory of images")
        source.add_argument("--manifest", type = Path, help = "manifest (default: <out-dir>/preprocess/manifest.jsonl)")
        parser.add_argument("--checkpoint", type = Path, help = "checkpoint directory (default: <out-dir>/train)")

    def _entries(self, args : argparse.Namespace, config : AppConfig) -> Iterator[Tuple[str, Path]]:
        if args.images is not None:
            for path in discover_raw(args.images):
                yield path.relative_to(args.images).as_posix(), path
            return
        manifest = args.manifest or self.artifact(config, "preprocess", MANIFEST_NAME)
        for record in read_manifest(manifest):
            yield record.image, manifest.parent / record.image

    def run(self, args : argparse.Namespace, config : AppConfig, registry : FileModelRegistry):
        checkpoint = args.checkpoint or self.artifact(config, "train")
        net, _ = load_checkpoint(checkpoint)
        size = net.config.image_size
        batch_size = config.train.batch_size

        result = PredictionSet(checkpoint = Path(checkpoint).as_posix())
        pending : List[Tuple[str, FaceBox, int, int]] = []
        crops : List[np.ndarray] = []

        def flush():
            coords = net.predict(np.stack(crops), batch_size)
            for (key, box, width, height), c in zip(pending, coords):
                points = to_frame(c, box, width, height)
                result.predictions[key] = Prediction(
                    points = [tuple(p) for p in points.tolist()], width = width, height = height
                )
            pending.clear()
            crops.clear()

        for key, path in self._entries(args, config):
            image = read_image(path)
            height, width = image.shape[:2]
            box = _frame_box(path, image)
            crops.append(to_chw(crop_to_box(image, box, size)))
            pending.append((key, box, width, height))
            if len(crops) == batch_size:
                flush()
        if crops:
            flush()

        if not result.predictions:
            raise EyemarkError("no input images")
        registry.put("predictions", result)
        logger.info(f"Predicted landmarks for {len(result.predictions)} images")
