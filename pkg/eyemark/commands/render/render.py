import argparse
import logging
from pathlib import Path

from app import AppConfig, Command
from core.data.dataset import LandmarkDataset
from core.data.manifest import MANIFEST_NAME, read_manifest
from core.errors import EyemarkError
from core.file_model_registory import FileModelRegistry
from core.heatmap import encode_gt, render_overlay
from core.model import load_checkpoint

logger = logging.getLogger(__name__)


class Render(Command):
    """Writes heatmap overlays of predicted (or ground-truth) maps.

    Output: ``render/<image path of the record>``, one 8-bit RGB PNG per record.
    """
    name = "render"
    help = "draw heatmap overlays on the manifest images"

    def add_arguments(self, parser : argparse.ArgumentParser):
        parser.add_argument("--checkpoint", type = Path, help = "checkpoint directory (default: <out-dir>/train)")
        parser.add_argument("--manifest", type = Path, help = "manifest (default: <out-dir>/preprocess/manifest.jsonl)")
        parser.add_argument("--limit", type = int, default = 16, help = "number of records to draw (default: 16)")
        parser.add_argument("--ground-truth", action = "store_true", help = "draw the encoded ground truth instead of predictions")

    def run(self, args : argparse.Namespace, config : AppConfig, registry : FileModelRegistry):
        if args.limit < 1:
            raise EyemarkError("--limit must be at least 1")
        manifest = args.manifest or self.artifact(config, "preprocess", MANIFEST_NAME)
        records = read_manifest(manifest)[:args.limit]
        dataset = LandmarkDataset.from_records(records, manifest.parent)

        if args.ground_truth:
            maps = [
                encode_gt(r.landmarks(), r.height // 4, r.width // 4, config.data.sigma).maps
                for r in records
            ]
        else:
            net, _ = load_checkpoint(args.checkpoint or self.artifact(config, "train"))
            _, maps = net.predict_heatmaps(dataset.images, config.train.batch_size)

        for record, image, heat in zip(records, dataset.images, maps):
            render_overlay(image.transpose(1, 2, 0), heat, registry.path(Path(record.image).with_suffix(".png").as_posix()))
        logger.info(f"Rendered {len(records)} overlays")
