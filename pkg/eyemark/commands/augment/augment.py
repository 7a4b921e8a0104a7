import argparse
import logging
from pathlib import Path

from app import AppConfig, Command
from core.data.manifest import MANIFEST_NAME, augment_records, read_manifest, write_manifest
from core.errors import EyemarkError
from core.file_model_registory import FileModelRegistry

logger = logging.getLogger(__name__)


class Augment(Command):
    """Expands a preprocess manifest with mirrored, rotated and blurred copies.

    Output: ``augment/manifest.jsonl``, the images under ``augment/<tag>/``,
    and the per-category, per-group count table as ``summary.json`` and ``summary.csv``.
    """
    name = "augment"
    help = "add mirrored, rotated and blurred copies of every sample"

    def add_arguments(self, parser : argparse.ArgumentParser):
        parser.add_argument("--manifest", type = Path, help = "input manifest (default: <out-dir>/preprocess/manifest.jsonl)")

    def run(self, args : argparse.Namespace, config : AppConfig, registry : FileModelRegistry):
        manifest = args.manifest or self.artifact(config, "preprocess", MANIFEST_NAME)
        records = read_manifest(manifest)

        augmented, summary = augment_records(records, manifest.parent, registry.staging, config.data)
        if not augmented:
            raise EyemarkError(f"augmentation of {manifest} produced no records")

        write_manifest(augmented, registry.path(MANIFEST_NAME))
        registry.put("summary", summary)
        summary.write_csv(registry.path("summary.csv"))
        for row in summary.rows():
            logger.info("  ".join(str(cell) for cell in row))
