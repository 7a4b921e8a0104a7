import argparse
import logging
from pathlib import Path

from app import AppConfig, Command
from core.data.manifest import MANIFEST_NAME, preprocess_raw, summarize, write_manifest
from core.data.synthetic import generate_fixture
from core.errors import EyemarkError
from core.file_model_registory import FileModelRegistry

logger = logging.getLogger(__name__)


class Preprocess(Command):
    """Crops raw annotated images into the model frame and writes the sample manifest.

    Output: ``preprocess/manifest.jsonl``, ``preprocess/original/...png`` and
    ``preprocess/summary.json``. With ``--synthetic N`` the raw fixture itself is
    generated into ``preprocess/raw`` first.
    """
    name = "preprocess"
    help = "crop raw images and write the sample manifest"

    def add_arguments(self, parser : argparse.ArgumentParser):
        source = parser.add_mutually_exclusive_group(required = True)
        source.add_argument("--raw-dir", type = Path, help = "directory of images with .pts/.box sidecars")
        source.add_argument("--synthetic", type = int, metavar = "N", help = "generate N synthetic faces instead")

    def run(self, args : argparse.Namespace, config : AppConfig, registry : FileModelRegistry):
        if args.synthetic is not None:
            if args.synthetic < 1:
                raise EyemarkError("--synthetic needs at least one sample")
            raw_dir = registry.staging / "raw"
            generate_fixture(raw_dir, args.synthetic, config.data.synthetic)
        else:
            raw_dir = args.raw_dir

        records, skipped = preprocess_raw(raw_dir, registry.staging, config.data, config.model.image_size)
        if not records:
            raise EyemarkError(f"no usable samples under {raw_dir} ({skipped} skipped)")

        write_manifest(records, registry.path(MANIFEST_NAME))
        registry.put("summary", summarize(records, skipped = skipped))
        logger.info(f"Wrote {len(records)} records to the manifest")
