import argparse
import logging
from pathlib import Path
from typing import Optional, Tuple

from app import AppConfig, Command
from core.data.dataset import LandmarkDataset
from core.data.manifest import MANIFEST_NAME, split_by_source
from core.errors import TrainingDivergedError
from core.file_model_registory import FileModelRegistry
from core.model import run_ablation, train
from core.model.checkpoint import MANIFEST_NAME as CHECKPOINT_NAME

logger = logging.getLogger(__name__)


class Train(Command):
    """Trains the network, or the whole ablation grid with ``--ablation``.

    Output: ``train/checkpoint.json``, ``train/checkpoint.bin`` and
    ``train/metrics.csv``; for the grid, ``train/ablation.json``,
    ``train/ablation.csv`` and one such directory per cell under
    ``train/<architecture>/<loss>/``.
    """
    name = "train"
    help = "train the network on a manifest"

    def add_arguments(self, parser : argparse.ArgumentParser):
        parser.add_argument("--manifest", type = Path, help = "training manifest (default: augment, else preprocess output)")
        parser.add_argument("--val-manifest", type = Path, help = "validation manifest (default: hold out data.val_fraction of the sources)")
        parser.add_argument("--ablation", action = "store_true", help = "train every skip kind x attention x loss combination")

    def _default_manifest(self, config : AppConfig) -> Path:
        augmented = self.artifact(config, "augment", MANIFEST_NAME)
        return augmented if augmented.exists() else self.artifact(config, "preprocess", MANIFEST_NAME)

    def _datasets(self, args : argparse.Namespace, config : AppConfig) -> Tuple[LandmarkDataset, Optional[LandmarkDataset]]:
        dataset = LandmarkDataset.from_manifest(args.manifest or self._default_manifest(config))
        if args.val_manifest is not None:
            return dataset, LandmarkDataset.from_manifest(args.val_manifest)

        _, held_out = split_by_source(dataset.records, config.data.val_fraction, config.model.seed)
        if not held_out:
            return dataset, None
        held = {r.source for r in held_out}
        train_idx = [i for i, r in enumerate(dataset.records) if r.source not in held]
        val_idx = [i for i, r in enumerate(dataset.records) if r.source in held]
        logger.info(f"Held out {len(held)} sources ({len(val_idx)} records) for validation")
        return dataset.subset(train_idx), dataset.subset(val_idx)

    def run(self, args : argparse.Namespace, config : AppConfig, registry : FileModelRegistry):
        train_set, val_set = self._datasets(args, config)

        if args.ablation:
            report = run_ablation(
                config.model, train_set, config.train, config.ablation, config.eval, registry.staging, val_set
            )
            registry.put("ablation", report)
            report.write_csv(registry.path("ablation.csv"))
            return

        try:
            result = train(config.model, train_set, config.train, registry.staging, val_set)
        except TrainingDivergedError as e:
            # report the path the checkpoint has after commit
            raise TrainingDivergedError(e.epoch, e.loss, registry.final / CHECKPOINT_NAME, e.reason) from e
        if result.history:
            final = result.final
            logger.info(f"Finished after epoch {final.epoch}: loss={final.loss:.6g} val_nme={final.val_nme:.6g}")
