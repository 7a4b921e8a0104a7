import argparse
import logging
from pathlib import Path
from typing import Any, Dict, List

import numpy as np

from app import AppConfig, Command
from core.data.dataset import LandmarkDataset
from core.data.manifest import MANIFEST_NAME, SampleRecord, read_manifest
from core.errors import EyemarkError
from core.file_model_registory import FileModelRegistry
from core.json_bound_model import JSONBoundModel
from core.metrics import PredictionSet, evaluate_predictions, plot_ced, plot_nme
from core.model import load_checkpoint

logger = logging.getLogger(__name__)


class Eval(Command):
    """Scores a checkpoint (or a predictions file) against a manifest.

    Output: ``eval/report.json`` with NME, AUC and FR overall and per group,
    ``eval/ced.png`` and ``eval/nme.png``.
    """
    name = "eval"
    help = "compute NME, CED, AUC and FR"

    def add_arguments(self, parser : argparse.ArgumentParser):
        source = parser.add_mutually_exclusive_group()
        source.add_argument("--checkpoint", type = Path, help = "checkpoint directory (default: <out-dir>/train)")
        source.add_argument("--predictions", type = Path, help = "predictions.json written by infer")
        parser.add_argument("--manifest", type = Path, help = "ground-truth manifest (default: <out-dir>/preprocess/manifest.jsonl)")
        parser.add_argument("--threshold", type = float, help = "NME threshold of AUC and FR")

    def config_overrides(self, args : argparse.Namespace) -> Dict[str, Any]:
        return {"eval.threshold": args.threshold} if args.threshold is not None else {}

    def _from_predictions(self, path : Path, records : List[SampleRecord]) -> List[np.ndarray]:
        bound = JSONBoundModel(path, PredictionSet)
        bound.load(required = True)
        predicted = []
        for record in records:
            entry = bound.data.predictions.get(record.image)
            if entry is None:
                raise EyemarkError(f"{path}: no prediction for {record.image}")
            if (entry.width, entry.height) != (record.width, record.height):
                raise EyemarkError(
                    f"{path}: prediction for {record.image} is in a {entry.width}x{entry.height} frame, "
                    f"expected {record.width}x{record.height}"
                )
            predicted.append(np.asarray(entry.points, dtype = np.float64))
        return predicted

    def run(self, args : argparse.Namespace, config : AppConfig, registry : FileModelRegistry):
        manifest = args.manifest or self.artifact(config, "preprocess", MANIFEST_NAME)
        records = read_manifest(manifest)
        if not records:
            raise EyemarkError(f"{manifest} holds no records")

        if args.predictions is not None:
            predicted = self._from_predictions(args.predictions, records)
        else:
            net, _ = load_checkpoint(args.checkpoint or self.artifact(config, "train"))
            dataset = LandmarkDataset.from_records(records, manifest.parent)
            predicted = list(dataset.pixel_points(net.predict(dataset.images, config.train.batch_size)))

        truth = [record.landmarks() for record in records]
        report = evaluate_predictions(truth, predicted, config.eval, [r.group for r in records])
        registry.put("report", report)
        plot_ced(report, registry.path("ced.png"))
        plot_nme(report, registry.path("nme.png"))
        logger.info(
            f"n={report.n} excluded={report.excluded} nme={report.nme_mean:.5f} "
            f"auc@{report.threshold}={report.auc_0_05:.4f} fr@{report.threshold}={report.fr_0_05:.4f}"
        )
