"""Architecture and loss ablation grid.

Trains every combination of skip kind × attention × loss on the same data and
collects NME/AUC/FR per cell into one table: one row per architecture, one
column triple per loss.
"""

import csv
import logging
from pathlib import Path
from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from core.data.dataset import LandmarkDataset
from core.errors import TrainingDivergedError
from core.losses import LossKind
from core.metrics import EvalConfig, ced_auc_fr
from core.nn.blocks import SkipKind
from .checkpoint import load_checkpoint
from .network import ModelConfig
from .trainer import TrainConfig, dataset_nmes, train

logger = logging.getLogger(__name__)


class AblationConfig(BaseModel):
    """Axes of the ablation grid.

    Attributes:
        skip_kinds (List[SkipKind]): Hourglass skip junctions to compare.
        attention (List[bool]): Attention settings to compare.
        losses (List[LossKind]): Training losses to compare.
    """
    model_config = ConfigDict(extra = "forbid")

    skip_kinds : List[SkipKind] = Field(default_factory = lambda: ["residual", "dlau"])
    attention : List[bool] = Field(default_factory = lambda: [False, True])
    losses : List[LossKind] = Field(default_factory = lambda: ["mse", "huber", "wing"])

    @field_validator("skip_kinds", "attention", "losses")
    @classmethod
    def _nonempty(cls, value : list, info) -> list:
        if not value:
            raise ValueError(f"ablation.{info.field_name} must not be empty")
        return value


class AblationCell(BaseModel):
    nme : float
    auc : float
    fr : float
    diverged : bool = False


class AblationRow(BaseModel):
    architecture : str
    skip_kind : SkipKind
    attention : bool
    results : Dict[str, AblationCell] = Field(default_factory = dict)


class AblationReport(BaseModel):
    losses : List[str] = Field(default_factory = list)
    rows : List[AblationRow] = Field(default_factory = list)

    def write_csv(self, path : Path) -> Path:
        header = ["architecture"]
        for loss in self.losses:
            header += [f"nme_{loss}", f"auc_{loss}", f"fr_{loss}"]
        with path.open("w", encoding = "utf-8", newline = "") as file:
            writer = csv.writer(file, lineterminator = "\n")
            writer.writerow(header)
            for row in self.rows:
                line = [row.architecture]
                for loss in self.losses:
                    cell = row.results[loss]
                    line += [repr(cell.nme), repr(cell.auc), repr(cell.fr)]
                writer.writerow(line)
        return path


def architecture_label(skip_kind : str, attention : bool) -> str:
    return f"hourglass-{skip_kind}" + ("+attention" if attention else "")


def variant_config(base : ModelConfig, skip_kind : str, attention : bool, loss : str) -> ModelConfig:
    data = base.model_dump()
    data["hourglass"]["skip_kind"] = skip_kind
    data["attention_enabled"] = attention
    data["loss"]["kind"] = loss
    return ModelConfig.model_validate(data)


def run_ablation(
    model_config : ModelConfig,
    train_set : LandmarkDataset,
    train_config : TrainConfig,
    ablation : AblationConfig,
    eval_config : EvalConfig,
    out_dir : Path,
    val_set : Optional[LandmarkDataset] = None
) -> AblationReport:
    """Trains the whole grid; every cell's artifacts go to ``out_dir/<architecture>/<loss>``.

    A diverged cell is reported with ``diverged = true`` and the metrics of its
    last good parameters; the grid carries on.
    """
    scored = val_set if val_set else train_set
    report = AblationReport(losses = list(ablation.losses))
    for attention in ablation.attention:
        for skip_kind in ablation.skip_kinds:
            label = architecture_label(skip_kind, attention)
            row = AblationRow(architecture = label, skip_kind = skip_kind, attention = attention)
            for loss in ablation.losses:
                config = variant_config(model_config, skip_kind, attention, loss)
                cell_dir = out_dir / label / loss
                diverged = False
                try:
                    net = train(config, train_set, train_config, cell_dir, val_set).net
                except TrainingDivergedError as e:
                    logger.error(f"{label}/{loss}: {e}")
                    net, _ = load_checkpoint(e.checkpoint)
                    diverged = True
                summary = ced_auc_fr(
                    dataset_nmes(net, scored, train_config.batch_size),
                    threshold = eval_config.threshold, ced_max = eval_config.ced_max, ced_steps = eval_config.ced_steps
                )
                row.results[loss] = AblationCell(
                    nme = summary.nme_mean, auc = summary.auc_0_05, fr = summary.fr_0_05, diverged = diverged
                )
                logger.info(f"{label}/{loss}: nme={summary.nme_mean:.5f} auc={summary.auc_0_05:.4f} fr={summary.fr_0_05:.4f}")
            report.rows.append(row)
    return report
