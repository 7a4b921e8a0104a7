"""Training loop: per-stage supervised coordinate loss minimized with RMSprop."""

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from core.data.dataset import LandmarkDataset
from core.errors import DegenerateAnnotationError, NonFiniteGradientError, TrainingDivergedError
from core.losses import loss_from_config, stage_loss
from core.metrics import nme
from core.tensor import Graph
from .checkpoint import save_checkpoint
from .network import EyeLandmarkNet, ModelConfig
from .optimizer import OptimizerConfig, OptimizerState, apply_rmsprop

logger = logging.getLogger(__name__)

METRICS_NAME = "metrics.csv"
METRICS_HEADER = ("epoch", "loss", "val_nme")


class TrainConfig(BaseModel):
    """Configuration of a training run.

    Attributes:
        epochs (int): Number of passes over the training set.
        batch_size (int): Samples per RMSprop step.
        optimizer (OptimizerConfig): RMSprop hyperparameters.
        divergence_threshold (float): Halt once a batch loss exceeds this value.
        target_loss (Optional[float]): Stop early once the epoch mean loss falls below it.
    """
    model_config = ConfigDict(extra = "forbid")

    epochs : int = 50
    batch_size : int = 8
    optimizer : OptimizerConfig = Field(default_factory = OptimizerConfig)
    divergence_threshold : float = 1e3
    target_loss : Optional[float] = None

    @field_validator("epochs", "batch_size")
    @classmethod
    def _positive(cls, value : int, info) -> int:
        if value < 1:
            raise ValueError(f"train.{info.field_name} must be at least 1")
        return value


class EpochMetrics(BaseModel):
    epoch : int
    loss : float
    val_nme : float


@dataclass
class TrainingResult:
    net : EyeLandmarkNet
    history : List[EpochMetrics] = field(default_factory = list)
    checkpoint : Optional[Path] = None
    metrics_path : Optional[Path] = None

    @property
    def final(self) -> EpochMetrics:
        return self.history[-1]


def dataset_nmes(net : EyeLandmarkNet, dataset : LandmarkDataset, batch_size : int = 8) -> np.ndarray:
    """Per-sample NME of the network on a dataset, in each record's pixel frame."""
    predicted = dataset.pixel_points(net.predict(dataset.images, batch_size))
    truth = dataset.pixel_points(dataset.coords)
    values = []
    for g, p in zip(truth, predicted):
        try:
            values.append(nme(g, p))
        except DegenerateAnnotationError:
            continue
    return np.asarray(values)


def write_metrics(history : List[EpochMetrics], path : Path) -> Path:
    with path.open("w", encoding = "utf-8", newline = "") as file:
        writer = csv.writer(file, lineterminator = "\n")
        writer.writerow(METRICS_HEADER)
        for row in history:
            writer.writerow([row.epoch, repr(row.loss), repr(row.val_nme)])
    return path


def train(
    model_config : ModelConfig,
    train_set : LandmarkDataset,
    config : TrainConfig,
    out_dir : Path,
    val_set : Optional[LandmarkDataset] = None
) -> TrainingResult:
    """Trains a freshly initialized network.

    Batch order in epoch ``e`` is a permutation drawn from ``(model.seed, e)``, so a
    fixed seed reproduces the whole parameter trajectory. After the run
    ``out_dir`` holds ``checkpoint.json``, ``checkpoint.bin`` and ``metrics.csv``.

    Args:
        model_config (ModelConfig): Network to build.
        train_set (LandmarkDataset): Training samples; must not be empty.
        config (TrainConfig): Loop settings.
        out_dir (Path): Artifact directory.
        val_set (Optional[LandmarkDataset]): Samples for the per-epoch validation NME.

    Returns:
        TrainingResult: Trained network, per-epoch metrics and artifact paths.

    Raises:
        TrainingDivergedError: If a loss exceeds ``divergence_threshold`` or turns
            non-finite, or a gradient turns non-finite. The last good parameters are
            saved to ``out_dir`` first.
    """
    if train_set.image_size != model_config.image_size:
        raise ValueError(
            f"dataset images are {train_set.image_size}px but model.image_size is {model_config.image_size}"
        )
    out_dir.mkdir(parents = True, exist_ok = True)
    net = EyeLandmarkNet(model_config)
    state = OptimizerState.from_config(config.optimizer)
    loss_fn = loss_from_config(model_config.loss)
    result = TrainingResult(net = net, metrics_path = out_dir / "metrics.csv")
    last_good = (0, net.params.state())

    logger.info(
        f"Training {net.params.count()} parameters on {len(train_set)} samples "
        f"for {config.epochs} epochs (batch {config.batch_size})"
    )

    for epoch in range(1, config.epochs + 1):
        rng = np.random.default_rng([model_config.seed, epoch])
        total, seen = 0.0, 0
        for batch in train_set.batches(config.batch_size, rng):
            try:
                with Graph() as graph:
                    output = net.forward(train_set.images[batch], training = True)
                    loss = stage_loss(loss_fn, train_set.coords[batch], output.stage_coords)
                    graph.backward(loss)
                value = loss.item()
                if not math.isfinite(value) or value > config.divergence_threshold:
                    raise _halt(net, last_good, result, out_dir, epoch, value, "loss above the divergence threshold")
                state = apply_rmsprop(net.params, state)
            except NonFiniteGradientError as e:
                raise _halt(net, last_good, result, out_dir, epoch, float("nan"), str(e)) from e
            finally:
                net.params.zero_grad()
            total += value * len(batch)
            seen += len(batch)

        epoch_loss = total / seen
        val_nme = float(dataset_nmes(net, val_set, config.batch_size).mean()) if val_set else float("nan")
        result.history.append(EpochMetrics(epoch = epoch, loss = epoch_loss, val_nme = val_nme))
        logger.info(f"epoch {epoch}: loss={epoch_loss:.6g} val_nme={val_nme:.6g}")
        last_good = (epoch, net.params.state())

        if config.target_loss is not None and epoch_loss < config.target_loss:
            logger.info(f"Reached target loss {config.target_loss} at epoch {epoch}")
            break

    epochs_done = result.history[-1].epoch if result.history else 0
    result.checkpoint = save_checkpoint(net, out_dir, epochs_done)
    write_metrics(result.history, result.metrics_path)
    return result


def _halt(net, last_good, result, out_dir, epoch, value, reason) -> TrainingDivergedError:
    good_epoch, (params, buffers) = last_good
    net.params.load(params, buffers)
    checkpoint = save_checkpoint(net, out_dir, good_epoch)
    write_metrics(result.history, result.metrics_path)
    logger.error(f"Training halted at epoch {epoch}: {reason}; restored epoch {good_epoch}")
    result.checkpoint = checkpoint
    return TrainingDivergedError(epoch, value, checkpoint, reason)
