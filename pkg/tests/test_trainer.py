import csv
import math

import numpy as np
import pytest

from core.data.dataset import LandmarkDataset
from core.data.geometry import FaceBox
from core.data.images import to_chw
from core.data.manifest import SampleRecord
from core.data.pts import PtsAnnotation, select_eyes
from core.data.synthetic import SyntheticConfig, generate_sample
from core.errors import TrainingDivergedError
from core.model import (
    AblationConfig, EyeLandmarkNet, ModelConfig, OptimizerConfig, TrainConfig,
    load_checkpoint, run_ablation, train,
)
from core.metrics import EvalConfig
from core.model.trainer import dataset_nmes
from core.nn import HourglassConfig


def read_metrics(path):
    with path.open(encoding = "utf-8") as file:
        return list(csv.reader(file))


class TestTrain:
    def test_writes_checkpoint_and_metrics(self, tiny_model, tiny_dataset, tmp_path):
        result = train(tiny_model, tiny_dataset.subset([0, 1, 2]), TrainConfig(epochs = 2, batch_size = 2), tmp_path,
                       val_set = tiny_dataset.subset([3]))
        rows = read_metrics(result.metrics_path)
        assert rows[0] == ["epoch", "loss", "val_nme"]
        assert [r[0] for r in rows[1:]] == ["1", "2"]
        assert all(math.isfinite(float(r[1])) and float(r[2]) >= 0 for r in rows[1:])
        _, manifest = load_checkpoint(result.checkpoint)
        assert manifest.epoch == 2

    def test_same_seed_same_trajectory(self, tiny_model, tiny_dataset, tmp_path):
        config = TrainConfig(epochs = 2, batch_size = 3)
        a = train(tiny_model, tiny_dataset, config, tmp_path / "a")
        b = train(tiny_model, tiny_dataset, config, tmp_path / "b")
        assert [h.loss for h in a.history] == [h.loss for h in b.history]
        assert (tmp_path / "a" / "checkpoint.bin").read_bytes() == (tmp_path / "b" / "checkpoint.bin").read_bytes()

    def test_zero_learning_rate_freezes_loss(self, tiny_model, tiny_dataset, tmp_path):
        config = TrainConfig(epochs = 3, batch_size = 4, optimizer = OptimizerConfig(lr = 0.0))
        result = train(tiny_model, tiny_dataset, config, tmp_path)
        losses = [h.loss for h in result.history]
        # one batch per epoch; only the batch-norm running statistics move
        assert losses == pytest.approx([losses[0]] * 3, rel = 1e-12)
        initial, _ = EyeLandmarkNet(tiny_model).params.state()
        trained, _ = result.net.params.state()
        for name, value in initial.items():
            np.testing.assert_array_equal(trained[name], value)

    def test_divergence_keeps_last_good_parameters(self, tiny_model, tiny_dataset, tmp_path):
        config = TrainConfig(epochs = 3, batch_size = 4, divergence_threshold = 1e-12)
        with pytest.raises(TrainingDivergedError) as excinfo:
            train(tiny_model, tiny_dataset, config, tmp_path)
        error = excinfo.value
        assert error.epoch == 1 and error.loss > 1e-12
        net, manifest = load_checkpoint(error.checkpoint)
        assert manifest.epoch == 0
        initial, _ = EyeLandmarkNet(tiny_model).params.state()
        for name, value in net.params.state()[0].items():
            np.testing.assert_array_equal(value, initial[name])
        assert read_metrics(tmp_path / "metrics.csv") == [["epoch", "loss", "val_nme"]]

    def test_target_loss_stops_early(self, tiny_model, tiny_dataset, tmp_path):
        result = train(tiny_model, tiny_dataset, TrainConfig(epochs = 5, batch_size = 4, target_loss = 1e9), tmp_path)
        assert len(result.history) == 1

    def test_image_size_mismatch(self, tiny_dataset, tmp_path):
        config = ModelConfig(image_size = 64, hourglass = HourglassConfig(depth = 2, width = 8))
        with pytest.raises(ValueError, match = "image_size"):
            train(config, tiny_dataset, TrainConfig(epochs = 1), tmp_path)


def test_ablation_grid(tiny_dataset, tmp_path):
    model = ModelConfig(stages = 1, image_size = 32, hourglass = HourglassConfig(depth = 1, width = 4))
    ablation = AblationConfig(losses = ["mse", "wing"])
    report = run_ablation(model, tiny_dataset, TrainConfig(epochs = 1, batch_size = 4), ablation, EvalConfig(), tmp_path)
    labels = [row.architecture for row in report.rows]
    assert labels == [
        "hourglass-residual", "hourglass-dlau", "hourglass-residual+attention", "hourglass-dlau+attention",
    ]
    for row in report.rows:
        assert set(row.results) == {"mse", "wing"}
        for cell in row.results.values():
            assert 0 <= cell.auc <= 1 and 0 <= cell.fr <= 1 and not cell.diverged
    assert (tmp_path / "hourglass-dlau+attention" / "wing" / "checkpoint.json").exists()
    header = report.write_csv(tmp_path / "ablation.csv").read_text(encoding = "utf-8").splitlines()[0]
    assert header == "architecture,nme_mse,auc_mse,fr_mse,nme_wing,auc_wing,fr_wing"


def synthetic_set(indices, seed = 1):
    """Synthetic faces drawn straight at 64px, the full frame as face box."""
    config = SyntheticConfig(size = 64, seed = seed)
    images, coords, records = [], [], []
    for i in indices:
        image, points68 = generate_sample(i, config)
        landmarks = select_eyes(PtsAnnotation(points = [tuple(p) for p in points68.tolist()]), 64, 64)
        records.append(SampleRecord(
            image = f"synth_{i:04d}.png", source = f"synth_{i:04d}", box = FaceBox(x = 0, y = 0, w = 64, h = 64),
            points = [tuple(p) for p in landmarks.points.tolist()], width = 64, height = 64,
        ))
        images.append(to_chw(image / 255.0))
        coords.append(landmarks.normalized())
    return LandmarkDataset(images = np.stack(images), coords = np.stack(coords), records = records)


def desk_model(**update):
    return ModelConfig(stages = 1, image_size = 64, hourglass = HourglassConfig(depth = 3, width = 32), **update)


@pytest.mark.slow
def test_overfits_single_sample(tmp_path):
    """One synthetic face, many epochs: the loss must fall tenfold."""
    data = synthetic_set([0])
    model = ModelConfig(stages = 1, image_size = 64, hourglass = HourglassConfig(depth = 2, width = 16), loss = {"kind": "mse"})
    config = TrainConfig(epochs = 150, batch_size = 1, optimizer = OptimizerConfig(lr = 2.5e-3))
    result = train(model, data, config, tmp_path)
    assert result.final.loss < result.history[0].loss / 10


@pytest.mark.slow
def test_overfits_sixteen_samples(tmp_path):
    data = synthetic_set(range(16))
    # one batch per epoch keeps the running statistics equal to the batch statistics
    config = TrainConfig(epochs = 1000, batch_size = 16, target_loss = 1e-6, optimizer = OptimizerConfig(lr = 2.5e-3))
    result = train(desk_model(loss = {"kind": "mse"}), data, config, tmp_path)
    assert dataset_nmes(result.net, data).mean() < 0.01


@pytest.mark.slow
def test_learns_synthetic_fixture(tmp_path):
    train_set, val_set = synthetic_set(range(200)), synthetic_set(range(200, 250))
    config = TrainConfig(epochs = 30, batch_size = 8, optimizer = OptimizerConfig(lr = 1e-3))
    result = train(desk_model(), train_set, config, tmp_path, val_set = val_set)
    assert result.final.val_nme < 0.05
    assert dataset_nmes(result.net, val_set).mean() == pytest.approx(result.final.val_nme)
