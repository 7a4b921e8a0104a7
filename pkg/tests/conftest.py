import sys
from pathlib import Path

import numpy as np
import pytest

# Modules inside eyemark/ import each other by top-level name.
sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "eyemark"))

from core.data.dataset import LandmarkDataset  # noqa: E402
from core.data.geometry import FaceBox  # noqa: E402
from core.data.manifest import SampleRecord  # noqa: E402
from core.data.synthetic import SyntheticConfig, generate_fixture  # noqa: E402
from core.landmarks import LandmarkSet  # noqa: E402
from core.model.network import ModelConfig  # noqa: E402
from core.nn.blocks import HourglassConfig  # noqa: E402
from core.tensor import ops  # noqa: E402


def pytest_addoption(parser):
    parser.addoption("--runslow", action = "store_true", default = False, help = "run desk-scale training tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: desk-scale training run, needs --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason = "needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def weighted_sum():
    """Scalar projection sum(x * weights) used to reduce outputs for gradient checks."""
    def project(x, weights):
        return ops.sum_all(ops.multiply(x, ops.constant(weights)))
    return project


@pytest.fixture
def tiny_model():
    """Smallest network that exercises every block: 32px input, 8x8 heatmaps."""
    return ModelConfig(
        stages = 2,
        image_size = 32,
        hourglass = HourglassConfig(depth = 2, width = 8),
        seed = 3,
    )


@pytest.fixture
def landmarks64():
    xs = np.linspace(8.5, 52.5, 6)
    points = np.stack([np.concatenate([xs, xs]), np.repeat([20.25, 40.75], 6)], axis = 1)
    return LandmarkSet(points = points, width = 64, height = 64)


@pytest.fixture
def synthetic_raw(tmp_path):
    raw = tmp_path / "raw"
    generate_fixture(raw, 4, SyntheticConfig(size = 96, seed = 7))
    return raw


EYE_TEMPLATE = np.array([
    [8, 16], [10, 14], [12, 14], [14, 16], [12, 18], [10, 18],
    [18, 16], [20, 14], [22, 14], [24, 16], [22, 18], [20, 18],
], dtype = np.float64)


@pytest.fixture
def tiny_dataset():
    """Four random 32px samples with jittered eye-shaped targets."""
    rng = np.random.default_rng(99)
    records, coords = [], []
    for i in range(4):
        points = EYE_TEMPLATE + rng.uniform(-1.0, 1.0, size = EYE_TEMPLATE.shape)
        records.append(SampleRecord(
            image = f"original/s{i}.png", source = f"s{i}", box = FaceBox(x = 0, y = 0, w = 32, h = 32),
            points = [tuple(p) for p in points.tolist()], width = 32, height = 32,
        ))
        coords.append(points / 32.0)
    return LandmarkDataset(images = rng.uniform(size = (4, 3, 32, 32)), coords = np.stack(coords), records = records)
