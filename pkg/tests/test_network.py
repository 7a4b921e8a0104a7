import numpy as np
import pytest

from core.losses import LossConfig, loss_from_config, stage_loss
from core.model import EyeLandmarkNet, ModelConfig
from core.nn import HourglassConfig
from core.tensor import Graph
from core.tensor.gradcheck import check_gradients


def small_net(stages = 1, skip_kind = "dlau", attention_enabled = True):
    return EyeLandmarkNet(ModelConfig(
        stages = stages,
        image_size = 32,
        hourglass = HourglassConfig(depth = 2, width = 8, skip_kind = skip_kind),
        attention_enabled = attention_enabled,
        loss = LossConfig(kind = "mse"),
        seed = 5,
    ))


def training_loss(net, images, targets):
    loss_fn = loss_from_config(net.config.loss)
    return lambda: stage_loss(loss_fn, targets, net.forward(images, training = True).stage_coords)


def test_full_model_gradcheck(rng):
    net = small_net()
    images = rng.uniform(size = (2, 3, 32, 32))
    targets = rng.uniform(0.2, 0.8, size = (2, 12, 2))
    params = [t for _, t in net.params.items()]
    errors = check_gradients(training_loss(net, images, targets), params, eps = 1e-6, max_entries = 3)
    worst = max(errors, key = errors.get)
    assert errors[worst] < 1e-4, (worst, errors[worst])


@pytest.mark.parametrize("skip_kind", ["residual", "dlau"])
@pytest.mark.parametrize("attention_enabled", [True, False])
def test_every_parameter_receives_gradient(rng, skip_kind, attention_enabled):
    net = small_net(stages = 2, skip_kind = skip_kind, attention_enabled = attention_enabled)
    images = rng.uniform(size = (2, 3, 32, 32))
    targets = rng.uniform(0.2, 0.8, size = (2, 12, 2))
    with Graph() as graph:
        graph.backward(training_loss(net, images, targets)())
    silent = [name for name, t in net.params.items() if t.grad is None or not np.any(t.grad)]
    assert silent == []
