"""The stacked eye-landmark network.

Layout::

    image -> stem -> [hourglass -> attention (or 1×1 head) -> decode] × stages

Between stages the next input is ``x + h + remap(F')`` where ``x`` is the stage
input, ``h`` the hourglass output and ``F'`` the 12-channel stage output.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from core.attention import AttentionConfig, attention_forward, declare_attention
from core.errors import ParamsMismatchError, ShapeError
from core.heatmap import probability_maps, soft_argmax_decode
from core.landmarks import NUM_LANDMARKS
from core.losses import LossConfig
from core.nn import (
    HourglassConfig, ParamScope, ParamStore,
    declare_hourglass, declare_stem, hourglass_forward, stem_forward,
)
from core.tensor import Tensor, ops

logger = logging.getLogger(__name__)


class ModelConfig(BaseModel):
    """Configuration schema for EyeLandmarkNet

    Attributes:
        stages (int): Number of stacked hourglass stages.
        image_size (int): Square input extent; heatmaps are a quarter of it.
        hourglass (HourglassConfig): Shared configuration of every hourglass.
        attention (AttentionConfig): Configuration of every attention block.
        attention_enabled (bool): Attention blocks between stages, or plain 1×1 heads.
        norm_enabled (bool): Batch normalization, or per-channel biases in its place.
        loss (LossConfig): Training loss.
        seed (int): Parameter initialization seed.
    """
    model_config = ConfigDict(extra = "forbid")

    stages : int = 3
    image_size : int = 256
    hourglass : HourglassConfig = Field(default_factory = HourglassConfig)
    attention : AttentionConfig = Field(default_factory = AttentionConfig)
    attention_enabled : bool = True
    norm_enabled : bool = True
    loss : LossConfig = Field(default_factory = LossConfig)
    seed : int = 0

    @field_validator("stages")
    @classmethod
    def _stages_positive(cls, value : int) -> int:
        if value < 1:
            raise ValueError("model.stages must be at least 1")
        return value

    @model_validator(mode = "after")
    def _check_extents(self) -> "ModelConfig":
        factor = 4 * 2 ** self.hourglass.depth
        if self.image_size % factor:
            raise ValueError(
                f"model.image_size={self.image_size} must be divisible by {factor} "
                f"(stem stride 4 times 2**hourglass.depth)"
            )
        positions = self.heatmap_size ** 2
        if self.attention_enabled and positions > self.attention.position_cap:
            raise ValueError(
                f"attention over {positions} positions exceeds attention.position_cap="
                f"{self.attention.position_cap}; lower model.image_size"
            )
        return self

    @property
    def heatmap_size(self) -> int:
        return self.image_size // 4


@dataclass(frozen = True)
class ModelOutput:
    """Forward result.

    Attributes:
        stage_logits (List[Tensor]): [N, 12, Hm, Wm] output of every stage.
        stage_coords (List[Tensor]): [N, 12, 2] decoded normalized coordinates of every stage.
    """
    stage_logits : List[Tensor]
    stage_coords : List[Tensor]

    @property
    def coords(self) -> Tensor:
        return self.stage_coords[-1]

    @property
    def logits(self) -> Tensor:
        return self.stage_logits[-1]

    def heatmaps(self) -> np.ndarray:
        """Final-stage probability maps with peak 1, [N, 12, Hm, Wm]."""
        return probability_maps(self.logits.data)


class EyeLandmarkNet:
    """Stem, stacked hourglasses with attention, and soft-argmax decoding.

    Attributes:
        config (ModelConfig): Model configuration.
        params (ParamStore): All parameters, declared at construction.

    Examples:
        >>> net = EyeLandmarkNet(ModelConfig(stages = 1, image_size = 64,
        ...     hourglass = HourglassConfig(depth = 2, width = 8)))
        >>> net.predict(np.zeros((1, 3, 64, 64))).shape
        (1, 12, 2)
    """

    def __init__(self, config : ModelConfig):
        self.config = config
        self.params = ParamStore(seed = config.seed, norm_enabled = config.norm_enabled)
        self._declare(self.params)
        logger.debug(f"EyeLandmarkNet: {self.params.count()} parameters in {len(self.params)} tensors")

    def _declare(self, store : ParamStore):
        config = self.config
        c = config.hourglass.width
        root = ParamScope(store)
        declare_stem(root.child("stem"), c)
        for i in range(config.stages):
            stage = root.child(f"stage{i}")
            declare_hourglass(stage.child("hourglass"), config.hourglass)
            if config.attention_enabled:
                declare_attention(stage.child("attention"), c, config.attention)
            else:
                stage.kernel("head", (NUM_LANDMARKS, c, 1, 1))
            if i < config.stages - 1:
                stage.kernel("remap", (c, NUM_LANDMARKS, 1, 1))

    def expected_shapes(self) -> Dict[str, Tuple[int, ...]]:
        """Names and shapes every parameter collection for this config must have."""
        fresh = ParamStore(seed = self.config.seed, norm_enabled = self.config.norm_enabled)
        self._declare(fresh)
        return {name: t.shape for name, t in fresh.items()}

    def verify(self):
        """Checks the parameter collection against the configuration.

        Raises:
            ParamsMismatchError: On a missing, extra or misshaped parameter.
        """
        expected = self.expected_shapes()
        actual = {name: t.shape for name, t in self.params.items()}
        if expected.keys() != actual.keys():
            raise ParamsMismatchError(
                f"parameters do not match the model config: "
                f"missing={sorted(expected.keys() - actual.keys())[:5]} "
                f"unexpected={sorted(actual.keys() - expected.keys())[:5]}"
            )
        for name, shape in expected.items():
            if actual[name] != shape:
                raise ParamsMismatchError(f"parameter '{name}' has shape {list(actual[name])}, expected {list(shape)}")

    def forward(self, images : Union[Tensor, np.ndarray], training : bool = False) -> ModelOutput:
        """Runs the network.

        Args:
            images (Union[Tensor, np.ndarray]): Batch [N, 3, S, S] with values in [0, 1],
                S = ``config.image_size``.
            training (bool): Batch statistics and running-statistics updates in norm slots.

        Returns:
            ModelOutput: Per-stage logits and decoded coordinates.

        Raises:
            ShapeError: If the batch does not match the configured image size.
        """
        config = self.config
        x = images if isinstance(images, Tensor) else Tensor(images)
        size = config.image_size
        if x.data.ndim != 4 or x.shape[1:] != (3, size, size):
            raise ShapeError("forward", x.shape, detail = f"expected [N, 3, {size}, {size}]")

        root = ParamScope(self.params)
        x = stem_forward(root.child("stem"), x, training)
        logits : List[Tensor] = []
        coords : List[Tensor] = []
        for i in range(config.stages):
            stage = root.child(f"stage{i}")
            h = hourglass_forward(stage.child("hourglass"), x, config.hourglass, training)
            if config.attention_enabled:
                out = attention_forward(stage.child("attention"), h, config.attention, training)
            else:
                out = ops.conv2d(h, stage["head"])
            logits.append(out)
            coords.append(soft_argmax_decode(out))
            if i < config.stages - 1:
                x = ops.add(ops.add(x, h), ops.conv2d(out, stage["remap"]))
        return ModelOutput(stage_logits = logits, stage_coords = coords)

    def predict(self, images : np.ndarray, batch_size : int = 8) -> np.ndarray:
        """Inference-mode coordinates [N, 12, 2], normalized to [0, 1), computed in batches."""
        parts = [
            self.forward(images[start:start + batch_size], training = False).coords.numpy()
            for start in range(0, len(images), batch_size)
        ]
        return np.concatenate(parts) if parts else np.zeros((0, NUM_LANDMARKS, 2))

    def predict_heatmaps(self, images : np.ndarray, batch_size : int = 8) -> Tuple[np.ndarray, np.ndarray]:
        """Coordinates and peak-1 final-stage heatmaps, in batches."""
        coords, maps = [], []
        for start in range(0, len(images), batch_size):
            out = self.forward(images[start:start + batch_size], training = False)
            coords.append(out.coords.numpy())
            maps.append(out.heatmaps())
        return np.concatenate(coords), np.concatenate(maps)
