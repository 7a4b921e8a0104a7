"""Inter-stage attention block.

Given hourglass features ``F`` ([N, C, H, W]) the block computes

* ``F_r = residual(F)`` and the coarse landmark maps ``F_rc = conv1x1(F_r)`` (12 channels),
* the spatial probability maps ``P = spatial_softmax(F_rc)`` and the gated features
  ``P * project(F_r)``, where ``project`` is a learned 1×1 map from C to 12 channels,
* embedded-Gaussian self-attention over the positions of ``F_rc``: embeddings
  ``phi``, ``theta``, ``g`` (1×1 convs to E channels), row-softmax of ``phi theta^T``
  as weights, ``S = weights @ g``,
* ``Att = out(S) + F_rc`` and the block output ``Att + P * project(F_r)``.
"""

import logging
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

from core.errors import ShapeError
from core.landmarks import NUM_LANDMARKS
from core.nn.blocks import declare_residual, residual_forward, residual_param_count
from core.nn.params import ParamScope
from core.tensor import Tensor, ops

logger = logging.getLogger(__name__)

Similarity = Literal["embedded_gaussian", "uniform"]


class AttentionConfig(BaseModel):
    """Configuration of the attention block.

    Attributes:
        embed_channels (Optional[int]): Channel count E of the phi/theta/g embeddings;
            half the backbone width when unset.
        position_cap (int): Largest H*W the block accepts; the weight matrix holds
            (H*W)^2 entries per sample.
        similarity (Similarity): ``uniform`` replaces the learned weights by 1/(H*W),
            an ablation hook.
    """
    model_config = ConfigDict(extra = "forbid")

    embed_channels : Optional[int] = None
    position_cap : int = 4096
    similarity : Similarity = "embedded_gaussian"

    @field_validator("embed_channels")
    @classmethod
    def _embed_positive(cls, value : Optional[int]) -> Optional[int]:
        if value is not None and value < 1:
            raise ValueError("embed_channels must be positive")
        return value

    @field_validator("position_cap")
    @classmethod
    def _cap_positive(cls, value : int) -> int:
        if value < 1:
            raise ValueError("position_cap must be positive")
        return value

    def embedding(self, width : int) -> int:
        return self.embed_channels or width // 2


@dataclass(frozen = True)
class AttentionParts:
    """Intermediate tensors of one attention pass, for inspection and tests."""
    refined : Tensor
    coarse : Tensor
    probabilities : Tensor
    gated : Tensor
    weights : Tensor
    aggregated : Tensor
    attended : Tensor
    output : Tensor


def declare_attention(scope : ParamScope, width : int, config : AttentionConfig, landmarks : int = NUM_LANDMARKS):
    e = config.embedding(width)
    declare_residual(scope.child("res"), width)
    scope.kernel("to_landmarks", (landmarks, width, 1, 1))
    scope.kernel("project", (landmarks, width, 1, 1))
    scope.kernel("phi", (e, landmarks, 1, 1))
    scope.kernel("theta", (e, landmarks, 1, 1))
    scope.kernel("g", (e, landmarks, 1, 1))
    scope.kernel("out", (landmarks, e, 1, 1))


def attention_param_count(width : int, config : AttentionConfig, landmarks : int = NUM_LANDMARKS, norm_enabled : bool = True) -> int:
    e = config.embedding(width)
    return residual_param_count(width, norm_enabled) + 2 * landmarks * width + 4 * e * landmarks


def embed(x : Tensor) -> Tensor:
    """[N, E, H, W] -> [N, H*W, E]: one row per spatial position."""
    n, e, h, w = x.shape
    return ops.transpose(ops.reshape(x, (n, e, h * w)), (0, 2, 1))


def similarity_weights(phi : Tensor, theta : Tensor, similarity : Similarity = "embedded_gaussian") -> Tensor:
    """Row-stochastic weights ``softmax_j(phi_i . theta_j)`` of shape [N, P, P].

    Args:
        phi (Tensor): Position embeddings [N, P, E].
        theta (Tensor): Position embeddings [N, P, E].
        similarity (Similarity): ``uniform`` returns the constant 1/P matrix.
    """
    if phi.shape != theta.shape or phi.data.ndim != 3:
        raise ShapeError("similarity_weights", phi.shape, theta.shape)
    n, p, _ = phi.shape
    if similarity == "uniform":
        return ops.constant(np.full((n, p, p), 1.0 / p))
    logits = ops.matmul(phi, ops.transpose(theta, (0, 2, 1)))
    return ops.softmax(logits)


def _check_cap(coarse : Tensor, config : AttentionConfig):
    positions = coarse.shape[2] * coarse.shape[3]
    if positions > config.position_cap:
        raise ShapeError(
            "attention", coarse.shape,
            detail = (
                f"{positions} positions exceed the cap of {config.position_cap}; "
                "lower the attention resolution (smaller image_size) or raise attention.position_cap"
            )
        )


def pairwise_similarity(scope : ParamScope, coarse : Tensor, config : AttentionConfig) -> Tensor:
    """Attention weights [N, H*W, H*W] over the positions of the coarse maps.

    Raises:
        ShapeError: If H*W exceeds ``config.position_cap``.
    """
    _check_cap(coarse, config)
    phi = embed(ops.conv2d(coarse, scope["phi"]))
    theta = embed(ops.conv2d(coarse, scope["theta"]))
    return similarity_weights(phi, theta, config.similarity)


def attention_parts(scope : ParamScope, features : Tensor, config : AttentionConfig, training : bool = False) -> AttentionParts:
    """Runs the attention block and keeps every intermediate tensor.

    Args:
        scope (ParamScope): Scope the block was declared under.
        features (Tensor): Hourglass output [N, C, H, W].
        config (AttentionConfig): Block configuration.
        training (bool): Norm mode of the residual refinement.

    Returns:
        AttentionParts: Intermediates; ``output`` has shape [N, 12, H, W].
    """
    refined = residual_forward(scope.child("res"), features, training)
    coarse = ops.conv2d(refined, scope["to_landmarks"])
    _check_cap(coarse, config)

    probabilities = ops.spatial_softmax(coarse)
    gated = ops.multiply(probabilities, ops.conv2d(refined, scope["project"]))

    weights = pairwise_similarity(scope, coarse, config)
    g = embed(ops.conv2d(coarse, scope["g"]))
    n, _, h, w = coarse.shape
    aggregated = ops.matmul(weights, g)
    s = ops.reshape(ops.transpose(aggregated, (0, 2, 1)), (n, g.shape[2], h, w))
    attended = ops.add(ops.conv2d(s, scope["out"]), coarse)

    return AttentionParts(
        refined = refined,
        coarse = coarse,
        probabilities = probabilities,
        gated = gated,
        weights = weights,
        aggregated = aggregated,
        attended = attended,
        output = ops.add(attended, gated)
    )


def attention_forward(scope : ParamScope, features : Tensor, config : AttentionConfig, training : bool = False) -> Tensor:
    """[N, C, H, W] -> [N, 12, H, W] landmark-channel features."""
    return attention_parts(scope, features, config, training).output
