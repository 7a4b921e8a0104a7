"""Coordinate regression losses on normalized landmark coordinates.

Every loss averages its per-entry value over all coordinate entries
(N × L × 2) of the prediction.
"""

import math
from functools import partial
from typing import Callable, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

from core.errors import ShapeError
from core.tensor import Tensor, apply_op, as_tensor, ops

LossKind = Literal["mse", "huber", "wing"]
LossFn = Callable[[Tensor, Tensor], Tensor]


class LossConfig(BaseModel):
    """Loss selection and parameters.

    Defaults express the conventional pixel-space wing parameters (10, 2) on a
    64-cell heatmap in normalized units.

    Attributes:
        kind (LossKind): Which loss to train with.
        delta (float): Huber knee.
        w (float): Wing threshold between the log and the linear branch.
        epsilon (float): Wing curvature.
    """
    model_config = ConfigDict(extra = "forbid")

    kind : LossKind = "wing"
    delta : float = 10.0 / 64.0
    w : float = 10.0 / 64.0
    epsilon : float = 2.0 / 64.0

    @field_validator("delta", "w", "epsilon")
    @classmethod
    def _positive(cls, value : float, info) -> float:
        if not value > 0:
            raise ValueError(f"loss.{info.field_name} must be positive, got {value}")
        return value


def _difference(gt, pr) -> Tensor:
    gt, pr = as_tensor(gt), as_tensor(pr)
    if gt.shape != pr.shape:
        raise ShapeError("loss", gt.shape, pr.shape)
    return ops.sub(gt, pr)


def mse_loss(gt, pr) -> Tensor:
    """Mean of squared coordinate differences.

    Examples:
        >>> mse_loss(np.array([0.3]), np.array([0.0])).item()
        0.09
    """
    d = _difference(gt, pr)
    return ops.mean_all(ops.multiply(d, d))


def huber_values(d : np.ndarray, delta : float) -> np.ndarray:
    """``d^2 / 2`` for ``|d| <= delta``, ``delta (|d| - delta / 2)`` otherwise."""
    a = np.abs(d)
    return np.where(a <= delta, 0.5 * d * d, delta * (a - 0.5 * delta))


def huber_loss(gt, pr, delta : float = 10.0 / 64.0) -> Tensor:
    """Mean Huber value of the coordinate differences.

    Raises:
        ValueError: If ``delta`` is not positive.
    """
    if not delta > 0:
        raise ValueError(f"huber delta must be positive, got {delta}")
    d = _difference(gt, pr)
    dv = d.data
    slope = np.clip(dv, -delta, delta)
    values = apply_op("huber", huber_values(dv, delta), (d,), lambda g: (g * slope,))
    return ops.mean_all(values)


def wing_constant(w : float, epsilon : float) -> float:
    """Offset C that joins the two wing branches: ``w - w ln(1 + w / epsilon)``."""
    return w - w * math.log1p(w / epsilon)


def wing_log_branch(d : np.ndarray, w : float, epsilon : float) -> np.ndarray:
    return w * np.log1p(np.abs(d) / epsilon)


def wing_linear_branch(d : np.ndarray, w : float, epsilon : float) -> np.ndarray:
    return np.abs(d) - wing_constant(w, epsilon)


def wing_loss(gt, pr, w : float = 10.0 / 64.0, epsilon : float = 2.0 / 64.0) -> Tensor:
    """Mean wing value: logarithmic for ``|d| < w``, ``|d| - C`` beyond.

    Raises:
        ValueError: If ``w`` or ``epsilon`` is not positive.
    """
    if not (w > 0 and epsilon > 0):
        raise ValueError(f"wing w and epsilon must be positive, got w={w}, epsilon={epsilon}")
    d = _difference(gt, pr)
    dv = d.data
    inner = np.abs(dv) < w
    values = np.where(inner, wing_log_branch(dv, w, epsilon), wing_linear_branch(dv, w, epsilon))
    slope = np.where(inner, w / (epsilon + np.abs(dv)), 1.0) * np.sign(dv)
    out = apply_op("wing", values, (d,), lambda g: (g * slope,))
    return ops.mean_all(out)


def loss_from_config(config : LossConfig) -> LossFn:
    """Returns ``loss(gt, pr)`` for the configured kind."""
    if config.kind == "mse":
        return mse_loss
    if config.kind == "huber":
        return partial(huber_loss, delta = config.delta)
    return partial(wing_loss, w = config.w, epsilon = config.epsilon)


def stage_loss(loss_fn : LossFn, gt, stage_predictions) -> Tensor:
    """Unweighted mean of the loss over every stage's decoded coordinates."""
    return ops.mean_of([loss_fn(gt, pr) for pr in stage_predictions])
