"""Backbone building blocks: stem, residual block, DLAU and the deep hourglass.

Each block comes as a ``declare_*`` function, which registers its parameters
under a :class:`ParamScope`, and a ``*_forward`` function, which looks them up
by the same names. Parameter counts are therefore a function of the
configuration alone.
"""

import logging
from typing import Literal

from pydantic import BaseModel, ConfigDict, field_validator

from core.errors import ShapeError
from core.tensor import Tensor, ops
from .params import ParamScope

logger = logging.getLogger(__name__)

SkipKind = Literal["residual", "dlau"]


class HourglassConfig(BaseModel):
    """Configuration of one hourglass module.

    Attributes:
        depth (int): Number of pooling levels.
        width (int): Channel width C of every feature map inside the module.
        skip_kind (SkipKind): ``dlau`` aggregates skip and upsampled features with a
            DLAU; ``residual`` adds a residual-transformed skip.
    """
    model_config = ConfigDict(extra = "forbid")

    depth : int = 4
    width : int = 64
    skip_kind : SkipKind = "dlau"

    @field_validator("depth")
    @classmethod
    def _depth_positive(cls, value : int) -> int:
        if value < 1:
            raise ValueError("hourglass depth must be at least 1")
        return value

    @field_validator("width")
    @classmethod
    def _width_even(cls, value : int) -> int:
        if value < 2 or value % 2:
            raise ValueError("hourglass width must be a positive even number")
        return value


# stem

def declare_stem(scope : ParamScope, width : int, in_channels : int = 3):
    scope.kernel("conv7", (width, in_channels, 7, 7))
    scope.declare_norm("norm", width)
    scope.kernel("conv3", (width, width, 3, 3))


def stem_forward(scope : ParamScope, image : Tensor, training : bool = False) -> Tensor:
    """7×7 stride-2 conv, norm, ReLU, 2×2 max pool, 3×3 conv: [N, 3, H, W] -> [N, C, H/4, W/4].

    Raises:
        ShapeError: If the input is not 3-channel or H, W are not multiples of 4.
    """
    if image.data.ndim != 4 or image.shape[1] != 3:
        raise ShapeError("stem_forward", image.shape, detail = "expected [N, 3, H, W]")
    if image.shape[2] % 4 or image.shape[3] % 4:
        raise ShapeError("stem_forward", image.shape, detail = "H and W must be multiples of 4")
    x = ops.conv2d(image, scope["conv7"], stride = 2, padding = 3)
    x = ops.relu(scope.norm(x, "norm", training))
    x = ops.maxpool2x2(x)
    return ops.conv2d(x, scope["conv3"], padding = 1)


# residual block

def declare_residual(scope : ParamScope, width : int):
    half = width // 2
    scope.kernel("conv1", (half, width, 1, 1))
    scope.declare_norm("norm1", half)
    scope.kernel("conv2", (half, half, 3, 3))
    scope.declare_norm("norm2", half)
    scope.kernel("conv3", (width, half, 1, 1))
    scope.declare_norm("norm3", width)


def residual_forward(scope : ParamScope, x : Tensor, training : bool = False) -> Tensor:
    """Bottleneck residual block ``relu(x + F(x))`` with F = 1×1, 3×3, 1×1 convolutions."""
    y = ops.relu(scope.norm(ops.conv2d(x, scope["conv1"]), "norm1", training))
    y = ops.relu(scope.norm(ops.conv2d(y, scope["conv2"], padding = 1), "norm2", training))
    y = scope.norm(ops.conv2d(y, scope["conv3"]), "norm3", training)
    return ops.relu(ops.add(x, y))


def residual_param_count(width : int, norm_enabled : bool = True) -> int:
    norm = 4 * width if norm_enabled else 2 * width
    return 13 * width * width // 4 + norm


# deep layer aggregation unit

def declare_dlau(scope : ParamScope, width : int):
    scope.kernel("depthwise", (width, 1, 3, 3))
    scope.kernel("merge", (width, 2 * width, 1, 1))
    scope.declare_norm("norm", width)


def dlau_forward(scope : ParamScope, shallow : Tensor, deep : Tensor, training : bool = False) -> Tensor:
    """Aggregates shallow features with depthwise-convolved deep features.

    ``relu(norm(conv1x1(concat(shallow, depthwise3x3(deep)))))``; spatial extent is preserved.

    Raises:
        ShapeError: If ``shallow`` and ``deep`` differ in shape.
    """
    if shallow.shape != deep.shape:
        raise ShapeError("dlau_forward", shallow.shape, deep.shape)
    d = ops.depthwise_conv2d(deep, scope["depthwise"], padding = 1)
    merged = ops.conv2d(ops.concat_channels([shallow, d]), scope["merge"])
    return ops.relu(scope.norm(merged, "norm", training))


def dlau_param_count(width : int, norm_enabled : bool = True) -> int:
    norm = 2 * width if norm_enabled else width
    return 2 * width * width + 9 * width + norm


# hourglass

def declare_hourglass(scope : ParamScope, config : HourglassConfig):
    c = config.width
    for level in range(config.depth):
        lv = scope.child(f"level{level}")
        declare_residual(lv.child("down"), c)
        declare_residual(lv.child("up"), c)
        if config.skip_kind == "dlau":
            declare_dlau(lv.child("skip"), c)
        else:
            declare_residual(lv.child("skip"), c)
    declare_residual(scope.child("bottleneck").child("res"), c)
    if config.skip_kind == "dlau":
        declare_dlau(scope.child("bottleneck").child("merge"), c)


def hourglass_param_count(config : HourglassConfig, norm_enabled : bool = True) -> int:
    """Closed-form parameter count of one hourglass module."""
    r = residual_param_count(config.width, norm_enabled)
    if config.skip_kind == "residual":
        return config.depth * 3 * r + r
    d = dlau_param_count(config.width, norm_enabled)
    return config.depth * (2 * r + d) + r + d


def _bottleneck(scope : ParamScope, x : Tensor, skip_kind : SkipKind, training : bool) -> Tensor:
    y = residual_forward(scope.child("res"), x, training)
    if skip_kind == "dlau":
        y = dlau_forward(scope.child("merge"), x, y, training)
    return y


def _level(scope : ParamScope, x : Tensor, level : int, config : HourglassConfig, training : bool) -> Tensor:
    lv = scope.child(f"level{level}")
    low1 = residual_forward(lv.child("down"), ops.maxpool2x2(x), training)
    if level == config.depth - 1:
        low2 = _bottleneck(scope.child("bottleneck"), low1, config.skip_kind, training)
    else:
        low2 = _level(scope, low1, level + 1, config, training)
    low3 = residual_forward(lv.child("up"), low2, training)
    up = ops.upsample2x_nearest(low3)
    if config.skip_kind == "dlau":
        return dlau_forward(lv.child("skip"), x, up, training)
    return ops.add(residual_forward(lv.child("skip"), x, training), up)


def hourglass_forward(scope : ParamScope, x : Tensor, config : HourglassConfig, training : bool = False) -> Tensor:
    """Runs one hourglass module; output shape equals input shape.

    Args:
        scope (ParamScope): Scope the module was declared under.
        x (Tensor): Features of shape [N, C, H, W].
        config (HourglassConfig): Module configuration.
        training (bool): Batch statistics (True) or running statistics (False).

    Raises:
        ShapeError: If H or W is not divisible by ``2 ** depth`` or C differs from the width.
    """
    factor = 2 ** config.depth
    if x.data.ndim != 4 or x.shape[1] != config.width:
        raise ShapeError("hourglass_forward", x.shape, detail = f"expected {config.width} channels")
    if x.shape[2] % factor or x.shape[3] % factor:
        raise ShapeError(
            "hourglass_forward", x.shape,
            detail = f"spatial extent must be divisible by 2**depth = {factor}"
        )
    return _level(scope, x, 0, config, training)
