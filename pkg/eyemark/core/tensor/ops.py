"""Differentiable primitives over :class:`Tensor`.

Feature maps follow the N, C, H, W convention. Convolutions are
cross-correlations (no kernel flip). Every primitive checks its shape contract
and raises :class:`core.errors.ShapeError` naming the offending shapes.
"""

from typing import Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from core.errors import ShapeError
from .tensor import Tensor, apply_op, as_tensor

BATCHNORM_EPS = 1e-5
BATCHNORM_MOMENTUM = 0.9


def _require_rank(op : str, t : Tensor, rank : int):
    if t.data.ndim != rank:
        raise ShapeError(op, t.shape, detail = f"expected rank {rank}")


def _require_same(op : str, a : Tensor, b : Tensor):
    if a.shape != b.shape:
        raise ShapeError(op, a.shape, b.shape)


def _conv_geometry(op : str, x : Tensor, k : Tensor, stride : int, padding : int) -> Tuple[int, int]:
    """Output extent ``floor((H + 2p - k) / s) + 1`` per axis.

    A stride that does not divide ``H + 2p - k`` is accepted and the trailing rows
    and columns no window reaches are ignored; the stride-2 7×7 stem on even inputs
    depends on this.
    """
    kh, kw = k.shape[2], k.shape[3]
    if kh % 2 == 0 or kw % 2 == 0:
        raise ShapeError(op, x.shape, k.shape, detail = "kernel extents must be odd")
    if stride < 1 or padding < 0:
        raise ShapeError(op, x.shape, k.shape, detail = f"stride={stride}, padding={padding}")
    hp, wp = x.shape[2] + 2 * padding, x.shape[3] + 2 * padding
    if hp < kh or wp < kw:
        raise ShapeError(op, x.shape, k.shape, detail = "kernel larger than padded input")
    return (hp - kh) // stride + 1, (wp - kw) // stride + 1


def _padded_windows(x : np.ndarray, kh : int, kw : int, stride : int, padding : int) -> np.ndarray:
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    windows = sliding_window_view(xp, (kh, kw), axis = (2, 3))
    return windows[:, :, ::stride, ::stride]


def _scatter_windows(
    x_shape : Tuple[int, ...],
    padding : int,
    stride : int,
    out_hw : Tuple[int, int],
    kernel_hw : Tuple[int, int],
    contribution
) -> np.ndarray:
    """Accumulates per-kernel-offset gradients back onto the (unpadded) input."""
    n, c, h, w = x_shape
    ho, wo = out_hw
    gxp = np.zeros((n, c, h + 2 * padding, w + 2 * padding))
    for i in range(kernel_hw[0]):
        for j in range(kernel_hw[1]):
            rows = slice(i, i + stride * (ho - 1) + 1, stride)
            cols = slice(j, j + stride * (wo - 1) + 1, stride)
            gxp[:, :, rows, cols] += contribution(i, j)
    return gxp[:, :, padding:padding + h, padding:padding + w]


def conv2d(x : Tensor, kernel : Tensor, stride : int = 1, padding : int = 0) -> Tensor:
    """2-D cross-correlation.

    Args:
        x (Tensor): Input of shape [N, Cin, H, W].
        kernel (Tensor): Kernel of shape [Cout, Cin, kh, kw] with odd kh, kw.
        stride (int): Step between windows.
        padding (int): Zero padding on every spatial border.

    Returns:
        Tensor: Output of shape [N, Cout, H', W'] with
        H' = floor((H + 2p - kh) / stride) + 1.

    Raises:
        ShapeError: On rank, channel or extent mismatch.
    """
    _require_rank("conv2d", x, 4)
    _require_rank("conv2d", kernel, 4)
    if x.shape[1] != kernel.shape[1]:
        raise ShapeError("conv2d", x.shape, kernel.shape, detail = "input channels differ")
    ho, wo = _conv_geometry("conv2d", x, kernel, stride, padding)
    kh, kw = kernel.shape[2], kernel.shape[3]
    k = kernel.data

    windows = _padded_windows(x.data, kh, kw, stride, padding)
    out = np.tensordot(windows, k, axes = ([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)

    def backward(g : np.ndarray):
        gk = np.tensordot(g, windows, axes = ([0, 2, 3], [0, 2, 3]))
        gx = None
        if x.requires_grad:
            gx = _scatter_windows(
                x.shape, padding, stride, (ho, wo), (kh, kw),
                lambda i, j: np.einsum("nohw,oc->nchw", g, k[:, :, i, j])
            )
        return gx, gk

    return apply_op("conv2d", out, (x, kernel), backward)


def depthwise_conv2d(x : Tensor, kernel : Tensor, stride : int = 1, padding : int = 0) -> Tensor:
    """Per-channel cross-correlation: channel i sees only kernel slice i.

    Args:
        x (Tensor): Input of shape [N, C, H, W].
        kernel (Tensor): Kernel of shape [C, 1, kh, kw].

    Returns:
        Tensor: Output of shape [N, C, H', W'].
    """
    _require_rank("depthwise_conv2d", x, 4)
    _require_rank("depthwise_conv2d", kernel, 4)
    if kernel.shape[0] != x.shape[1] or kernel.shape[1] != 1:
        raise ShapeError("depthwise_conv2d", x.shape, kernel.shape, detail = "kernel must be [C, 1, kh, kw]")
    ho, wo = _conv_geometry("depthwise_conv2d", x, kernel, stride, padding)
    kh, kw = kernel.shape[2], kernel.shape[3]
    k = kernel.data[:, 0]

    windows = _padded_windows(x.data, kh, kw, stride, padding)
    out = np.einsum("nchwij,cij->nchw", windows, k)

    def backward(g : np.ndarray):
        gk = np.einsum("nchw,nchwij->cij", g, windows)[:, None]
        gx = None
        if x.requires_grad:
            gx = _scatter_windows(
                x.shape, padding, stride, (ho, wo), (kh, kw),
                lambda i, j: g * k[None, :, i, j, None, None]
            )
        return gx, gk

    return apply_op("depthwise_conv2d", out, (x, kernel), backward)


def maxpool2x2(x : Tensor) -> Tensor:
    """2×2 max pooling with stride 2. Ties route the gradient to the first maximum."""
    _require_rank("maxpool2x2", x, 4)
    n, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ShapeError("maxpool2x2", x.shape, detail = "spatial extents must be even")
    cells = (
        x.data.reshape(n, c, h // 2, 2, w // 2, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(n, c, h // 2, w // 2, 4)
    )
    argmax = np.argmax(cells, axis = -1)[..., None]
    out = np.take_along_axis(cells, argmax, axis = -1)[..., 0]

    def backward(g : np.ndarray):
        routed = np.zeros_like(cells)
        np.put_along_axis(routed, argmax, g[..., None], axis = -1)
        gx = (
            routed.reshape(n, c, h // 2, w // 2, 2, 2)
            .transpose(0, 1, 2, 4, 3, 5)
            .reshape(n, c, h, w)
        )
        return (gx,)

    return apply_op("maxpool2x2", out, (x,), backward)


def upsample2x_nearest(x : Tensor) -> Tensor:
    """Replicates every cell into a 2×2 block."""
    _require_rank("upsample2x_nearest", x, 4)
    n, c, h, w = x.shape
    out = np.repeat(np.repeat(x.data, 2, axis = 2), 2, axis = 3)

    def backward(g : np.ndarray):
        return (g.reshape(n, c, h, 2, w, 2).sum(axis = (3, 5)),)

    return apply_op("upsample2x_nearest", out, (x,), backward)


def _softmax_last(z : np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis = -1, keepdims = True))
    return e / e.sum(axis = -1, keepdims = True)


def softmax(x : Tensor) -> Tensor:
    """Softmax over the last axis, with max subtraction."""
    p = _softmax_last(x.data)

    def backward(g : np.ndarray):
        return (p * (g - (g * p).sum(axis = -1, keepdims = True)),)

    return apply_op("softmax", p, (x,), backward)


def spatial_softmax(x : Tensor) -> Tensor:
    """Softmax over H×W of every (n, c) slice of an [N, C, H, W] tensor."""
    _require_rank("spatial_softmax", x, 4)
    n, c, h, w = x.shape
    p = _softmax_last(x.data.reshape(n, c, h * w))

    def backward(g : np.ndarray):
        gf = g.reshape(n, c, h * w)
        gx = p * (gf - (gf * p).sum(axis = -1, keepdims = True))
        return (gx.reshape(n, c, h, w),)

    return apply_op("spatial_softmax", p.reshape(n, c, h, w), (x,), backward)


def spatial_expectation(p : Tensor, grids : np.ndarray) -> Tensor:
    """Weighted spatial sums ``out[n, c, k] = sum_hw p[n, c, h, w] * grids[k, h, w]``.

    Args:
        p (Tensor): Maps of shape [N, C, H, W].
        grids (np.ndarray): Constant weights of shape [K, H, W].

    Returns:
        Tensor: Shape [N, C, K].
    """
    _require_rank("spatial_expectation", p, 4)
    if grids.ndim != 3 or grids.shape[1:] != p.shape[2:]:
        raise ShapeError("spatial_expectation", p.shape, grids.shape)
    out = np.einsum("nchw,khw->nck", p.data, grids)

    def backward(g : np.ndarray):
        return (np.einsum("nck,khw->nchw", g, grids),)

    return apply_op("spatial_expectation", out, (p,), backward)


def add(a : Tensor, b : Tensor) -> Tensor:
    _require_same("add", a, b)
    return apply_op("add", a.data + b.data, (a, b), lambda g: (g, g))


def sub(a : Tensor, b : Tensor) -> Tensor:
    _require_same("sub", a, b)
    return apply_op("sub", a.data - b.data, (a, b), lambda g: (g, -g))


def multiply(a : Tensor, b : Tensor) -> Tensor:
    """Hadamard product of two equally shaped tensors."""
    _require_same("multiply", a, b)
    av, bv = a.data, b.data
    return apply_op("multiply", av * bv, (a, b), lambda g: (g * bv, g * av))


def scale(x : Tensor, factor : float) -> Tensor:
    factor = float(factor)
    return apply_op("scale", x.data * factor, (x,), lambda g: (g * factor,))


def relu(x : Tensor) -> Tensor:
    mask = x.data > 0
    return apply_op("relu", np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,))


def concat_channels(tensors : Sequence[Tensor]) -> Tensor:
    """Concatenates [N, Ci, H, W] tensors along the channel axis."""
    if not tensors:
        raise ShapeError("concat_channels", detail = "nothing to concatenate")
    first = tensors[0]
    for t in tensors:
        _require_rank("concat_channels", t, 4)
        if t.shape[0] != first.shape[0] or t.shape[2:] != first.shape[2:]:
            raise ShapeError("concat_channels", first.shape, t.shape)
    bounds = np.cumsum([0] + [t.shape[1] for t in tensors])
    out = np.concatenate([t.data for t in tensors], axis = 1)

    def backward(g : np.ndarray):
        return tuple(g[:, bounds[i]:bounds[i + 1]] for i in range(len(tensors)))

    return apply_op("concat_channels", out, tuple(tensors), backward)


def channel_bias(x : Tensor, bias : Tensor) -> Tensor:
    """Adds a per-channel bias of shape [C] to an [N, C, H, W] tensor."""
    _require_rank("channel_bias", x, 4)
    if bias.shape != (x.shape[1],):
        raise ShapeError("channel_bias", x.shape, bias.shape)
    out = x.data + bias.data[None, :, None, None]
    return apply_op("channel_bias", out, (x, bias), lambda g: (g, g.sum(axis = (0, 2, 3))))


def batchnorm(
    x : Tensor,
    gamma : Tensor,
    beta : Tensor,
    running_mean : np.ndarray,
    running_var : np.ndarray,
    training : bool,
    momentum : float = BATCHNORM_MOMENTUM,
    eps : float = BATCHNORM_EPS
) -> Tensor:
    """Per-channel normalization with learned scale ``gamma`` and shift ``beta``.

    In training mode the batch statistics over N, H, W are used and the running
    buffers are updated in place (``running = momentum * running + (1 - momentum) * batch``).
    In inference mode the running statistics are used.
    """
    _require_rank("batchnorm", x, 4)
    c = x.shape[1]
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ShapeError("batchnorm", x.shape, gamma.shape, beta.shape)
    axes = (0, 2, 3)
    m = x.shape[0] * x.shape[2] * x.shape[3]

    if training:
        mean = x.data.mean(axis = axes)
        var = x.data.var(axis = axes)
        running_mean *= momentum
        running_mean += (1.0 - momentum) * mean
        running_var *= momentum
        running_var += (1.0 - momentum) * var
    else:
        mean, var = running_mean.copy(), running_var.copy()

    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mean[None, :, None, None]) * inv_std[None, :, None, None]
    g_ = gamma.data[None, :, None, None]
    out = g_ * xhat + beta.data[None, :, None, None]

    def backward(g : np.ndarray):
        gbeta = g.sum(axis = axes)
        ggamma = (g * xhat).sum(axis = axes)
        gxhat = g * g_
        if training:
            gx = (inv_std[None, :, None, None] / m) * (
                m * gxhat
                - gxhat.sum(axis = axes)[None, :, None, None]
                - xhat * (gxhat * xhat).sum(axis = axes)[None, :, None, None]
            )
        else:
            gx = gxhat * inv_std[None, :, None, None]
        return gx, ggamma, gbeta

    return apply_op("batchnorm", out, (x, gamma, beta), backward)


def matmul(a : Tensor, b : Tensor) -> Tensor:
    """Matrix product over the last two axes; leading (batch) axes must match."""
    if a.data.ndim < 2 or a.data.ndim != b.data.ndim:
        raise ShapeError("matmul", a.shape, b.shape)
    if a.shape[:-2] != b.shape[:-2] or a.shape[-1] != b.shape[-2]:
        raise ShapeError("matmul", a.shape, b.shape)
    av, bv = a.data, b.data

    def backward(g : np.ndarray):
        return g @ np.swapaxes(bv, -1, -2), np.swapaxes(av, -1, -2) @ g

    return apply_op("matmul", av @ bv, (a, b), backward)


def transpose(x : Tensor, axes : Sequence[int]) -> Tensor:
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    return apply_op("transpose", x.data.transpose(axes), (x,), lambda g: (g.transpose(inverse),))


def reshape(x : Tensor, shape : Sequence[int]) -> Tensor:
    original = x.shape
    try:
        out = x.data.reshape(tuple(shape))
    except ValueError:
        raise ShapeError("reshape", original, tuple(shape)) from None
    return apply_op("reshape", out, (x,), lambda g: (g.reshape(original),))


def sum_all(x : Tensor) -> Tensor:
    """Sum of every element, as a scalar tensor."""
    return apply_op("sum_all", np.asarray(x.data.sum()), (x,), lambda g: (np.full(x.shape, float(g)),))


def mean_all(x : Tensor) -> Tensor:
    count = x.size
    return apply_op(
        "mean_all", np.asarray(x.data.mean()), (x,),
        lambda g: (np.full(x.shape, float(g) / count),)
    )


def mean_of(tensors : Sequence[Tensor]) -> Tensor:
    """Unweighted mean of equally shaped tensors."""
    total : Optional[Tensor] = None
    for t in tensors:
        total = t if total is None else add(total, t)
    if total is None:
        raise ShapeError("mean_of", detail = "no tensors")
    return scale(total, 1.0 / len(tensors))


def constant(value) -> Tensor:
    return as_tensor(np.asarray(value, dtype = np.float64))
