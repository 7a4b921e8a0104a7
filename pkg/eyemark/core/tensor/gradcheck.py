"""Central finite-difference checks for the reverse-mode graph."""

from typing import Callable, Dict, Optional, Sequence

import numpy as np

from .tensor import Graph, Tensor

LossFn = Callable[[], Tensor]


def analytic_gradients(loss_fn : LossFn, params : Sequence[Tensor]) -> list:
    """Evaluates ``loss_fn`` on a fresh graph and returns one gradient per tensor."""
    for p in params:
        p.grad = None
    with Graph() as graph:
        loss = loss_fn()
        graph.backward(loss)
    return [p.grad if p.grad is not None else np.zeros_like(p.data) for p in params]


def central_difference(loss_fn : LossFn, tensor : Tensor, index : tuple, eps : float) -> float:
    """(f(x + eps) - f(x - eps)) / (2 eps) along one coordinate of ``tensor``."""
    original = tensor.data[index]
    try:
        tensor.data[index] = original + eps
        upper = loss_fn().item()
        tensor.data[index] = original - eps
        lower = loss_fn().item()
    finally:
        tensor.data[index] = original
    return (upper - lower) / (2.0 * eps)


def check_gradients(
    loss_fn : LossFn,
    params : Sequence[Tensor],
    eps : float = 1e-5,
    max_entries : Optional[int] = None,
    seed : int = 0,
    tolerance : float = 1e-4
) -> Dict[str, float]:
    """Compares analytic gradients with central finite differences.

    The error reported per tensor is ``max|a - n| / max(max|a|, max|n|)`` over the
    checked coordinates. A coordinate whose difference exceeds ``tolerance`` is
    re-evaluated with step ``eps / 10``, since a ReLU or max-pool switch inside the
    step makes the wider difference meaningless; the closer estimate is kept.

    Args:
        loss_fn (LossFn): Rebuilds the scalar loss from the current tensor values.
        params (Sequence[Tensor]): Leaf tensors to check.
        eps (float): Finite-difference step.
        max_entries (Optional[int]): Check at most this many random coordinates per tensor.
        seed (int): Seed of the coordinate sampler.
        tolerance (float): Relative error that triggers the smaller-step re-evaluation.

    Returns:
        Dict[str, float]: Relative error per tensor, keyed by name (or position).
    """
    grads = analytic_gradients(loss_fn, params)
    rng = np.random.default_rng(seed)
    errors : Dict[str, float] = {}

    for position, (tensor, grad) in enumerate(zip(params, grads)):
        flat_count = tensor.size
        if max_entries is not None and flat_count > max_entries:
            flat = np.sort(rng.choice(flat_count, size = max_entries, replace = False))
        else:
            flat = np.arange(flat_count)
        indices = [np.unravel_index(i, tensor.shape) for i in flat]

        analytic = np.asarray([grad[i] for i in indices])
        numeric = np.asarray([central_difference(loss_fn, tensor, i, eps) for i in indices])
        scale = max(np.abs(analytic).max(initial = 0.0), np.abs(numeric).max(initial = 0.0), 1e-12)

        for k, index in enumerate(indices):
            if abs(analytic[k] - numeric[k]) > tolerance * scale:
                retry = central_difference(loss_fn, tensor, index, eps / 10.0)
                if abs(analytic[k] - retry) < abs(analytic[k] - numeric[k]):
                    numeric[k] = retry

        key = tensor.name or str(position)
        errors[key] = float(np.abs(analytic - numeric).max(initial = 0.0) / scale)

    return errors
