"""Dense double-precision tensor with a tape-based reverse-mode graph.

Operations record themselves on the graph that is active in the current thread
(see :class:`Graph`). Without an active graph nothing is recorded, which is how
inference runs.

Examples:
    >>> x = Tensor(np.arange(4.0), requires_grad = True, name = "x")
    >>> with Graph() as graph:
    ...     loss = ops.sum_all(ops.multiply(x, x))
    ...     grads = graph.backward(loss)
    >>> grads["x"]
    array([0., 2., 4., 6.])
"""

import threading
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.errors import ShapeError

_local = threading.local()

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class Tensor:
    """A shaped grid of float64 values.

    Attributes:
        data (np.ndarray): Values, always float64 and C-contiguous.
        requires_grad (bool): Whether gradients flow into this tensor.
        grad (Optional[np.ndarray]): Gradient left by the last backward pass.
        name (str): Optional name; named leaves are reported by :meth:`Graph.backward`.
    """

    __slots__ = ("data", "requires_grad", "grad", "name", "__weakref__")

    def __init__(self, data, requires_grad : bool = False, name : str = ""):
        self.data = np.ascontiguousarray(data, dtype = np.float64)
        self.requires_grad = requires_grad
        self.grad : Optional[np.ndarray] = None
        self.name = name

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        """Returns a copy of the values."""
        return self.data.copy()

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError("item", self.shape, detail = "tensor is not scalar")
        return float(self.data.reshape(()))

    def __repr__(self) -> str:
        label = f" '{self.name}'" if self.name else ""
        return f"Tensor{label}(shape={list(self.shape)}, requires_grad={self.requires_grad})"


@dataclass(frozen = True)
class Node:
    """One recorded primitive application.

    Attributes:
        op (str): Primitive name, for diagnostics.
        inputs (Tuple[Tensor, ...]): Input tensors, in argument order.
        output (Tensor): The produced tensor.
        backward (BackwardFn): Maps the output gradient to one gradient per input.
    """
    op : str
    inputs : Tuple[Tensor, ...]
    output : Tensor
    backward : BackwardFn


class Graph:
    """Records primitive applications in execution (topological) order.

    A graph is confined to the thread that opened it. Use it as a context
    manager; nested graphs shadow outer ones until they exit.
    """

    def __init__(self):
        self._tape : List[Node] = []
        self._produced : Dict[int, Node] = {}
        self._owner = threading.get_ident()

    def __enter__(self) -> "Graph":
        stack = _graph_stack()
        stack.append(self)
        return self

    def __exit__(self, *exc) -> None:
        stack = _graph_stack()
        if stack and stack[-1] is self:
            stack.pop()

    @property
    def nodes(self) -> Tuple[Node, ...]:
        return tuple(self._tape)

    def record(self, node : Node) -> None:
        if threading.get_ident() != self._owner:
            raise RuntimeError("a Graph must be recorded from the thread that created it")
        self._tape.append(node)
        self._produced[id(node.output)] = node

    def backward(self, loss : Tensor) -> Dict[str, np.ndarray]:
        """Runs reverse-mode differentiation from a scalar loss.

        Gradients are accumulated in tape order reversed, so every node is visited
        exactly once. Each leaf tensor with ``requires_grad`` receives ``.grad``.

        Args:
            loss (Tensor): Scalar tensor produced on this graph.

        Returns:
            Dict[str, np.ndarray]: Gradient of every named leaf tensor.

        Raises:
            ShapeError: If the loss is not a scalar.
        """
        if loss.size != 1:
            raise ShapeError("backward", loss.shape, detail = "loss must be scalar")

        grads : Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        leaves : Dict[int, Tensor] = {}
        if id(loss) not in self._produced:
            leaves[id(loss)] = loss

        for node in reversed(self._tape):
            upstream = grads.pop(id(node.output), None)
            if upstream is None:
                continue
            input_grads = node.backward(upstream)
            for tensor, grad in zip(node.inputs, input_grads):
                if grad is None or not tensor.requires_grad:
                    continue
                if grad.shape != tensor.shape:
                    raise ShapeError(f"backward[{node.op}]", grad.shape, tensor.shape)
                key = id(tensor)
                if key in grads:
                    grads[key] = grads[key] + grad
                else:
                    grads[key] = grad
                if key not in self._produced:
                    leaves[key] = tensor

        named : Dict[str, np.ndarray] = {}
        for key, tensor in leaves.items():
            tensor.grad = grads.get(key, np.zeros_like(tensor.data))
            if tensor.name:
                named[tensor.name] = tensor.grad
        return named


def _graph_stack() -> List[Graph]:
    stack = getattr(_local, "stack", None)
    if stack is None:
        stack = []
        _local.stack = stack
    return stack


def current_graph() -> Optional[Graph]:
    """Returns the innermost graph active in this thread, if any."""
    stack = _graph_stack()
    return stack[-1] if stack else None


def apply_op(
    op : str,
    value : np.ndarray,
    inputs : Sequence[Tensor],
    backward : BackwardFn
) -> Tensor:
    """Wraps a forward result and records it on the active graph.

    Args:
        op (str): Primitive name.
        value (np.ndarray): Forward result.
        inputs (Sequence[Tensor]): Tensors the result depends on.
        backward (BackwardFn): Gradient rule for the inputs.

    Returns:
        Tensor: The recorded output.
    """
    requires_grad = any(t.requires_grad for t in inputs)
    out = Tensor(value, requires_grad = requires_grad)
    graph = current_graph()
    if graph is not None and requires_grad:
        graph.record(Node(op = op, inputs = tuple(inputs), output = out, backward = backward))
    return out


def as_tensor(value) -> Tensor:
    """Returns ``value`` unchanged if it already is a tensor, else a constant tensor."""
    if isinstance(value, Tensor):
        return value
    return Tensor(value)
