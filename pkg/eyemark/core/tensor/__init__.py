from .tensor import Tensor, Graph, Node, apply_op, as_tensor, current_graph
from . import ops
