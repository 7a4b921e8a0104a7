"""Named parameter collection with seed-reproducible initialization."""

import logging
import zlib
from typing import Dict, Iterator, Optional, Tuple

import numpy as np

from core.errors import ParamsMismatchError
from core.tensor import Tensor, ops

logger = logging.getLogger(__name__)


class ParamStore:
    """Every learnable tensor and running buffer of a model, keyed by dotted name.

    Kernels use fan-in scaled uniform initialization, ``U(-b, b)`` with
    ``b = sqrt(6 / fan_in)``. Each name draws from its own random substream
    derived from ``(seed, crc32(name))``, so declaring another block never changes
    the initial values of existing ones.

    Args:
        seed (int): Model seed.
        norm_enabled (bool): Whether norm slots are batch normalizations (scale,
            shift, running statistics) or plain per-channel biases.
    """

    def __init__(self, seed : int = 0, norm_enabled : bool = True):
        self.seed = seed
        self.norm_enabled = norm_enabled
        self._params : Dict[str, Tensor] = {}
        self._buffers : Dict[str, np.ndarray] = {}

    def _rng(self, name : str) -> np.random.Generator:
        entropy = [self.seed, zlib.crc32(name.encode("utf-8"))]
        return np.random.default_rng(np.random.SeedSequence(entropy))

    def _declare(self, name : str, value : np.ndarray) -> Tensor:
        if name in self._params or name in self._buffers:
            raise ParamsMismatchError(f"parameter '{name}' declared twice")
        tensor = Tensor(value, requires_grad = True, name = name)
        self._params[name] = tensor
        return tensor

    def kernel(self, name : str, shape : Tuple[int, ...]) -> Tensor:
        fan_in = int(np.prod(shape[1:]))
        bound = np.sqrt(6.0 / fan_in)
        return self._declare(name, self._rng(name).uniform(-bound, bound, size = shape))

    def ones(self, name : str, shape : Tuple[int, ...]) -> Tensor:
        return self._declare(name, np.ones(shape))

    def zeros(self, name : str, shape : Tuple[int, ...]) -> Tensor:
        return self._declare(name, np.zeros(shape))

    def buffer(self, name : str, value : np.ndarray) -> np.ndarray:
        if name in self._params or name in self._buffers:
            raise ParamsMismatchError(f"buffer '{name}' declared twice")
        self._buffers[name] = np.array(value, dtype = np.float64)
        return self._buffers[name]

    def __getitem__(self, name : str) -> Tensor:
        try:
            return self._params[name]
        except KeyError:
            raise ParamsMismatchError(f"no parameter named '{name}'") from None

    def __contains__(self, name : str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def get_buffer(self, name : str) -> np.ndarray:
        try:
            return self._buffers[name]
        except KeyError:
            raise ParamsMismatchError(f"no buffer named '{name}'") from None

    def items(self) -> Iterator[Tuple[str, Tensor]]:
        return iter(self._params.items())

    def buffers(self) -> Iterator[Tuple[str, np.ndarray]]:
        return iter(self._buffers.items())

    def count(self) -> int:
        """Number of learnable scalars (buffers excluded)."""
        return sum(t.size for t in self._params.values())

    def zero_grad(self):
        for t in self._params.values():
            t.grad = None

    def state(self) -> Tuple[Dict[str, np.ndarray], Dict[str, np.ndarray]]:
        """Copies of all parameter values and buffers, in declaration order."""
        return (
            {name: t.data.copy() for name, t in self._params.items()},
            {name: b.copy() for name, b in self._buffers.items()}
        )

    def load(self, params : Dict[str, np.ndarray], buffers : Optional[Dict[str, np.ndarray]] = None):
        """Overwrites every parameter (and buffer) value in place.

        Raises:
            ParamsMismatchError: If names or shapes differ from the declared set.
        """
        self._load_into("parameter", {n: t.data for n, t in self._params.items()}, params)
        if buffers is not None:
            self._load_into("buffer", self._buffers, buffers)

    @staticmethod
    def _load_into(kind : str, target : Dict[str, np.ndarray], source : Dict[str, np.ndarray]):
        missing = sorted(set(target) - set(source))
        extra = sorted(set(source) - set(target))
        if missing or extra:
            raise ParamsMismatchError(f"{kind} names differ: missing={missing[:5]} unexpected={extra[:5]}")
        for name, value in source.items():
            value = np.asarray(value, dtype = np.float64)
            if value.shape != target[name].shape:
                raise ParamsMismatchError(
                    f"{kind} '{name}' has shape {list(value.shape)}, "
                    f"expected {list(target[name].shape)}"
                )
        for name, value in source.items():
            target[name][...] = value


class ParamScope:
    """A name prefix into a :class:`ParamStore`.

    Examples:
        >>> store = ParamStore(seed = 0)
        >>> scope = ParamScope(store, "stem")
        >>> scope.kernel("conv7", (8, 3, 7, 7)).name
        'stem.conv7'
    """

    def __init__(self, store : ParamStore, prefix : str = ""):
        self.store = store
        self.prefix = prefix

    def name(self, leaf : str) -> str:
        return f"{self.prefix}.{leaf}" if self.prefix else leaf

    def child(self, leaf : str) -> "ParamScope":
        return ParamScope(self.store, self.name(leaf))

    def kernel(self, leaf : str, shape : Tuple[int, ...]) -> Tensor:
        return self.store.kernel(self.name(leaf), shape)

    def __getitem__(self, leaf : str) -> Tensor:
        return self.store[self.name(leaf)]

    def declare_norm(self, leaf : str, channels : int):
        """Declares one norm slot: batchnorm scale/shift/statistics, or a bias when norm is off."""
        slot = self.child(leaf)
        if self.store.norm_enabled:
            self.store.ones(slot.name("gamma"), (channels,))
            self.store.zeros(slot.name("beta"), (channels,))
            self.store.buffer(slot.name("running_mean"), np.zeros(channels))
            self.store.buffer(slot.name("running_var"), np.ones(channels))
        else:
            self.store.zeros(slot.name("beta"), (channels,))

    def norm(self, x : Tensor, leaf : str, training : bool) -> Tensor:
        slot = self.child(leaf)
        if not self.store.norm_enabled:
            return ops.channel_bias(x, slot["beta"])
        return ops.batchnorm(
            x, slot["gamma"], slot["beta"],
            self.store.get_buffer(slot.name("running_mean")),
            self.store.get_buffer(slot.name("running_var")),
            training
        )
