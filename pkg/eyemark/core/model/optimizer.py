"""RMSprop over named parameter arrays."""

import logging
from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

from core.errors import NonFiniteGradientError, ParamsMismatchError
from core.nn.params import ParamStore

logger = logging.getLogger(__name__)


class OptimizerConfig(BaseModel):
    """RMSprop hyperparameters.

    Attributes:
        lr (float): Learning rate; 0 freezes the parameters.
        rho (float): Decay of the squared-gradient average.
        eps (float): Added to the root of the average.
    """
    model_config = ConfigDict(extra = "forbid")

    lr : float = 2.5e-4
    rho : float = 0.99
    eps : float = 1e-8

    @field_validator("lr")
    @classmethod
    def _lr_nonnegative(cls, value : float) -> float:
        if value < 0:
            raise ValueError("train.optimizer.lr must not be negative")
        return value

    @field_validator("rho")
    @classmethod
    def _rho_range(cls, value : float) -> float:
        if not 0 <= value < 1:
            raise ValueError("train.optimizer.rho must lie in [0, 1)")
        return value

    @field_validator("eps")
    @classmethod
    def _eps_positive(cls, value : float) -> float:
        if value <= 0:
            raise ValueError("train.optimizer.eps must be positive")
        return value


@dataclass
class OptimizerState:
    """Squared-gradient accumulators, one per parameter name."""
    lr : float = 2.5e-4
    rho : float = 0.99
    eps : float = 1e-8
    accumulators : Dict[str, np.ndarray] = field(default_factory = dict)

    @classmethod
    def from_config(cls, config : OptimizerConfig) -> "OptimizerState":
        return cls(lr = config.lr, rho = config.rho, eps = config.eps)


def check_finite(grads : Dict[str, np.ndarray]):
    """Raises NonFiniteGradientError naming the first parameter with a NaN/Inf gradient."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(name)


def rmsprop_update(
    params : Dict[str, np.ndarray],
    grads : Dict[str, np.ndarray],
    state : OptimizerState
) -> Tuple[Dict[str, np.ndarray], OptimizerState]:
    """One RMSprop step.

    ``acc <- rho * acc + (1 - rho) * g^2`` and ``p <- p - lr * g / (sqrt(acc) + eps)``.
    Accumulators start at zero. Inputs are not modified.

    Args:
        params (Dict[str, np.ndarray]): Current parameter values.
        grads (Dict[str, np.ndarray]): Gradient per parameter name, same shapes.
        state (OptimizerState): Accumulators and hyperparameters.

    Returns:
        Tuple[Dict[str, np.ndarray], OptimizerState]: Updated values and state.

    Raises:
        NonFiniteGradientError: If a gradient holds NaN or Inf; nothing is updated.
        ParamsMismatchError: If a gradient's name or shape does not match.
    """
    check_finite(grads)
    updated : Dict[str, np.ndarray] = {}
    accumulators : Dict[str, np.ndarray] = dict(state.accumulators)
    for name, value in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(value)
        if g.shape != value.shape:
            raise ParamsMismatchError(f"gradient for '{name}' has shape {list(g.shape)}, expected {list(value.shape)}")
        acc = accumulators.get(name)
        if acc is None:
            acc = np.zeros_like(value)
        acc = state.rho * acc + (1.0 - state.rho) * g * g
        accumulators[name] = acc
        updated[name] = value - state.lr * g / (np.sqrt(acc) + state.eps)
    new_state = OptimizerState(lr = state.lr, rho = state.rho, eps = state.eps, accumulators = accumulators)
    return updated, new_state


def apply_rmsprop(store : ParamStore, state : OptimizerState) -> OptimizerState:
    """Applies one step to a store using the gradients left by the last backward pass."""
    params = {name: t.data for name, t in store.items()}
    grads = {name: t.grad for name, t in store.items() if t.grad is not None}
    updated, state = rmsprop_update(params, grads, state)
    for name, t in store.items():
        t.data = updated[name]
    return state
