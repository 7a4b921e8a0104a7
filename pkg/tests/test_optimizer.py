import numpy as np
import pytest

from core.errors import NonFiniteGradientError, ParamsMismatchError
from core.model import OptimizerConfig, OptimizerState, rmsprop_update


def test_zero_gradient_keeps_parameters():
    params = {"w": np.array([1.0, -2.0])}
    updated, state = rmsprop_update(params, {"w": np.zeros(2)}, OptimizerState())
    np.testing.assert_array_equal(updated["w"], params["w"])
    np.testing.assert_array_equal(state.accumulators["w"], np.zeros(2))


def test_first_step_closed_form():
    state = OptimizerState(lr = 2.5e-4, rho = 0.99, eps = 1e-8)
    updated, state = rmsprop_update({"w": np.array([0.5])}, {"w": np.array([2.0])}, state)
    assert state.accumulators["w"][0] == pytest.approx(0.04)
    assert updated["w"][0] == pytest.approx(0.5 - 2.5e-4 * 2.0 / (0.2 + 1e-8), rel = 1e-12)


def test_two_steps():
    state = OptimizerState(lr = 0.1, rho = 0.9, eps = 1e-8)
    params = {"w": np.array([1.0])}
    params, state = rmsprop_update(params, {"w": np.array([1.0])}, state)
    params, state = rmsprop_update(params, {"w": np.array([-2.0])}, state)
    acc1 = 0.1
    acc2 = 0.9 * acc1 + 0.1 * 4.0
    expected = 1.0 - 0.1 / (np.sqrt(acc1) + 1e-8) + 0.1 * 2.0 / (np.sqrt(acc2) + 1e-8)
    assert params["w"][0] == pytest.approx(expected, rel = 1e-12)
    assert state.accumulators["w"][0] == pytest.approx(acc2)


def test_inputs_untouched():
    params = {"w": np.ones(3)}
    grads = {"w": np.ones(3)}
    state = OptimizerState()
    rmsprop_update(params, grads, state)
    np.testing.assert_array_equal(params["w"], np.ones(3))
    assert state.accumulators == {}


@pytest.mark.parametrize("bad", [np.nan, np.inf])
def test_non_finite_gradient_names_parameter(bad):
    params = {"a": np.ones(2), "b": np.ones(2)}
    with pytest.raises(NonFiniteGradientError) as excinfo:
        rmsprop_update(params, {"a": np.ones(2), "b": np.array([1.0, bad])}, OptimizerState())
    assert excinfo.value.name == "b"


def test_shape_mismatch():
    with pytest.raises(ParamsMismatchError):
        rmsprop_update({"w": np.ones(2)}, {"w": np.ones(3)}, OptimizerState())


def test_config_defaults_and_bounds():
    state = OptimizerState.from_config(OptimizerConfig())
    assert (state.lr, state.rho, state.eps) == (2.5e-4, 0.99, 1e-8)
    with pytest.raises(ValueError):
        OptimizerConfig(lr = -1.0)
    with pytest.raises(ValueError):
        OptimizerConfig(rho = 1.0)
