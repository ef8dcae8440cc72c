"""
Tests for the ADAM optimizer and trainer.

- single-step behaviour (zero gradient, fixed gradient, rejected gradients)
- convergence on a convex bowl
- train_adam: trajectory, determinism, loss decrease, final losses at the returned parameters, early stop
"""

import sys
from pathlib import Path

import numpy as np
import pytest

# Add src to path
sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from pypinnkf.autodiff import init_parameters
from pypinnkf.core import constants as const
from pypinnkf.core.structures import AdamError
from pypinnkf.training.adam import TRAJECTORY_COLUMNS, AdamState, adam_step, train_adam
from pypinnkf.training.losses import UNIT_WEIGHTS, objectives, weighted_scalar
from pypinnkf.training.observations import sample_collocation


def test_zero_gradient_leaves_parameters_unchanged():
    params = np.array([1.0, -2.0, 3.0])
    state, new = adam_step(AdamState.zeros(3), params, np.zeros(3))
    assert np.array_equal(new, params)
    assert state.step == 1


def test_fixed_gradient_moves_by_learning_rate():
    g = np.array([0.5, -3.0, 1e-3])
    params = np.zeros(3)
    state = AdamState.zeros(3)
    for _ in range(1000):
        before = params
        state, params = adam_step(state, params, g)
    # with a constant gradient the bias-corrected step tends to -lr * sign(g)
    assert np.allclose(params - before, -const.ADAM_LR * np.sign(g), rtol=1e-3)
    assert np.allclose(params, -1000 * const.ADAM_LR * np.sign(g), rtol=1e-2)


def test_quadratic_bowl_converges():
    target = np.array([0.3, -1.2, 2.0, 0.0])
    scale = np.array([1.0, 4.0, 0.5, 2.0])
    params = np.zeros(4)
    state = AdamState.zeros(4, lr=1e-2)
    for _ in range(3000):
        state, params = adam_step(state, params, 2.0 * scale * (params - target))
    # ADAM settles within about one step length of the minimum
    assert np.max(np.abs(params - target)) < 2e-2


def test_non_finite_gradient_is_rejected():
    state = AdamState.zeros(2)
    with pytest.raises(AdamError):
        adam_step(state, np.zeros(2), np.array([np.nan, 1.0]))
    assert state.step == 0 and np.all(state.m == 0)
    with pytest.raises(ValueError):
        adam_step(state, np.zeros(2), np.zeros(3))


def test_train_adam_records_finite_trajectory(burgers_forward, burgers_sets, small_arch):
    coll, obs = burgers_sets
    params = init_parameters(small_arch, seed=0)
    result = train_adam(params, small_arch, burgers_forward, coll, obs, epochs=30, seed=1)

    assert len(result.trajectory) == 30
    assert list(result.trajectory[0]) == list(TRAJECTORY_COLUMNS)
    assert [row["epoch"] for row in result.trajectory] == list(range(1, 31))
    assert all(np.isfinite(row["scalar"]) for row in result.trajectory)
    assert result.trajectory[0]["scalar"] == result.initial_scalar
    assert result.state.step == 30
    assert result.final_scalar < result.initial_scalar
    # input left untouched
    assert np.array_equal(params, init_parameters(small_arch, seed=0))


def test_train_adam_is_deterministic(tfmdwe_forward, small_arch):
    coll = sample_collocation(tfmdwe_forward, seed=0, n_ic=10, n_bc=10, n_res=50)
    params = init_parameters(small_arch, seed=0)
    a = train_adam(params, small_arch, tfmdwe_forward, coll, None, epochs=3, seed=5, record=False)
    b = train_adam(params, small_arch, tfmdwe_forward, coll, None, epochs=3, seed=5, record=False)
    assert np.array_equal(a.params, b.params)
    assert a.trajectory == []


def test_state_carries_over_between_calls(burgers_forward, burgers_sets, small_arch):
    coll, _ = burgers_sets
    params = init_parameters(small_arch, seed=0)
    warm = train_adam(params, small_arch, burgers_forward, coll, None, epochs=3, seed=0)
    more = train_adam(warm.params, small_arch, burgers_forward, coll, None, epochs=2, seed=0, state=warm.state)
    assert more.state.step == 5
    assert np.isfinite(more.final_scalar)


def test_invalid_epochs(burgers_forward, burgers_sets, small_arch):
    coll, obs = burgers_sets
    with pytest.raises(ValueError):
        train_adam(init_parameters(small_arch, seed=0), small_arch, burgers_forward, coll, obs, epochs=0)


def test_final_losses_are_those_of_the_returned_parameters(burgers_forward, burgers_sets, small_arch):
    coll, obs = burgers_sets
    result = train_adam(init_parameters(small_arch, seed=2), small_arch, burgers_forward, coll, obs, epochs=5, seed=0)
    again = objectives(result.params, small_arch, burgers_forward, coll, obs, None)
    assert result.final == again
    assert result.final_scalar == weighted_scalar(again, UNIT_WEIGHTS)
    # the last trajectory row is taken before the last step
    assert result.trajectory[-1]["scalar"] != result.final_scalar


def test_should_stop_ends_training_early(burgers_forward, burgers_sets, small_arch):
    coll, obs = burgers_sets
    calls = []

    def stop():
        calls.append(1)
        return len(calls) >= 3

    result = train_adam(init_parameters(small_arch, seed=0), small_arch, burgers_forward, coll, obs,
                        epochs=50, seed=0, should_stop=stop)
    assert result.stopped
    assert result.state.step == 3 and len(result.trajectory) == 3
    assert np.isfinite(result.final_scalar)

    full = train_adam(init_parameters(small_arch, seed=0), small_arch, burgers_forward, coll, obs,
                      epochs=3, seed=0, should_stop=lambda: False)
    assert not full.stopped and np.array_equal(full.params, result.params)
