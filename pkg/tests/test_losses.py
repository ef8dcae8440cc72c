"""
Tests for the PINN loss components.

- analytic-solution and zero-network oracles for the four components
- weighted scalarization
- loss gradients against finite differences, including a trainable coefficient
"""

import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

# Add src to path
sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from pypinnkf.autodiff import AnalyticField, init_parameters
from pypinnkf.core.enums import E_Mode, E_Problem
from pypinnkf.core.structures import AnalysisData, LossWeights, NetworkArchitecture, ObjectiveVector, ObservationSet
from pypinnkf.problems import exact_field, make_architecture, make_problem_spec
from pypinnkf.training.losses import (
    UNIT_WEIGHTS, loss_and_grad, objective_nodes, objectives, residual_batch, weighted_scalar,
)
from pypinnkf.training.observations import make_observations, sample_collocation


def _components(nodes) -> np.ndarray:
    return np.array([float(n.value) for n in nodes])


def test_analytic_solution_has_small_objectives():
    spec = replace(make_problem_spec(E_Problem.TFMDWE, E_Mode.FORWARD, misspecified=False), caputo_steps=200)
    coll = sample_collocation(spec, seed=0, n_res=100)
    obs = make_observations(spec, 0.0, (5, 4), seed=0)
    nodes = objective_nodes(exact_field(), 0.5, spec, coll, obs)
    assert np.all(_components(nodes) < 1e-4)


def test_zero_output_network_on_burgers_initial_condition(burgers_forward, small_arch):
    params = init_parameters(small_arch, seed=0)
    w_slice, b_slice, _ = small_arch.layer_slices()[-1]
    params[w_slice] = 0.0
    params[b_slice] = 0.0
    coll = sample_collocation(burgers_forward, seed=0, n_ic=200, n_bc=10, n_res=20)
    obj = objectives(params, small_arch, burgers_forward, coll, None)
    assert obj.l_ic == pytest.approx(np.mean(np.sin(np.pi * coll.ic_points[:, 0]) ** 2))
    assert obj.l_ic == pytest.approx(0.5, abs=0.01)
    # the wall points at t = 0 carry the round-off of sin(±π)
    assert obj.l_bc < 1e-30 and obj.l_res == 0.0


def test_empty_data_gives_zero_data_loss(burgers_forward, burgers_sets, small_arch):
    coll, _ = burgers_sets
    params = init_parameters(small_arch, seed=0)
    assert objectives(params, small_arch, burgers_forward, coll, None).l_data == 0.0
    assert objectives(params, small_arch, burgers_forward, coll, ObservationSet.empty()).l_data == 0.0


def test_data_loss_scales_quadratically(tfmdwe_forward):
    coll = sample_collocation(tfmdwe_forward, seed=0, n_res=5)
    obs = make_observations(tfmdwe_forward, 0.0, (4, 3), seed=0)
    offset = np.linspace(-1, 1, len(obs))
    field = AnalyticField(u=lambda x, t: np.zeros_like(x), u_xx=lambda x, t: np.zeros_like(x))

    def l_data(c):
        data = ObservationSet(points=obs.points, values=c * offset, sigma_obs=obs.sigma_obs)
        return float(objective_nodes(field, 0.5, tfmdwe_forward, coll, data)[3].value)

    assert l_data(3.0) == pytest.approx(9.0 * l_data(1.0), rel=1e-12)


def test_analysis_mean_is_a_data_set(burgers_forward, burgers_sets, small_arch):
    coll, obs = burgers_sets
    params = init_parameters(small_arch, seed=0)
    analysis = AnalysisData(points=obs.points, analysis=np.vstack([obs.values, obs.values]), mean=obs.values)
    a = objectives(params, small_arch, burgers_forward, coll, analysis)
    b = objectives(params, small_arch, burgers_forward, coll, obs)
    assert a == b


def test_weighted_scalar():
    assert weighted_scalar(ObjectiveVector(1, 2, 3, 4), UNIT_WEIGHTS) == 10.0
    assert weighted_scalar(ObjectiveVector(1.5, 2, 3, 4), LossWeights(1.0, 0.0, 0.0, 0.0)) == 1.5

    rng = np.random.default_rng(0)
    for _ in range(20):
        o, w = rng.uniform(0, 5, 4), rng.uniform(0, 2, 4)
        expected = sum(a * b for a, b in zip(o, w))
        assert weighted_scalar(ObjectiveVector.from_array(o), LossWeights(*w)) == pytest.approx(expected, rel=1e-12)


def test_invalid_weights_are_rejected():
    with pytest.raises(ValueError):
        LossWeights(0.0, 0.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        LossWeights(-1.0, 1.0, 1.0, 1.0)


def _check_gradient(params, arch, spec, coll, data, w=UNIT_WEIGHTS, n_coords=15):
    obj, scalar, grad = loss_and_grad(params, arch, spec, coll, data, w)
    assert scalar == pytest.approx(weighted_scalar(obj, w), rel=1e-12)
    f = lambda p: weighted_scalar(objectives(p, arch, spec, coll, data), w)
    rng = np.random.default_rng(0)
    coords = rng.choice(params.size, size=min(n_coords, params.size), replace=False)
    if arch.physics_index is not None:
        coords = np.append(coords, arch.physics_index)
    h = 1e-5
    for i in coords:
        p, m = params.copy(), params.copy()
        p[i] += h
        m[i] -= h
        fd = (f(p) - f(m)) / (2 * h)
        assert abs(grad[i] - fd) <= 1e-4 * max(abs(fd), 1e-4) + 1e-8, f"coordinate {i}: {grad[i]} vs {fd}"


def test_burgers_inverse_gradient(burgers_inverse, burgers_sets):
    coll, obs = burgers_sets
    arch = NetworkArchitecture(layer_widths=(2, 6, 6, 1), physics_slots=1)
    params = init_parameters(arch, seed=2, physics=burgers_inverse.physics)
    _check_gradient(params, arch, burgers_inverse, coll, obs, LossWeights(1.0, 2.0, 0.5, 3.0))


def test_tfmdwe_inverse_gradient():
    spec = replace(make_problem_spec(E_Problem.TFMDWE, E_Mode.INVERSE), caputo_steps=10)
    arch = NetworkArchitecture(layer_widths=(2, 5, 1), physics_slots=1)
    coll = sample_collocation(spec, seed=0, n_ic=8, n_bc=8, n_res=12)
    obs = make_observations(spec, 0.2, (3, 3), seed=0)
    params = init_parameters(arch, seed=1, physics=spec.physics)
    _check_gradient(params, arch, spec, coll, obs)


def test_objectives_are_deterministic(burgers_forward, burgers_sets):
    coll, obs = burgers_sets
    arch = make_architecture(burgers_forward)
    params = init_parameters(arch, seed=0)
    assert objectives(params, arch, burgers_forward, coll, obs) == objectives(params, arch, burgers_forward, coll, obs)


def test_residual_batch_only_subsamples_tfmdwe(burgers_forward, tfmdwe_forward):
    rng = np.random.default_rng(0)
    assert residual_batch(burgers_forward, 10_000, rng) is None
    assert residual_batch(tfmdwe_forward, 100, rng, batch=200) is None
    idx = residual_batch(tfmdwe_forward, 10_000, rng)
    assert idx.size == 2_000 and np.unique(idx).size == 2_000 and np.all(np.diff(idx) > 0)
