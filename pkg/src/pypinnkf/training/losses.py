"""
    PINN loss components.

    The four components are mean squared misfits, ordered (residual, initial condition, boundary
    condition, data) everywhere: in `ObjectiveVector`, in `LossWeights.as_array()` and as the
    NSGA-III objective columns.
"""

from __future__ import annotations

from typing import Protocol

import numpy as np

from pypinnkf.autodiff.graph import Node, constant, leaf
from pypinnkf.autodiff.network import EvaluationBundle, NetworkField, ParameterVector, physics_node
from pypinnkf.core import constants as const
from pypinnkf.core.enums import E_Derivative, E_Problem
from pypinnkf.core.structures import (
    CollocationSets, FloatArray, LossWeights, NetworkArchitecture, ObjectiveVector, ProblemSpec,
)
from pypinnkf.problems import exact_solution, history_points, initial_condition, residual_burgers, residual_tfmdwe

UNIT_WEIGHTS = LossWeights()


class Field(Protocol):
    def bundle(self, points: FloatArray, order) -> EvaluationBundle: ...


class DataSet(Protocol):
    points: FloatArray

    def __len__(self) -> int: ...

    @property
    def targets(self) -> FloatArray: ...


def residual_node(spec: ProblemSpec, field: Field, points: FloatArray, physics: Node | float,
                  forcing_factor: FloatArray | None = None) -> Node:
    """PDE residual at each point, as a graph node of shape (n,)."""
    if spec.kind == E_Problem.BURGERS:
        bundle = field.bundle(points, {E_Derivative.U, E_Derivative.U_T, E_Derivative.U_X, E_Derivative.U_XX})
        return residual_burgers(bundle, physics)

    steps = spec.caputo_steps
    n = points.shape[0]
    history = field.bundle(history_points(points, steps), {E_Derivative.U}).node(E_Derivative.U).reshape(n, steps + 1)
    u_xx = field.bundle(points, {E_Derivative.U_XX}).node(E_Derivative.U_XX)
    return residual_tfmdwe(history, u_xx, physics, points[:, 0], points[:, 1], forcing_factor)


def condition_targets(spec: ProblemSpec, points: FloatArray) -> FloatArray:
    """Prescribed values on initial/boundary points."""
    x, t = points[:, 0], points[:, 1]
    if spec.kind == E_Problem.TFMDWE:
        return exact_solution(x, t)
    return np.where(t <= spec.t_range[0], initial_condition(x), 0.0)


def _mse(pred: Node, target: FloatArray) -> Node:
    return (pred - target).square().mean()


def objective_nodes(field: Field, physics: Node | float, spec: ProblemSpec, coll: CollocationSets,
                    data: DataSet | None, res_idx: np.ndarray | None = None) -> tuple[Node, Node, Node, Node]:
    """
    (l_res, l_ic, l_bc, l_data) as scalar graph nodes. `res_idx` restricts the residual to a subset
    of the residual points; an empty or missing data set gives l_data = 0.
    """
    res_points = coll.res_points if res_idx is None else coll.res_points[res_idx]
    factor = coll.forcing_noise
    if factor is not None and res_idx is not None:
        factor = factor[res_idx]

    l_res = residual_node(spec, field, res_points, physics, factor).square().mean()

    u_ic = field.bundle(coll.ic_points, {E_Derivative.U}).node(E_Derivative.U)
    l_ic = _mse(u_ic, condition_targets(spec, coll.ic_points))

    u_bc = field.bundle(coll.bc_points, {E_Derivative.U}).node(E_Derivative.U)
    l_bc = _mse(u_bc, condition_targets(spec, coll.bc_points))

    if data is None or len(data) == 0:
        l_data = constant(0.0)
    else:
        u_d = field.bundle(data.points, {E_Derivative.U}).node(E_Derivative.U)
        l_data = _mse(u_d, np.asarray(data.targets, dtype=np.float64))

    return l_res, l_ic, l_bc, l_data


def weighted_node(nodes: tuple[Node, Node, Node, Node], w: LossWeights) -> Node:
    total = None
    for weight, node in zip(w.as_array(), nodes):
        if weight == 0:
            continue
        term = node * float(weight)
        total = term if total is None else total + term
    return total


def weighted_scalar(obj: ObjectiveVector, w: LossWeights) -> float:
    """Dot product of the components and the weights."""
    return float(np.dot(obj.as_array(), w.as_array()))


def objectives(params: ParameterVector, arch: NetworkArchitecture, spec: ProblemSpec, coll: CollocationSets,
               data: DataSet | None, res_idx: np.ndarray | None = None) -> ObjectiveVector:
    theta = constant(params)
    nodes = objective_nodes(NetworkField(theta, arch), physics_node(theta, arch, spec.physics), spec, coll, data, res_idx)
    return ObjectiveVector(*(float(n.value) for n in nodes))


def loss_and_grad(params: ParameterVector, arch: NetworkArchitecture, spec: ProblemSpec, coll: CollocationSets,
                  data: DataSet | None, w: LossWeights = UNIT_WEIGHTS,
                  res_idx: np.ndarray | None = None) -> tuple[ObjectiveVector, float, FloatArray]:
    """Components, weighted scalar and its parameter gradient from one forward/backward pass."""
    theta = leaf(params, name="theta")
    nodes = objective_nodes(NetworkField(theta, arch), physics_node(theta, arch, spec.physics), spec, coll, data, res_idx)
    total = weighted_node(nodes, w)
    total.backward()
    grad = theta.grad.copy() if theta.grad is not None else np.zeros_like(theta.value)
    obj = ObjectiveVector(*(float(n.value) for n in nodes))
    return obj, float(total.value), grad


def residual_batch(spec: ProblemSpec, n_res: int, rng: np.random.Generator,
                   batch: int = const.RES_BATCH_SIZE) -> np.ndarray | None:
    """Seeded residual subsample for TFMDWE (Caputo history cost); None (full set) for Burgers."""
    if spec.kind != E_Problem.TFMDWE or n_res <= batch:
        return None
    return np.sort(rng.choice(n_res, size=batch, replace=False))
