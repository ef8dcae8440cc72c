"""
    Benchmark problems: problem definitions, architectures and reference solutions.
"""

from __future__ import annotations

import numpy as np

from pypinnkf.core import constants as const
from pypinnkf.core.enums import E_Mode, E_Problem
from pypinnkf.core.structures import FloatArray, NetworkArchitecture, PhysicsParameter, ProblemSpec
from pypinnkf.core.utilities import as_points, check_in_domain

from .burgers import BurgersOracle, cole_hopf, get_oracle, initial_condition, reset_oracle, residual_burgers
from .tfmdwe import (
    CaputoQuadrature, caputo_l1, caputo_node, exact_field, exact_solution, forcing, forcing_node,
    history_points, l1_weights, residual_tfmdwe,
)


def make_problem_spec(problem: E_Problem, mode: E_Mode, misspecified: bool = True) -> ProblemSpec:
    """
    Forward mode solves with the model coefficient (misspecified: ν = 0.02/π for Burgers, 50 %
    relative forcing noise for TFMDWE); inverse mode trains the coefficient from data.
    """
    inverse = mode == E_Mode.INVERSE
    wrong_model = misspecified and not inverse

    if problem == E_Problem.BURGERS:
        physics = PhysicsParameter(
            name="nu",
            true_value=const.BURGERS_NU_TRUE,
            model_value=const.BURGERS_NU_MODEL if wrong_model else const.BURGERS_NU_TRUE,
            trainable=inverse,
            constraint="softplus",
            init_range=const.PHYSICS_INIT_RANGE,
        )
        return ProblemSpec(kind=problem, mode=mode, domain=const.BURGERS_DOMAIN, physics=physics,
                           misspecified=wrong_model)

    if problem == E_Problem.TFMDWE:
        physics = PhysicsParameter(
            name="alpha",
            true_value=const.TFMDWE_ALPHA_TRUE,
            model_value=const.TFMDWE_ALPHA_TRUE,
            trainable=inverse,
            constraint="sigmoid",
            init_range=const.PHYSICS_INIT_RANGE,
        )
        return ProblemSpec(kind=problem, mode=mode, domain=const.TFMDWE_DOMAIN, physics=physics,
                           misspecified=wrong_model,
                           forcing_noise=const.TFMDWE_FORCING_NOISE if wrong_model else 0.0,
                           caputo_steps=const.CAPUTO_HISTORY_STEPS)

    raise ValueError(f"Unsupported problem: {problem}")


def make_architecture(spec: ProblemSpec) -> NetworkArchitecture:
    widths = const.BURGERS_LAYER_WIDTHS if spec.kind == E_Problem.BURGERS else const.TFMDWE_LAYER_WIDTHS
    return NetworkArchitecture(layer_widths=widths, physics_slots=1 if spec.physics.trainable else 0)


def ground_truth(spec: ProblemSpec, x, t) -> FloatArray:
    """
    TFMDWE: t^3 sin x. Burgers: the cached Cole-Hopf table with ν = 0.01/π (exact initial condition
    at t = t_0). Out-of-domain points raise DomainError.
    """
    points = as_points(x, t)
    check_in_domain(points, spec.domain)
    shape = np.broadcast_shapes(np.shape(x), np.shape(t))
    xs, ts = points[:, 0], points[:, 1]

    if spec.kind == E_Problem.TFMDWE:
        return exact_solution(xs, ts).reshape(shape)

    u = get_oracle()(xs, ts)
    at_start = ts <= spec.t_range[0]
    u[at_start] = initial_condition(xs[at_start])
    return u.reshape(shape)


def truth_field(spec: ProblemSpec):
    """Ground truth as a points -> values evaluator."""
    return lambda points: ground_truth(spec, points[:, 0], points[:, 1])


__all__ = ["make_problem_spec", "make_architecture", "ground_truth", "truth_field",
           "BurgersOracle", "cole_hopf", "get_oracle", "initial_condition", "reset_oracle", "residual_burgers",
           "CaputoQuadrature", "caputo_l1", "caputo_node", "exact_field", "exact_solution", "forcing", "forcing_node",
           "history_points", "l1_weights", "residual_tfmdwe"]
