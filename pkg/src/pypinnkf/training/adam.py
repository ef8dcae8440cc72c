"""
    ADAM trainer: the ADAM-PINN baseline and the memetic refinement step of the NSGA-III trainer.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from pypinnkf.autodiff.network import ParameterVector
from pypinnkf.core import constants as const
from pypinnkf.core.structures import (
    AdamError, CollocationSets, FloatArray, LossWeights, NetworkArchitecture, ObjectiveVector, ProblemSpec,
)
from pypinnkf.core.utilities import make_rng
from pypinnkf.tools.logger import get_logger
from pypinnkf.training.losses import UNIT_WEIGHTS, DataSet, loss_and_grad, objectives, residual_batch, weighted_scalar

logger = get_logger(__name__)

TRAJECTORY_COLUMNS = ("epoch", "l_res", "l_ic", "l_bc", "l_data", "scalar")


@dataclass(frozen=True)
class AdamState:
    m: FloatArray
    v: FloatArray
    step: int = 0
    lr: float = const.ADAM_LR
    beta1: float = const.ADAM_BETA1
    beta2: float = const.ADAM_BETA2
    eps: float = const.ADAM_EPS

    def __post_init__(self):
        if self.m.shape != self.v.shape:
            raise ValueError(f"Moment shapes differ: {self.m.shape} vs {self.v.shape}")
        if self.step < 0:
            raise ValueError(f"step must be >= 0, got {self.step}")

    @classmethod
    def zeros(cls, n: int, **hyper) -> "AdamState":
        return cls(m=np.zeros(n), v=np.zeros(n), **hyper)


def adam_step(state: AdamState, params: ParameterVector, grad: FloatArray) -> tuple[AdamState, ParameterVector]:
    """Bias-corrected ADAM update. A non-finite gradient raises AdamError and leaves `state` as it was."""
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != params.shape or grad.shape != state.m.shape:
        raise ValueError(f"Shape mismatch: params {params.shape}, grad {grad.shape}, state {state.m.shape}")
    if not np.all(np.isfinite(grad)):
        raise AdamError(f"Non-finite gradient at step {state.step + 1} ({int((~np.isfinite(grad)).sum())} entries)")

    step = state.step + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = m / (1.0 - state.beta1 ** step)
    v_hat = v / (1.0 - state.beta2 ** step)
    new_params = params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)

    new_state = AdamState(m=m, v=v, step=step, lr=state.lr, beta1=state.beta1, beta2=state.beta2, eps=state.eps)
    return new_state, new_params


@dataclass
class AdamResult:
    params: ParameterVector
    state: AdamState
    initial: ObjectiveVector
    final: ObjectiveVector
    ''' Losses at the returned parameters '''
    initial_scalar: float
    final_scalar: float
    trajectory: list[dict[str, float]] = field(default_factory=list)
    stopped: bool = False
    ''' `should_stop` ended the run before `epochs` steps '''


def train_adam(params: ParameterVector, arch: NetworkArchitecture, spec: ProblemSpec, coll: CollocationSets,
               data: DataSet | None, epochs: int, w: LossWeights = UNIT_WEIGHTS, seed: int = 0,
               state: AdamState | None = None, record: bool = True,
               should_stop: Callable[[], bool] | None = None) -> AdamResult:
    """
    `epochs` gradient steps on the weighted scalar loss. Burgers uses the full residual set; TFMDWE
    draws a fresh seeded residual subsample every epoch. The trajectory row of an epoch holds the
    losses at the parameters before that epoch's step; the final losses are evaluated once more at
    the returned parameters, on the first epoch's residual subset so they compare with the initial ones.
    `should_stop` is polled after every step.
    """
    if epochs < 1:
        raise ValueError(f"epochs must be >= 1, got {epochs}")

    rng = make_rng(seed, "adam")
    params = np.array(params, dtype=np.float64, copy=True)
    state = state if state is not None else AdamState.zeros(params.size)
    trajectory: list[dict[str, float]] = []
    first: tuple[ObjectiveVector, float, np.ndarray | None] | None = None
    stopped = False

    for epoch in range(1, epochs + 1):
        res_idx = residual_batch(spec, coll.n_res, rng)
        obj, scalar, grad = loss_and_grad(params, arch, spec, coll, data, w, res_idx)
        if first is None:
            first = (obj, scalar, res_idx)
        if record:
            trajectory.append({"epoch": epoch, "l_res": obj.l_res, "l_ic": obj.l_ic, "l_bc": obj.l_bc,
                               "l_data": obj.l_data, "scalar": scalar})
        logger.debug(f"epoch {epoch}: scalar={scalar:.6e}")
        state, params = adam_step(state, params, grad)
        if should_stop is not None and epoch < epochs and should_stop():
            logger.debug(f"Stopped after {epoch} of {epochs} epochs")
            stopped = True
            break

    initial, initial_scalar, first_idx = first
    final = objectives(params, arch, spec, coll, data, first_idx)
    final_scalar = weighted_scalar(final, w)
    if final_scalar > initial_scalar:
        logger.warning(f"Final weighted loss {final_scalar:.4e} above initial {initial_scalar:.4e} after {state.step} steps")

    return AdamResult(params=params, state=state, initial=initial, final=final, initial_scalar=initial_scalar,
                      final_scalar=final_scalar, trajectory=trajectory, stopped=stopped)
