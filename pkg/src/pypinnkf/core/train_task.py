"""PyPinnKF population task.

A `trainTask` encapsulates:
- the task kind (E_TaskKind)
- the shared training context (network layout, problem, point sets, data)
- the per-individual request container, filled in place

Schedulers should treat a task as a black box and only call:
- `await task.execute_async()`  (preferred)
- or `task.execute()`           (sync)

The work is blocking numpy; `execute_async()` runs it in a background thread.
"""

from __future__ import annotations

import asyncio
import time
from typing import Callable

import numpy as np

from pypinnkf.core import constants as const
from pypinnkf.core.enums import E_Problem, E_TaskKind
from pypinnkf.core.structures import TrainingContext, trainRequest
from pypinnkf.tools.logger import get_logger
from pypinnkf.training.adam import train_adam
from pypinnkf.training.losses import objectives, weighted_scalar

logger = get_logger(__name__)


def _evaluate(ctx: TrainingContext, req: trainRequest) -> None:
    if req.cancelled:
        return
    params = req.genome if req.params is None else req.params
    req.objectives = objectives(params, ctx.arch, ctx.spec, ctx.coll, ctx.data, req.res_idx)
    req.scalar = weighted_scalar(req.objectives, ctx.weights)


def _refine(ctx: TrainingContext, req: trainRequest) -> None:
    """
    Memetic step: ADAM epochs on the weighted loss from the genome. The refined parameters replace
    the genome only when their weighted loss is finite and no worse than the genome's own.
    """
    start = objectives(req.genome, ctx.arch, ctx.spec, ctx.coll, ctx.data, req.res_idx)
    start_scalar = weighted_scalar(start, ctx.weights)
    result = train_adam(req.genome, ctx.arch, ctx.spec, ctx.coll, ctx.data, req.epochs, ctx.weights,
                        seed=req.seed, record=ctx.record, should_stop=lambda: req.cancelled)
    if req.cancelled:
        return
    req.trajectory = result.trajectory

    refined = objectives(result.params, ctx.arch, ctx.spec, ctx.coll, ctx.data, req.res_idx)
    refined_scalar = weighted_scalar(refined, ctx.weights)
    if refined.is_finite() and (not start.is_finite() or refined_scalar <= start_scalar):
        req.params, req.objectives, req.scalar = result.params, refined, refined_scalar
    else:
        logger.debug(f"Refinement of {req.index} rejected: {refined_scalar:.4e} vs {start_scalar:.4e}")
        req.params, req.objectives, req.scalar = np.array(req.genome, dtype=np.float64, copy=True), start, start_scalar


def estimate_task_memory(ctx: TrainingContext, kind: E_TaskKind) -> int:
    """Rough peak of one task's graph: points evaluated × hidden units × derivative streams."""
    n_res = ctx.coll.n_res
    if ctx.spec.kind == E_Problem.TFMDWE:
        n_res = min(n_res, const.RES_BATCH_SIZE) * (ctx.spec.caputo_steps + 2)
    n_points = n_res + ctx.coll.ic_points.shape[0] + ctx.coll.bc_points.shape[0] + len(ctx.data or ())
    units = sum(ctx.arch.layer_widths[1:])
    streams = 4 if kind == E_TaskKind.REFINE else 1
    est = 8 * n_points * units * streams * 6
    return int(min(max(est, 16 * const.ONE_MB), const.MAX_TASK_MEMORY_ALLOCATION))


class trainTask:
    """A single population task.

    Notes
    -----
    * `execute()` is synchronous and re-raises after marking the request failed.
    * `execute_async()` is the canonical coroutine entrypoint.
    """

    def __init__(self, kind: E_TaskKind, context: TrainingContext, data: trainRequest):

        self.kind = kind
        self.context = context
        self.data: trainRequest = data
        self.trainFcn: Callable[[TrainingContext, trainRequest], None]
        self.result: trainRequest | None = None

        self.setTrainFcn()

        self.est_mem_req_bytes = estimate_task_memory(context, kind)

        self.created_at = time.time()

    @property
    def index(self) -> int:
        return self.data.index

    def setTrainFcn(self):
        """Select the work function for the task kind."""
        if self.kind == E_TaskKind.REFINE:
            self.trainFcn = _refine
        elif self.kind == E_TaskKind.EVALUATE:
            self.trainFcn = _evaluate
        else:
            raise ValueError(f"Unsupported task kind encountered: {self.kind}")

    def cancel(self) -> None:
        """Ask the running work to stop; a cancelled request is left as the pool saw it."""
        self.data.cancelled = True

    def execute(self):
        """Run the work function synchronously."""
        try:
            self.trainFcn(self.context, self.data)
            if self.data.cancelled:
                return
            self.data.success = bool(self.data.objectives is not None and self.data.objectives.is_finite())
            if not self.data.success:
                self.data.message = "non-finite objectives"
        except Exception as e:
            logger.warning(f"{self.kind.name.lower()} task {self.data.index} failed: {e}")
            self.data.success = False
            self.data.message = str(e)
            self.data.objectives = None
            self.data.scalar = np.inf
            raise
        finally:
            self.prepare_results()

    async def execute_async(self) -> trainRequest:
        await asyncio.to_thread(self.execute)
        return self.get_results()

    def prepare_results(self):
        self.result = self.data

    def get_results(self) -> trainRequest | None:
        """Retrieve the request after execution."""
        return self.result
