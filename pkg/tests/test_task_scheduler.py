"""
Tests for the population worker pool.

- results and failures come back ordered by task index
- the memory budget caps inflight estimates
- real training tasks: failure capture, worker-count independence, accept-if-better refinement
- a timed-out task is cancelled and not retried
"""

import asyncio
import sys
import time
from pathlib import Path
from types import SimpleNamespace

import numpy as np
import pytest

# Add src to path
sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from pypinnkf.autodiff import init_parameters
from pypinnkf.core.enums import E_TaskKind
from pypinnkf.core.structures import TrainingContext, trainRequest
from pypinnkf.core.task_scheduler import MemoryBudget, run_tasks, taskScheduler
from pypinnkf.core import train_task
from pypinnkf.core.train_task import estimate_task_memory, trainTask
from pypinnkf.training.losses import objectives, weighted_scalar


class _SleepTask:
    """Duck-typed task that sleeps, records concurrency and optionally fails."""

    inflight = 0
    peak = 0

    def __init__(self, index, delay, fail=False, mem=0, kind=E_TaskKind.EVALUATE):
        self.index = index
        self.delay = delay
        self.fail = fail
        self.est_mem_req_bytes = mem
        self.kind = kind

    async def execute_async(self):
        cls = type(self)
        cls.inflight += 1
        cls.peak = max(cls.peak, cls.inflight)
        try:
            await asyncio.sleep(self.delay)
            if self.fail:
                raise RuntimeError(f"task {self.index} failed")
            return self.index * 10
        finally:
            cls.inflight -= 1


@pytest.fixture(autouse=True)
def _reset_counters():
    _SleepTask.inflight = 0
    _SleepTask.peak = 0


def test_results_are_ordered_by_index():
    # later indices finish first
    tasks = [_SleepTask(i, 0.05 * (5 - i)) for i in range(5)]
    results, failures = taskScheduler(tasks, global_max_workers=5, cpu_guard_percent=None).run()
    assert failures == []
    assert [s.task.index for s in results] == list(range(5))
    assert [s.result for s in results] == [0, 10, 20, 30, 40]
    assert all(s.duration_s >= 0 for s in results)


def test_failures_are_captured_not_raised():
    seen = []
    tasks = [_SleepTask(i, 0.0, fail=(i % 2 == 1)) for i in range(6)]
    scheduler = taskScheduler(tasks, global_max_workers=3, cpu_guard_percent=None, on_failure=seen.append)
    results, failures = scheduler.run()
    assert [s.task.index for s in results] == [0, 2, 4]
    assert [f.task.index for f in failures] == [1, 3, 5]
    assert all(isinstance(f.exception, RuntimeError) for f in failures)
    assert all(f.attempt == 1 and "RuntimeError" in f.tb for f in failures)
    assert len(seen) == 3


def test_worker_count_caps_concurrency():
    tasks = [_SleepTask(i, 0.02) for i in range(8)]
    taskScheduler(tasks, global_max_workers=2, cpu_guard_percent=None).run()
    assert _SleepTask.peak <= 2


def test_memory_budget_serializes_large_tasks():
    tasks = [_SleepTask(i, 0.02, mem=600) for i in range(4)]
    taskScheduler(tasks, global_max_workers=4, mem_budget_bytes=1000, cpu_guard_percent=None).run()
    assert _SleepTask.peak == 1


def test_unknown_kind_fails_fast():
    tasks = [_SleepTask(0, 0.0), _SleepTask(1, 0.0, kind="other")]
    results, failures = taskScheduler(tasks, global_max_workers=1, cpu_guard_percent=None).run()
    assert [s.task.index for s in results] == [0]
    assert isinstance(failures[0].exception, ValueError)


def test_memory_budget_tokens():
    async def scenario():
        budget = MemoryBudget(100)
        held = await budget.acquire(250)   # larger than the whole budget: runs alone
        assert held == 100 and budget.free_bytes == 0
        await budget.release(held)
        a = await budget.acquire(60)
        waiter = asyncio.create_task(budget.acquire(60))
        await asyncio.sleep(0.01)
        assert not waiter.done()
        await budget.release(a)
        assert await waiter == 60
        assert budget.used_bytes == 60

    asyncio.run(scenario())


def test_run_tasks_with_no_tasks():
    assert run_tasks([]) == ([], [])


# ---- real training tasks ----
def _context(spec, sets, arch, record=False) -> TrainingContext:
    coll, obs = sets
    return TrainingContext(arch=arch, spec=spec, coll=coll, data=obs, record=record)


def test_training_task_failure_is_reported(burgers_forward, burgers_sets, small_arch):
    ctx = _context(burgers_forward, burgers_sets, small_arch)
    good = trainRequest(index=0, genome=init_parameters(small_arch, seed=0))
    bad = trainRequest(index=1, genome=np.zeros(small_arch.n_params + 3))
    results, failures = run_tasks([trainTask(E_TaskKind.EVALUATE, ctx, r) for r in (good, bad)], workers=2)

    assert [s.task.index for s in results] == [0]
    assert good.success and good.objectives.is_finite()
    assert [f.task.index for f in failures] == [1]
    assert not bad.success and bad.objectives is None and bad.message


def test_results_do_not_depend_on_worker_count(burgers_forward, burgers_sets, small_arch):
    ctx = _context(burgers_forward, burgers_sets, small_arch, record=True)

    def batch(workers):
        requests = [trainRequest(index=i, genome=init_parameters(small_arch, seed=i), seed=100 + i, epochs=3)
                    for i in range(4)]
        run_tasks([trainTask(E_TaskKind.REFINE, ctx, r) for r in requests], workers=workers)
        return requests

    one, four = batch(1), batch(4)
    for a, b in zip(one, four):
        assert a.success and b.success
        assert np.array_equal(a.params, b.params)
        assert a.objectives == b.objectives
        assert len(a.trajectory) == 3


def test_task_memory_estimate_is_bounded(burgers_forward, burgers_sets, small_arch):
    ctx = _context(burgers_forward, burgers_sets, small_arch)
    refine = estimate_task_memory(ctx, E_TaskKind.REFINE)
    evaluate = estimate_task_memory(ctx, E_TaskKind.EVALUATE)
    assert refine >= evaluate > 0


def test_refinement_never_worsens_the_genome(burgers_forward, burgers_sets, small_arch, monkeypatch):
    ctx = _context(burgers_forward, burgers_sets, small_arch)
    genome = init_parameters(small_arch, seed=0)
    start = objectives(genome, small_arch, burgers_forward, *burgers_sets)

    improved = trainRequest(index=0, genome=genome, seed=1, epochs=30)
    trainTask(E_TaskKind.REFINE, ctx, improved).execute()
    assert improved.success and not np.array_equal(improved.params, genome)
    assert improved.scalar <= weighted_scalar(start, ctx.weights)

    # a step that blows the loss up is thrown away
    def worse(params, *args, **kwargs):
        return SimpleNamespace(params=params + 50.0, trajectory=[{"epoch": 1}])

    monkeypatch.setattr(train_task, "train_adam", worse)
    rejected = trainRequest(index=1, genome=genome, seed=1, epochs=5)
    trainTask(E_TaskKind.REFINE, ctx, rejected).execute()
    assert rejected.success and np.array_equal(rejected.params, genome)
    assert rejected.objectives == start
    assert rejected.trajectory == [{"epoch": 1}]


def test_timed_out_task_stops_and_leaves_its_request_alone(burgers_forward, burgers_sets, small_arch):
    ctx = _context(burgers_forward, burgers_sets, small_arch)
    req = trainRequest(index=0, genome=init_parameters(small_arch, seed=0), seed=0, epochs=100_000)
    task = trainTask(E_TaskKind.REFINE, ctx, req)
    scheduler = taskScheduler([task], global_max_workers=1, cpu_guard_percent=None,
                              default_timeout_s=0.05, default_retries=2)

    started = time.monotonic()
    results, failures = scheduler.run()
    assert results == [] and len(failures) == 1
    assert isinstance(failures[0].exception, asyncio.TimeoutError)
    assert failures[0].attempt == 1
    # run() returns once the worker thread has seen the flag, long before 100k epochs
    assert time.monotonic() - started < 30.0
    assert req.cancelled and not req.success
    assert req.params is None and req.objectives is None and req.trajectory == []
