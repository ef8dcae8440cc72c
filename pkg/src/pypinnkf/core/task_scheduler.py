# ---- Standard library imports ----
from __future__ import annotations

import asyncio
import time
import traceback
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, Callable
import psutil

# ---- Package imports ----
from pypinnkf.core import constants as const
from pypinnkf.core.enums import E_TaskKind
from pypinnkf.tools.logger import get_logger

if TYPE_CHECKING:
    from pypinnkf.core.train_task import trainTask

logger = get_logger(__name__)

# ---------------------------
# Result structures
# ---------------------------

@dataclass(slots=True)
class TaskEnvelope:
    task: trainTask
    est_mem_bytes: int
    timeout_s: float
    retries: int


@dataclass(slots=True)
class TaskSuccess:
    task: trainTask
    result: Any
    started_at: float
    ended_at: float

    @property
    def duration_s(self) -> float:
        return self.ended_at - self.started_at


@dataclass(slots=True)
class TaskFailure:
    task: trainTask
    kind: E_TaskKind
    attempt: int
    exception: BaseException
    tb: str
    started_at: float
    ended_at: float

    @property
    def duration_s(self) -> float:
        return self.ended_at - self.started_at


# ---------------------------
# Resource gates
# ---------------------------

class MemoryBudget:
    """A token-based RAM budget.

    Each task declares an *estimate* (in bytes); the sum of inflight estimates
    never exceeds the configured budget. A task larger than the whole budget
    still runs, alone.
    """

    def __init__(self, max_bytes: int):
        self.max_bytes = max(0, int(max_bytes))
        self._used_bytes = 0
        self._cond = asyncio.Condition()

    @property
    def used_bytes(self) -> int:
        return self._used_bytes

    @property
    def free_bytes(self) -> int:
        return max(0, self.max_bytes - self._used_bytes)

    async def acquire(self, amount_bytes: int) -> int:
        amount_bytes = min(max(0, int(amount_bytes)), self.max_bytes)
        if amount_bytes == 0:
            return 0
        async with self._cond:
            while self._used_bytes + amount_bytes > self.max_bytes:
                await self._cond.wait()
            self._used_bytes += amount_bytes
        return amount_bytes

    async def release(self, amount_bytes: int) -> None:
        amount_bytes = max(0, int(amount_bytes))
        if amount_bytes == 0:
            return
        async with self._cond:
            self._used_bytes = max(0, self._used_bytes - amount_bytes)
            self._cond.notify_all()


def default_memory_budget() -> int:
    """INSTANCE_MAX_MEMORY, capped by what the machine has available right now."""
    try:
        available = int(psutil.virtual_memory().available)
    except Exception:
        return int(const.INSTANCE_MAX_MEMORY)
    return max(const.ONE_GB // 4, min(int(const.INSTANCE_MAX_MEMORY), available // 2))


# ---------------------------
# Scheduler
# ---------------------------

class taskScheduler:
    """Worker pool for population tasks (memetic refinement and objective evaluation)."""

    def __init__(
        self,
        taskList: list[trainTask],
        *,
        # Per-kind concurrency limits (defaults to the worker count for each kind)
        concurrency_by_kind: dict[E_TaskKind, int] | None = None,
        # Total RAM budget for inflight tasks (defaults to INSTANCE_MAX_MEMORY capped by free RAM)
        mem_budget_bytes: int | None = None,
        # Optional CPU soft-guard (system CPU percent). None disables.
        cpu_guard_percent: float | None = const.CPU_GUARD_PERCENT,
        cpu_poll_s: float = 0.20,
        default_timeout_s: float = const.TASK_TIMEOUT_S,
        # Numerical failures are deterministic, so nothing is retried by default
        default_retries: int = 0,
        global_max_workers: int | None = None,
        # Optional callbacks
        on_success: Callable[[TaskSuccess], None] | None = None,
        on_failure: Callable[[TaskFailure], None] | None = None,
    ):
        self._queue: asyncio.Queue[TaskEnvelope | None] | None = None
        self._pending: list[TaskEnvelope] = []

        if global_max_workers is None:
            global_max_workers = const.WORKERS
        self._global_max_workers = max(1, int(global_max_workers))

        if concurrency_by_kind is None:
            concurrency_by_kind = {
                E_TaskKind.REFINE: self._global_max_workers,
                E_TaskKind.EVALUATE: self._global_max_workers,
            }
        self._concurrency_by_kind = {k: max(1, int(v)) for k, v in concurrency_by_kind.items()}
        self.semaphores: dict[E_TaskKind, asyncio.Semaphore] = {}

        if mem_budget_bytes is None:
            mem_budget_bytes = default_memory_budget()
        self._mem_budget_bytes = int(mem_budget_bytes)
        self._mem_budget: MemoryBudget | None = None

        self._default_timeout_s = float(default_timeout_s)
        self._default_retries = max(0, int(default_retries))

        self._cpu_guard_percent = float(cpu_guard_percent) if cpu_guard_percent is not None else None
        self._cpu_poll_s = float(cpu_poll_s)
        if self._cpu_guard_percent is not None:
            try:
                psutil.cpu_percent(interval=None)  # prime measurement
            except Exception:
                pass

        self._on_success = on_success
        self._on_failure = on_failure

        self._results: list[TaskSuccess] = []
        self._failures: list[TaskFailure] = []

        self._workers: list[asyncio.Task[None]] = []

        self.initialize_queue(taskList)

    # ---------------------------
    # Public API
    # ---------------------------

    @property
    def results(self) -> list[TaskSuccess]:
        return sorted(self._results, key=lambda s: s.task.index)

    @property
    def failures(self) -> list[TaskFailure]:
        return sorted(self._failures, key=lambda f: f.task.index)

    @property
    def mem_budget_bytes(self) -> int:
        return self._mem_budget_bytes

    def initialize_queue(self, taskList: list[trainTask]) -> None:
        """Hold task envelopes until run_async() creates the queue on the running loop."""
        for t in taskList:
            self.submit(t)

    def submit(self, task: trainTask, *, est_mem_bytes: int | None = None,
               timeout_s: float | None = None, retries: int | None = None) -> None:
        """Submit an additional task before run_async()."""
        env = TaskEnvelope(
            task=task,
            est_mem_bytes=int(est_mem_bytes) if est_mem_bytes is not None else int(task.est_mem_req_bytes),
            timeout_s=float(timeout_s) if timeout_s is not None else self._default_timeout_s,
            retries=int(retries) if retries is not None else self._default_retries,
        )
        self._pending.append(env)

    async def run_async(self) -> tuple[list[TaskSuccess], list[TaskFailure]]:
        """Run until all queued tasks reach a conclusion; both lists are ordered by task index."""
        self._queue = asyncio.Queue()
        self._mem_budget = MemoryBudget(self._mem_budget_bytes)
        self.semaphores = {k: asyncio.Semaphore(v) for k, v in self._concurrency_by_kind.items()}
        for env in self._pending:
            self._queue.put_nowait(env)
        self._pending = []

        n_workers = min(self._global_max_workers, max(1, self._queue.qsize()))
        self._workers = [
            asyncio.create_task(self._worker(i), name=f"pypinnkf-task-worker-{i}")
            for i in range(n_workers)
        ]

        await self._queue.join()

        # Stop workers
        for _ in range(len(self._workers)):
            self._queue.put_nowait(None)
        await asyncio.gather(*self._workers, return_exceptions=False)

        return self.results, self.failures

    def run(self) -> tuple[list[TaskSuccess], list[TaskFailure]]:
        """Convenience wrapper for non-async callers."""
        return asyncio.run(self.run_async())

    # ---------------------------
    # Internal
    # ---------------------------

    async def _wait_for_cpu_headroom(self) -> None:
        if self._cpu_guard_percent is None:
            return
        while True:
            try:
                cpu_now = psutil.cpu_percent(interval=0.0)
            except Exception:
                return
            if cpu_now < self._cpu_guard_percent:
                return
            await asyncio.sleep(self._cpu_poll_s)

    def _record_failure(self, failure: TaskFailure) -> None:
        self._failures.append(failure)
        if self._on_failure:
            self._on_failure(failure)

    async def _worker(self, worker_id: int) -> None:
        while True:
            env = await self._queue.get()
            if env is None:
                self._queue.task_done()
                return

            task = env.task
            sem = self.semaphores.get(task.kind)
            if sem is None:
                # Unknown kind -> fail fast (still mark queue task done)
                now = time.monotonic()
                self._record_failure(TaskFailure(
                    task=task, kind=task.kind, attempt=1,
                    exception=ValueError(f"Unsupported task kind: {task.kind}"),
                    tb="", started_at=now, ended_at=now,
                ))
                self._queue.task_done()
                continue

            async with sem:
                held = await self._mem_budget.acquire(env.est_mem_bytes)
                started = time.monotonic()
                try:
                    await self._wait_for_cpu_headroom()
                    result = await self._run_with_retries(env)
                    success = TaskSuccess(task=task, result=result, started_at=started, ended_at=time.monotonic())
                    self._results.append(success)
                    if self._on_success:
                        self._on_success(success)
                except asyncio.CancelledError:
                    raise
                except BaseException as e:
                    self._record_failure(TaskFailure(
                        task=task,
                        kind=task.kind,
                        attempt=int(getattr(e, "_pypinnkf_attempts", env.retries + 1)),
                        exception=e,
                        tb=traceback.format_exc(),
                        started_at=started,
                        ended_at=time.monotonic(),
                    ))
                finally:
                    await self._mem_budget.release(held)
                    self._queue.task_done()

    async def _run_with_retries(self, env: TaskEnvelope) -> Any:
        last_exc: BaseException | None = None
        attempts = 0
        for attempt in range(env.retries + 1):
            attempts = attempt + 1
            try:
                return await self._invoke_task(env)
            except asyncio.TimeoutError as e:
                # the worker thread cannot be killed; the flag stops it and the request is not retried
                logger.warning(f"Task {env.task.index} timed out after {env.timeout_s:g}s")
                cancel = getattr(env.task, "cancel", None)
                if callable(cancel):
                    cancel()
                last_exc = e
                break
            except Exception as e:
                last_exc = e

        assert last_exc is not None
        try:
            setattr(last_exc, "_pypinnkf_attempts", attempts)
        except Exception:
            pass
        raise last_exc

    async def _invoke_task(self, env: TaskEnvelope) -> Any:
        return await asyncio.wait_for(env.task.execute_async(), timeout=env.timeout_s)


def run_tasks(tasks: list[trainTask], workers: int | None = None) -> tuple[list[TaskSuccess], list[TaskFailure]]:
    """Run a batch through a fresh pool; convenience for the trainers."""
    if not tasks:
        return [], []
    scheduler = taskScheduler(tasks, global_max_workers=workers)
    return scheduler.run()
