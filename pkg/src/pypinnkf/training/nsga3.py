"""
    NSGA-III over network-parameter genomes with memetic ADAM refinement.

    One generation: ADAM-refine every individual on the unit-weight loss, rank the refined
    population, breed N offspring (binary tournament, uniform crossover, sparse Gaussian mutation),
    evaluate them, and keep N of the 2N by non-dominated fronts plus reference-point niching.
    All objectives are minimized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from pypinnkf.autodiff.network import ParameterVector, init_parameters
from pypinnkf.core import constants as const
from pypinnkf.core import utilities as utils
from pypinnkf.core.enums import E_Dominance, E_TaskKind
from pypinnkf.core.structures import (
    CollocationSets, FloatArray, LossWeights, NetworkArchitecture, ObjectiveVector, ProblemSpec,
    TrainingContext, TrainingDivergedError, trainRequest,
)
from pypinnkf.core import task_scheduler, train_task
from pypinnkf.problems import make_architecture
from pypinnkf.tools.logger import get_logger
from pypinnkf.training.losses import UNIT_WEIGHTS, DataSet, residual_batch

logger = get_logger(__name__)

FRONT_COLUMNS = ("iteration", "generation", "individual", "l_res", "l_ic", "l_bc", "l_data", "rank")


# -----------------------------------------------
# ----------------- Structures ------------------
# -----------------------------------------------
class Individual:
    """A genome with its cached objectives; assigning a new genome drops the cache and the ranking."""

    __slots__ = ("uid", "_genome", "_objectives", "rank", "niche", "distance")

    def __init__(self, genome: ParameterVector, uid: int = 0, objectives: ObjectiveVector | None = None):
        self.uid = int(uid)
        self._genome = np.asarray(genome, dtype=np.float64)
        self._objectives = objectives
        self.rank: int | None = None
        self.niche: int | None = None
        self.distance: float = math.inf

    def __repr__(self):
        return f"Individual(uid={self.uid}, rank={self.rank}, objectives={self._objectives})"

    @property
    def genome(self) -> ParameterVector:
        return self._genome

    @genome.setter
    def genome(self, value: ParameterVector) -> None:
        self._genome = np.asarray(value, dtype=np.float64)
        self._objectives = None
        self.rank = None
        self.niche = None
        self.distance = math.inf

    @property
    def objectives(self) -> ObjectiveVector | None:
        return self._objectives

    @objectives.setter
    def objectives(self, value: ObjectiveVector | None) -> None:
        self._objectives = value

    def objective_array(self) -> FloatArray:
        """Objectives as an array; missing or non-finite values become +inf."""
        if self._objectives is None:
            return np.full(const.N_OBJECTIVES, np.inf)
        arr = self._objectives.as_array()
        return np.where(np.isfinite(arr), arr, np.inf)

    def scalar(self, w: LossWeights = UNIT_WEIGHTS) -> float:
        return float(np.dot(self.objective_array(), w.as_array()))

    @property
    def is_finite(self) -> bool:
        return self._objectives is not None and self._objectives.is_finite()


@dataclass
class Population:
    individuals: list[Individual]
    generation: int = 0
    next_uid: int = 0
    front_rows: list[dict[str, float]] = field(default_factory=list)
    ''' Per-generation (iteration, generation, individual, objectives, rank) rows '''
    trajectories: dict[int, list[dict[str, float]]] = field(default_factory=dict)
    ''' Per-individual memetic loss rows of the last generation, when recorded '''

    def __len__(self) -> int:
        return len(self.individuals)

    def __iter__(self):
        return iter(self.individuals)

    def objective_matrix(self) -> FloatArray:
        return np.vstack([ind.objective_array() for ind in self.individuals])

    def front(self) -> list[Individual]:
        """The rank-1 individuals (the Pareto front used downstream)."""
        return [ind for ind in self.individuals if ind.rank == 1]

    def best(self, w: LossWeights = UNIT_WEIGHTS) -> Individual:
        """Rank-1 member with the smallest scalarized loss (first by position on ties)."""
        candidates = self.front() or self.individuals
        return min(candidates, key=lambda ind: ind.scalar(w))

    def new_uid(self) -> int:
        uid = self.next_uid
        self.next_uid += 1
        return uid


@dataclass(frozen=True)
class FrontPartition:
    fronts: tuple[tuple[int, ...], ...]

    def __len__(self) -> int:
        return len(self.fronts)

    def __getitem__(self, i: int) -> tuple[int, ...]:
        return self.fronts[i]

    def ranks(self, n: int) -> np.ndarray:
        """1-based rank per index."""
        out = np.zeros(n, dtype=int)
        for k, front in enumerate(self.fronts, start=1):
            out[list(front)] = k
        return out


def das_dennis(n_obj: int, divisions: int) -> FloatArray:
    """Simplex-lattice points: all non-negative vectors of multiples of 1/divisions summing to 1."""
    if n_obj < 1 or divisions < 1:
        raise ValueError(f"Need n_obj >= 1 and divisions >= 1, got {n_obj}, {divisions}")
    # stars and bars: choose the n_obj - 1 bar positions among divisions + n_obj - 1 slots
    points = []
    for bars in combinations(range(divisions + n_obj - 1), n_obj - 1):
        edges = (-1, *bars, divisions + n_obj - 1)
        points.append([edges[i + 1] - edges[i] - 1 for i in range(n_obj)])
    return np.asarray(points, dtype=np.float64) / divisions


class ReferencePointSet:
    """Das-Dennis reference directions plus the normalization state of the last survival step."""

    def __init__(self, n_obj: int = const.N_OBJECTIVES, divisions: int = const.REFERENCE_DIVISIONS):
        self.n_obj = n_obj
        self.divisions = divisions
        self.points = das_dennis(n_obj, divisions)
        self.ideal: FloatArray | None = None
        self.intercepts: FloatArray | None = None
        self.used_fallback = False

    def __len__(self) -> int:
        return int(self.points.shape[0])

    def normalize(self, objs: FloatArray) -> FloatArray:
        """
        Translate by the ideal point and scale by the hyperplane intercepts through the extreme
        points; a singular or non-positive intercept system falls back to per-objective max range.
        """
        objs = np.asarray(objs, dtype=np.float64)
        ideal = objs.min(axis=0)
        shifted = objs - ideal
        m = objs.shape[1]

        weights = np.eye(m) + 1e-6
        extreme = np.array([np.argmin(np.max(shifted / weights[i], axis=1)) for i in range(m)])

        self.used_fallback = False
        intercepts = None
        try:
            plane = np.linalg.solve(shifted[extreme], np.ones(m))
            if np.all(np.isfinite(plane)) and np.all(plane > 0):
                intercepts = 1.0 / plane
                if np.any(intercepts <= 1e-10):
                    intercepts = None
        except np.linalg.LinAlgError:
            pass
        if intercepts is None:
            self.used_fallback = True
            intercepts = shifted.max(axis=0)
        intercepts = np.where(intercepts > 1e-12, intercepts, 1.0)

        self.ideal = ideal
        self.intercepts = intercepts
        return shifted / intercepts

    def associate(self, normalized: FloatArray) -> tuple[np.ndarray, FloatArray]:
        """Nearest reference line (perpendicular distance) per row."""
        unit = self.points / np.linalg.norm(self.points, axis=1, keepdims=True)
        proj = normalized @ unit.T
        sq = np.sum(normalized ** 2, axis=1, keepdims=True)
        dist = np.sqrt(np.maximum(sq - proj ** 2, 0.0))
        niche = np.argmin(dist, axis=1)
        return niche, dist[np.arange(normalized.shape[0]), niche]


# -----------------------------------------------
# ------------------ Operators ------------------
# -----------------------------------------------
def dominates(a, b) -> E_Dominance:
    """STRICT if a <= b everywhere and < somewhere, WEAK if only a <= b, else NONE."""
    a = a.as_array() if isinstance(a, ObjectiveVector) else np.asarray(a, dtype=np.float64)
    b = b.as_array() if isinstance(b, ObjectiveVector) else np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"Objective counts differ: {a.shape} vs {b.shape}")
    if not np.all(a <= b):
        return E_Dominance.NONE
    if np.any(a < b):
        return E_Dominance.STRICT
    return E_Dominance.WEAK


def fast_nondominated_sort(objs: Sequence[ObjectiveVector] | FloatArray) -> FrontPartition:
    """Front peeling by domination counts; O(N^2 m)."""
    if isinstance(objs, np.ndarray):
        F = np.asarray(objs, dtype=np.float64)
    else:
        F = np.vstack([o.as_array() if isinstance(o, ObjectiveVector) else np.asarray(o, dtype=np.float64) for o in objs])
    n = F.shape[0]
    if n == 0:
        raise ValueError("Cannot sort an empty population")
    F = np.where(np.isnan(F), np.inf, F)

    le = np.all(F[:, None, :] <= F[None, :, :], axis=2)
    lt = np.any(F[:, None, :] < F[None, :, :], axis=2)
    strict = le & lt  # strict[i, j]: i strictly dominates j

    dominated_by = strict.sum(axis=0)
    fronts: list[tuple[int, ...]] = []
    current = [i for i in range(n) if dominated_by[i] == 0]
    while current:
        fronts.append(tuple(current))
        nxt = []
        for i in current:
            for j in np.flatnonzero(strict[i]):
                dominated_by[j] -= 1
                if dominated_by[j] == 0:
                    nxt.append(int(j))
        current = sorted(nxt)
    return FrontPartition(tuple(fronts))


def assign_fitness(individuals: list[Individual], refs: ReferencePointSet) -> FrontPartition:
    """Set rank, niche and niche distance on every individual (whole-set normalization)."""
    partition = fast_nondominated_sort(np.vstack([ind.objective_array() for ind in individuals]))
    ranks = partition.ranks(len(individuals))
    for ind, r in zip(individuals, ranks):
        ind.rank = int(r)
    _associate(individuals, refs)
    return partition


def _associate(individuals: list[Individual], refs: ReferencePointSet) -> None:
    finite = [ind for ind in individuals if np.all(np.isfinite(ind.objective_array()))]
    for ind in individuals:
        ind.niche, ind.distance = None, math.inf
    if not finite:
        return
    normalized = refs.normalize(np.vstack([ind.objective_array() for ind in finite]))
    niche, dist = refs.associate(normalized)
    for ind, j, d in zip(finite, niche, dist):
        ind.niche, ind.distance = int(j), float(d)


def survival_select(combined: list[Individual], refs: ReferencePointSet, n: int,
                    rng: np.random.Generator) -> list[Individual]:
    """
    Keep whole fronts while they fit; fill the rest from the first front that overflows by niching
    on the reference directions. Non-finite members are only taken when nothing else is left, and the
    member with the lowest unit-weight sum always survives.
    """
    if n < 1 or n > len(combined):
        raise ValueError(f"Cannot select {n} of {len(combined)} individuals")

    partition = fast_nondominated_sort(np.vstack([ind.objective_array() for ind in combined]))
    ranks = partition.ranks(len(combined))
    for ind, r in zip(combined, ranks):
        ind.rank = int(r)

    chosen: list[int] = []
    last: tuple[int, ...] = ()
    for front in partition.fronts:
        if len(chosen) + len(front) <= n:
            chosen.extend(front)
            if len(chosen) == n:
                break
        else:
            last = front
            break

    considered = chosen + list(last)
    _associate([combined[i] for i in considered], refs)
    if not last:
        return [combined[i] for i in chosen]

    rho = np.zeros(len(refs), dtype=int)
    for i in chosen:
        if combined[i].niche is not None:
            rho[combined[i].niche] += 1

    remaining = n - len(chosen)
    pool = [i for i in last if combined[i].niche is not None]
    active = np.ones(len(refs), dtype=bool)
    while remaining > 0 and pool and active.any():
        open_refs = np.flatnonzero(active)
        j_min = open_refs[rho[open_refs] == rho[open_refs].min()]
        j = int(rng.choice(j_min))
        members = [i for i in pool if combined[i].niche == j]
        if not members:
            active[j] = False
            continue
        if rho[j] == 0:
            pick = min(members, key=lambda i: combined[i].distance)
        else:
            pick = members[int(rng.integers(len(members)))]
        chosen.append(pick)
        pool.remove(pick)
        rho[j] += 1
        remaining -= 1

    if remaining > 0:
        leftovers = [i for i in last if i not in chosen]
        order = rng.permutation(len(leftovers))
        chosen.extend(leftovers[k] for k in order[:remaining])

    # elitism: the lowest unit-weight sum is nondominated, niching alone may still drop it
    sums = np.array([ind.objective_array().sum() for ind in combined])
    best = int(np.argmin(sums))
    if np.isfinite(sums[best]) and sums[chosen].min() > sums[best]:
        chosen[-1] = best

    return [combined[i] for i in chosen]


def _tournament(pop: Population, rng: np.random.Generator) -> Individual:
    a, b = rng.choice(len(pop), size=2, replace=False)
    ia, ib = pop.individuals[a], pop.individuals[b]
    key = lambda ind: (ind.rank if ind.rank is not None else math.inf, ind.distance)
    return ia if key(ia) <= key(ib) else ib


def make_offspring(pop: Population, rng: np.random.Generator, crossover_prob: float = const.CROSSOVER_PROB,
                   swap_prob: float = const.SWAP_PROB, mutation_prob: float | None = None,
                   mutation_scale: float = const.MUTATION_SCALE) -> list[Individual]:
    """
    len(pop) children. Parents come from binary tournaments on (rank, niche distance); a pair
    exchanges each coordinate with probability `swap_prob` when crossover fires; each child coordinate
    then gets N(0, (mutation_scale * rms(child))^2) with probability `mutation_prob` (default 1/len).
    """
    n = len(pop)
    if n < 2:
        raise ValueError("Need at least 2 individuals to breed")
    length = pop.individuals[0].genome.size
    p_mut = 1.0 / length if mutation_prob is None else mutation_prob

    children: list[Individual] = []
    while len(children) < n:
        g1 = _tournament(pop, rng).genome.copy()
        g2 = _tournament(pop, rng).genome.copy()
        if rng.random() < crossover_prob:
            swap = rng.random(length) < swap_prob
            g1[swap], g2[swap] = g2[swap], g1[swap].copy()
        for g in (g1, g2):
            if len(children) == n:
                break
            site = rng.random(length) < p_mut
            if site.any():
                sigma = mutation_scale * float(np.sqrt(np.mean(g ** 2)))
                g[site] += rng.normal(0.0, sigma, size=int(site.sum()))
            children.append(Individual(g, uid=pop.new_uid()))
    return children


# -----------------------------------------------
# ------------------- Trainer -------------------
# -----------------------------------------------
def initial_genomes(arch: NetworkArchitecture, spec: ProblemSpec, n: int, seed: int) -> list[ParameterVector]:
    """Glorot initializations from per-individual streams; genome i does not depend on n."""
    return [init_parameters(arch, utils.draw_seed(rng), spec.physics)
            for rng in utils.spawn_generators(seed, n, "init")]


def _run_requests(kind: E_TaskKind, ctx: TrainingContext, requests: list[trainRequest],
                  workers: int | None) -> list[trainRequest]:
    """Run one batch through the worker pool; failed tasks come back with objectives = None."""
    tasks = [train_task.trainTask(kind, ctx, req) for req in requests]
    _, failures = task_scheduler.run_tasks(tasks, workers)
    for f in failures:
        f.task.data.success = False
        f.task.data.objectives = None
        f.task.data.message = f.task.data.message or repr(f.exception)
    if failures:
        logger.warning(f"{len(failures)} of {len(requests)} {kind.name.lower()} tasks failed; "
                       f"their individuals get infinite objectives")
    return requests


def evaluate_population(individuals: list[Individual], ctx: TrainingContext, res_idx: np.ndarray | None,
                        workers: int | None = None) -> None:
    requests = [trainRequest(index=i, genome=ind.genome, res_idx=res_idx) for i, ind in enumerate(individuals)]
    for ind, req in zip(individuals, _run_requests(E_TaskKind.EVALUATE, ctx, requests, workers)):
        ind.objectives = req.objectives


def refine_population(pop: Population, ctx: TrainingContext, epochs: int, seeds: Iterable[int],
                      res_idx: np.ndarray | None, workers: int | None = None) -> None:
    requests = [trainRequest(index=i, genome=ind.genome, seed=s, epochs=epochs, res_idx=res_idx)
                for i, (ind, s) in enumerate(zip(pop.individuals, seeds))]
    pop.trajectories = {}
    for ind, req in zip(pop.individuals, _run_requests(E_TaskKind.REFINE, ctx, requests, workers)):
        if req.params is not None:
            ind.genome = req.params
        ind.objectives = req.objectives
        if req.trajectory:
            pop.trajectories[ind.uid] = req.trajectory


def _log_front(pop: Population, iteration: int) -> None:
    for ind in pop.individuals:
        row = {"iteration": iteration, "generation": pop.generation, "individual": ind.uid}
        row.update(zip(ObjectiveVector.NAMES, ind.objective_array().tolist()))
        row["rank"] = ind.rank
        pop.front_rows.append(row)


def _check_alive(pop: Population, iteration: int) -> None:
    if not any(ind.is_finite for ind in pop.individuals):
        raise TrainingDivergedError(
            f"Every individual has non-finite objectives (iteration {iteration}, generation {pop.generation})")


def train_nsga3(spec: ProblemSpec, coll: CollocationSets, data: DataSet | None, generations: int,
                epochs_per_gen: int, n: int = const.POPULATION_SIZE, seed: int = 0, *,
                arch: NetworkArchitecture | None = None, initial: Population | Sequence[ParameterVector] | None = None,
                iteration: int = 0, workers: int | None = None, refs: ReferencePointSet | None = None,
                record: bool = False) -> Population:
    """
    Run `generations` memetic NSGA-III generations and return the final population with ranks set
    (rank 1 is the Pareto front). `initial` warm-starts from earlier genomes; `iteration` keys the
    random streams so warm-started rounds draw fresh ones. generations = 0 only evaluates.
    """
    if generations < 0 or epochs_per_gen < 1 or n < 2:
        raise ValueError(f"Invalid budgets: generations={generations}, epochs={epochs_per_gen}, n={n}")

    arch = arch or make_architecture(spec)
    refs = refs or ReferencePointSet()
    ctx = TrainingContext(arch=arch, spec=spec, coll=coll, data=data, weights=UNIT_WEIGHTS, record=record)

    if initial is None:
        genomes = initial_genomes(arch, spec, n, seed)
    else:
        genomes = [ind.genome for ind in initial] if isinstance(initial, Population) else list(initial)
        if len(genomes) != n:
            raise ValueError(f"Warm start has {len(genomes)} genomes, expected {n}")
    pop = Population(individuals=[Individual(np.array(g, copy=True), uid=i) for i, g in enumerate(genomes)],
                     next_uid=len(genomes))

    if generations == 0:
        res_idx = residual_batch(spec, coll.n_res, utils.make_rng(seed, "evaluation", iteration, 0))
        evaluate_population(pop.individuals, ctx, res_idx, workers)
        _check_alive(pop, iteration)
        assign_fitness(pop.individuals, refs)
        _log_front(pop, iteration)
        return pop

    best_prev = math.inf
    for g in range(1, generations + 1):
        pop.generation = g
        res_idx = residual_batch(spec, coll.n_res, utils.make_rng(seed, "evaluation", iteration, g))
        seeds = [utils.draw_seed(r) for r in utils.spawn_generators(seed, n, "refine", iteration, g)]

        refine_population(pop, ctx, epochs_per_gen, seeds, res_idx, workers)
        _check_alive(pop, iteration)
        assign_fitness(pop.individuals, refs)

        rng = utils.make_rng(seed, "variation", iteration, g)
        offspring = make_offspring(pop, rng)
        evaluate_population(offspring, ctx, res_idx, workers)

        survivors = survival_select(pop.individuals + offspring, refs, n, rng)
        pop.individuals = survivors
        assign_fitness(pop.individuals, refs)
        _check_alive(pop, iteration)
        _log_front(pop, iteration)

        best = pop.best().scalar()
        front = pop.front()
        logger.info(f"iteration {iteration} generation {g}: front size {len(front)}, best unit-weight loss {best:.4e}")
        if best > best_prev:
            logger.warning(f"Best unit-weight loss rose from {best_prev:.4e} to {best:.4e} in generation {g}")
        best_prev = best

    return pop
