"""
Tests for the NSGA-III machinery.

- dominance and fast non-dominated sorting (against a brute-force peeling)
- reference points, normalization fallback and survival selection (niching, elitism, objective order)
- variation operators
- the memetic trainer on a tiny network, including a best loss that never rises
"""

import itertools
import sys
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

# Add src to path
sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from pypinnkf.autodiff import init_parameters
from pypinnkf.core.enums import E_Dominance
from pypinnkf.core.structures import ObjectiveVector
from pypinnkf.training.nsga3 import (
    FRONT_COLUMNS, Individual, Population, ReferencePointSet, das_dennis, dominates, fast_nondominated_sort,
    initial_genomes, make_offspring, survival_select, train_nsga3,
)


class _Point(Individual):
    """An individual with a fixed objective vector of any length."""

    def __init__(self, objs, uid=0):
        super().__init__(np.zeros(1), uid=uid)
        self.objs = np.asarray(objs, dtype=np.float64)

    def objective_array(self):
        return self.objs


def _peel(F: np.ndarray) -> list[set[int]]:
    remaining = set(range(F.shape[0]))
    fronts = []
    while remaining:
        front = {i for i in remaining
                 if not any(np.all(F[j] <= F[i]) and np.any(F[j] < F[i]) for j in remaining if j != i)}
        fronts.append(front)
        remaining -= front
    return fronts


# ---- dominance and sorting ----
def test_dominance_cases():
    assert dominates([1, 2, 3, 4], [1, 2, 3, 5]) == E_Dominance.STRICT
    assert dominates([1, 2, 3, 4], [1, 2, 3, 4]) == E_Dominance.WEAK
    assert dominates([1, 3, 0, 0], [2, 2, 0, 0]) == E_Dominance.NONE
    assert dominates([2, 2, 0, 0], [1, 2, 0, 0]) == E_Dominance.NONE
    assert dominates(ObjectiveVector(1, 1, 1, 1), ObjectiveVector(2, 2, 2, 2)) == E_Dominance.STRICT
    with pytest.raises(ValueError):
        dominates([1, 2], [1, 2, 3])


def test_sort_small_example():
    F = np.array([[1, 4], [2, 2], [4, 1], [3, 3], [5, 5], [2, 2]], dtype=float)
    partition = fast_nondominated_sort(F)
    assert [set(f) for f in partition.fronts] == [{0, 1, 2, 5}, {3}, {4}]
    assert list(partition.ranks(6)) == [1, 1, 1, 2, 3, 1]


@pytest.mark.parametrize("seed", range(5))
def test_sort_matches_brute_force_peeling(seed):
    rng = np.random.default_rng(seed)
    # small integer grid so ties and duplicates occur
    F = rng.integers(0, 5, size=(40, 4)).astype(float)
    partition = fast_nondominated_sort(F)
    assert [set(f) for f in partition.fronts] == _peel(F)
    assert sorted(i for f in partition.fronts for i in f) == list(range(40))


def test_non_finite_rows_sort_last():
    F = np.array([[np.nan, 0, 0, 0], [5, 5, 5, 5], [1, 1, 1, 1], [np.inf] * 4])
    ranks = fast_nondominated_sort(F).ranks(4)
    assert ranks[2] == 1 and ranks[1] == 2
    assert ranks[3] == ranks.max()

    with pytest.raises(ValueError):
        fast_nondominated_sort(np.empty((0, 4)))


# ---- reference points ----
def test_das_dennis_counts_and_simplex():
    pts = das_dennis(4, 4)
    assert pts.shape == (35, 4)
    assert np.allclose(pts.sum(axis=1), 1.0)
    assert np.unique(pts, axis=0).shape[0] == 35
    assert np.allclose(das_dennis(2, 4), [[0, 1], [0.25, 0.75], [0.5, 0.5], [0.75, 0.25], [1, 0]])
    with pytest.raises(ValueError):
        das_dennis(0, 4)


def test_normalization_uses_intercepts():
    refs = ReferencePointSet(2, 4)
    normalized = refs.normalize(np.array([[1.0, 5.0], [3.0, 1.0], [2.0, 3.0]]))
    assert not refs.used_fallback
    assert np.allclose(refs.ideal, [1.0, 1.0])
    assert np.allclose(refs.intercepts, [2.0, 4.0])
    assert np.allclose(normalized, [[0.0, 1.0], [1.0, 0.0], [0.5, 0.5]])


def test_normalization_falls_back_to_range_when_degenerate():
    refs = ReferencePointSet(2, 4)
    normalized = refs.normalize(np.array([[1.0, 1.0], [2.0, 2.0]]))
    assert refs.used_fallback
    assert np.allclose(normalized, [[0.0, 0.0], [1.0, 1.0]])


# ---- survival ----
def test_niching_spreads_selection_over_reference_directions():
    # four reference directions are occupied twice, the middle one not at all
    points = {"A": (0, 1), "A'": (.04, .96), "B": (.25, .75), "B'": (.3, .7),
              "C": (.75, .25), "C'": (.7, .3), "D": (1, 0), "D'": (.96, .04)}
    combined = [_Point(v, uid=i) for i, v in enumerate(points.values())]
    names = list(points)
    refs = ReferencePointSet(2, 4)

    for seed in range(5):
        chosen = survival_select(combined, refs, 4, np.random.default_rng(seed))
        assert sorted(names[ind.uid] for ind in chosen) == ["A", "B", "C", "D"]
        assert sorted(ind.niche for ind in chosen) == [0, 1, 3, 4]


def test_first_front_of_exact_size_is_kept_whole():
    first = [_Point((i, 4 - i), uid=i) for i in range(4)]
    worse = [_Point((i + 1, 5 - i), uid=10 + i) for i in range(4)]
    chosen = survival_select(first + worse, ReferencePointSet(2, 4), 4, np.random.default_rng(0))
    assert sorted(ind.uid for ind in chosen) == [0, 1, 2, 3]
    assert all(ind.rank == 1 for ind in chosen)


def test_select_single_survivor():
    combined = [_Point((i, 3 - i), uid=i) for i in range(4)]
    chosen = survival_select(combined, ReferencePointSet(2, 4), 1, np.random.default_rng(0))
    assert len(chosen) == 1


@pytest.mark.parametrize("seed", range(3))
def test_selection_size_and_front_order(seed):
    rng = np.random.default_rng(seed)
    combined = [_Point(rng.uniform(0, 1, 4), uid=i) for i in range(48)]
    chosen = survival_select(combined, ReferencePointSet(), 24, rng)
    uids = [ind.uid for ind in chosen]
    assert len(uids) == 24 and len(set(uids)) == 24

    # every member of a better front than the worst chosen one survives
    worst = max(ind.rank for ind in chosen)
    better = {ind.uid for ind in combined if ind.rank < worst}
    assert better <= set(uids)


def test_non_finite_individuals_are_not_selected_while_finite_ones_remain():
    finite = [Individual(np.zeros(1), uid=i, objectives=ObjectiveVector(i, 5 - i, 1.0, 1.0)) for i in range(5)]
    broken = [Individual(np.zeros(1), uid=10 + i) for i in range(3)]
    broken.append(Individual(np.zeros(1), uid=20, objectives=ObjectiveVector(np.nan, 0.0, 0.0, 0.0)))
    chosen = survival_select(broken + finite, ReferencePointSet(), 5, np.random.default_rng(0))
    assert sorted(ind.uid for ind in chosen) == [0, 1, 2, 3, 4]

    with pytest.raises(ValueError):
        survival_select(finite, ReferencePointSet(), 6, np.random.default_rng(0))


@pytest.mark.parametrize("seed", range(3))
def test_selection_does_not_depend_on_objective_order(seed):
    # axis points sit on their own reference directions, each with a near neighbour in the same niche
    base = [np.eye(4)[i] for i in range(4)]
    near = [0.95 * np.eye(4)[i] + 0.08 * np.eye(4)[(i + 1) % 4] for i in range(4)]
    points = np.vstack(base + near)
    for perm in itertools.permutations(range(4)):
        combined = [_Point(row[list(perm)], uid=i) for i, row in enumerate(points)]
        chosen = survival_select(combined, ReferencePointSet(), 4, np.random.default_rng(seed))
        assert sorted(ind.uid for ind in chosen) == [0, 1, 2, 3], perm

    points = {"A": (0, 1), "A'": (.04, .96), "B": (.25, .75), "B'": (.3, .7),
              "C": (.75, .25), "C'": (.7, .3), "D": (1, 0), "D'": (.96, .04)}
    names = list(points)
    swapped = [_Point(v[::-1], uid=i) for i, v in enumerate(points.values())]
    chosen = survival_select(swapped, ReferencePointSet(2, 4), 4, np.random.default_rng(seed))
    assert sorted(names[ind.uid] for ind in chosen) == ["A", "B", "C", "D"]


def test_lowest_sum_always_survives():
    combined = [_Point((0.0, 10.0), uid=0), _Point((10.0, 0.0), uid=1), _Point((1.0, 1.0), uid=2),
                _Point((3.0, 3.0), uid=3)]
    for seed in range(10):
        for n in (1, 2):
            chosen = survival_select(combined, ReferencePointSet(2, 4), n, np.random.default_rng(seed))
            assert 2 in {ind.uid for ind in chosen}


# ---- variation ----
def _population(n=6, length=12, seed=0) -> Population:
    rng = np.random.default_rng(seed)
    return Population(individuals=[Individual(rng.normal(size=length), uid=i) for i in range(n)], next_uid=n)


def test_offspring_without_variation_copy_parents():
    pop = _population()
    children = make_offspring(pop, np.random.default_rng(0), crossover_prob=0.0, mutation_prob=0.0)
    assert len(children) == len(pop)
    parents = [ind.genome for ind in pop]
    for child in children:
        assert any(np.array_equal(child.genome, g) for g in parents)
        assert all(child.genome is not g for g in parents)
    assert [c.uid for c in children] == list(range(6, 12))
    assert pop.next_uid == 12


def test_full_swap_exchanges_whole_genomes():
    pop = _population(n=4)
    children = make_offspring(pop, np.random.default_rng(1), crossover_prob=1.0, swap_prob=1.0, mutation_prob=0.0)
    parents = [ind.genome for ind in pop]
    assert all(any(np.array_equal(c.genome, g) for g in parents) for c in children)


def test_offspring_are_deterministic_and_sized():
    for n in (2, 5):
        a = make_offspring(_population(n=n), np.random.default_rng(3), mutation_prob=0.5)
        b = make_offspring(_population(n=n), np.random.default_rng(3), mutation_prob=0.5)
        assert len(a) == n
        assert all(np.array_equal(x.genome, y.genome) for x, y in zip(a, b))
        assert all(x.objectives is None for x in a)
    with pytest.raises(ValueError):
        make_offspring(_population(n=1), np.random.default_rng(0))


# ---- trainer ----
def test_initial_genomes_do_not_depend_on_population_size(burgers_forward, small_arch):
    three = initial_genomes(small_arch, burgers_forward, 3, seed=0)
    five = initial_genomes(small_arch, burgers_forward, 5, seed=0)
    assert all(np.array_equal(a, b) for a, b in zip(three, five))
    assert not np.array_equal(five[0], five[1])


def test_zero_generations_only_evaluates(burgers_forward, burgers_sets, small_arch):
    coll, obs = burgers_sets
    genomes = [init_parameters(small_arch, seed=s) for s in range(4)]
    pop = train_nsga3(burgers_forward, coll, obs, generations=0, epochs_per_gen=1, n=4,
                      arch=small_arch, initial=genomes, workers=1)
    assert len(pop) == 4 and pop.generation == 0
    assert all(np.array_equal(ind.genome, g) for ind, g in zip(pop, genomes))
    assert all(ind.is_finite and ind.rank >= 1 for ind in pop)
    assert len(pop.front_rows) == 4
    assert set(pop.front_rows[0]) == set(FRONT_COLUMNS)


def test_small_run_produces_a_nondominated_front(burgers_forward, burgers_sets, small_arch):
    coll, obs = burgers_sets
    pop = train_nsga3(burgers_forward, coll, obs, generations=2, epochs_per_gen=2, n=4, seed=3,
                      arch=small_arch, workers=1, record=True)
    assert len(pop) == 4 and pop.generation == 2
    assert len({ind.uid for ind in pop}) == 4
    assert len(pop.front_rows) == 8

    front = pop.front()
    assert front
    for a in front:
        for b in front:
            assert dominates(a.objective_array(), b.objective_array()) != E_Dominance.STRICT
    assert pop.best() in front


def test_warm_start_size_must_match(burgers_forward, burgers_sets, small_arch):
    coll, obs = burgers_sets
    with pytest.raises(ValueError):
        train_nsga3(burgers_forward, coll, obs, generations=1, epochs_per_gen=1, n=4,
                    arch=small_arch, initial=[init_parameters(small_arch, seed=0)] * 3)
    with pytest.raises(ValueError):
        train_nsga3(burgers_forward, coll, obs, generations=-1, epochs_per_gen=1, n=4, arch=small_arch)


def test_best_loss_never_rises_across_generations(burgers_forward, burgers_sets, small_arch):
    coll, obs = burgers_sets
    pop = train_nsga3(burgers_forward, coll, obs, generations=4, epochs_per_gen=3, n=4, seed=1,
                      arch=small_arch, workers=1)
    rows = pd.DataFrame(pop.front_rows)
    rows["total"] = rows[["l_res", "l_ic", "l_bc", "l_data"]].sum(axis=1)
    best = rows.groupby("generation")["total"].min().to_numpy()
    assert len(best) == 4
    assert np.all(np.diff(best) <= 1e-12 * best[:-1])
