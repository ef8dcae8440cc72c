"""
    Experiment drivers: the MoPINNEnKF outer loop and the two single-round baselines, plus the
    test-grid metrics shared by all three.
"""

from __future__ import annotations

from typing import Callable, Iterable

import numpy as np
import pandas as pd

from pypinnkf.autodiff.network import ParameterVector, physics_value, predict
from pypinnkf.core import constants as const
from pypinnkf.core import utilities as utils
from pypinnkf.core.enums import E_Variant
from pypinnkf.core.models import DriverConfig, IterationRecord, MetricRecord, RunReport
from pypinnkf.core.structures import (
    AdamError, CollocationSets, FloatArray, NetworkArchitecture, NonFiniteError, ObjectiveVector,
    ObservationErrorModel, ObservationSet, ProblemSpec, TrainingDivergedError,
)
from pypinnkf.problems import ground_truth, make_architecture
from pypinnkf.tools.logger import get_logger
from pypinnkf.training.adam import train_adam
from pypinnkf.training.enkf import analyze, build_ensemble
from pypinnkf.training.losses import UNIT_WEIGHTS, objectives, residual_batch, weighted_scalar
from pypinnkf.training.nsga3 import Population, initial_genomes, train_nsga3
from pypinnkf.training.observations import make_observations, sample_collocation

logger = get_logger(__name__)

Evaluator = Callable[[FloatArray], FloatArray]


# -----------------------------------------------
# ------------------- Metrics -------------------
# -----------------------------------------------
def metric_points(spec: ProblemSpec, grid: tuple[int, int] = const.TEST_GRID) -> FloatArray:
    xs, ts = utils.uniform_grid(spec.domain, *grid)
    return utils.tensor_grid(xs, ts)


def evaluate_metrics(evaluator: Evaluator, spec: ProblemSpec, param_estimate: float | None = None,
                     grid: tuple[int, int] = const.TEST_GRID, losses: ObjectiveVector | None = None) -> MetricRecord:
    """MSE and MAE against the ground truth on a uniform test grid; |p̂ - p| in inverse mode."""
    points = metric_points(spec, grid)
    err = np.asarray(evaluator(points), dtype=np.float64) - ground_truth(spec, points[:, 0], points[:, 1])
    param_error = None
    if spec.is_inverse and param_estimate is not None:
        param_error = abs(float(param_estimate) - spec.physics.true_value)
    return MetricRecord(mse=float(np.mean(err ** 2)), mae=float(np.mean(np.abs(err))),
                        param_error=param_error, param_estimate=param_estimate, losses=losses)


def solution_grid(evaluator: Evaluator, spec: ProblemSpec, grid: tuple[int, int] = const.TEST_GRID) -> pd.DataFrame:
    """Plot-ready (x, t, u_pred, u_true, abs_err) rows over the test grid."""
    points = metric_points(spec, grid)
    u_pred = np.asarray(evaluator(points), dtype=np.float64)
    u_true = ground_truth(spec, points[:, 0], points[:, 1])
    return pd.DataFrame({"x": points[:, 0], "t": points[:, 1], "u_pred": u_pred, "u_true": u_true,
                         "abs_err": np.abs(u_pred - u_true)})


def solution_slices(evaluator: Evaluator, spec: ProblemSpec, times: Iterable[float] = const.SLICE_TIMES,
                    n_x: int = const.TEST_GRID[0]) -> pd.DataFrame:
    """Solution curves u(·, t) at fixed times."""
    xs = np.linspace(*spec.x_range, n_x)
    parts = []
    for tv in times:
        points = np.column_stack([xs, np.full_like(xs, float(tv))])
        u_pred = np.asarray(evaluator(points), dtype=np.float64)
        u_true = ground_truth(spec, points[:, 0], points[:, 1])
        parts.append(pd.DataFrame({"t": float(tv), "x": xs, "u_pred": u_pred, "u_true": u_true,
                                   "abs_err": np.abs(u_pred - u_true)}))
    return pd.concat(parts, ignore_index=True)


def network_evaluator(params: ParameterVector, arch: NetworkArchitecture) -> Evaluator:
    return lambda points: predict(params, arch, points)


# -----------------------------------------------
# ------------------- Helpers -------------------
# -----------------------------------------------
def _prepare(spec: ProblemSpec, eta: float, seed: int, obs: ObservationSet | None, coll: CollocationSets | None,
             arch: NetworkArchitecture | None) -> tuple[ObservationSet, CollocationSets, NetworkArchitecture]:
    obs = obs if obs is not None else make_observations(spec, eta, const.OBS_GRID, seed)
    coll = coll if coll is not None else sample_collocation(spec, seed)
    return obs, coll, arch or make_architecture(spec)


def _new_report(spec: ProblemSpec, variant: E_Variant, eta: float, seed: int) -> RunReport:
    return RunReport(problem=spec.kind, mode=spec.mode, variant=variant, eta=float(eta), seed=int(seed),
                     misspecified=spec.misspecified,
                     physics_true=spec.physics.true_value if spec.is_inverse else None)


def _physics(params: ParameterVector, arch: NetworkArchitecture, spec: ProblemSpec) -> float | None:
    return physics_value(params, arch, spec.physics) if spec.is_inverse else None


def _front_spread(pop: Population, arch: NetworkArchitecture, spec: ProblemSpec) -> dict[str, float] | None:
    if not spec.is_inverse:
        return None
    values = np.array([physics_value(ind.genome, arch, spec.physics) for ind in pop.front() if ind.is_finite])
    if values.size == 0:
        return None
    return {"min": float(values.min()), "max": float(values.max()), "std": float(values.std())}


def _front_table(pop: Population, arch: NetworkArchitecture, spec: ProblemSpec) -> list[dict[str, float]]:
    rows = []
    for ind in pop.front():
        row = {"individual": ind.uid, **dict(zip(ObjectiveVector.NAMES, ind.objective_array().tolist())),
               "scalar": ind.scalar()}
        if spec.is_inverse:
            row[spec.physics.name] = physics_value(ind.genome, arch, spec.physics)
        rows.append(row)
    return rows


def _generation_trajectory(front_rows: list[dict[str, float]]) -> list[dict[str, float]]:
    """Best unit-weight member per (iteration, generation)."""
    if not front_rows:
        return []
    df = pd.DataFrame(front_rows)
    df["scalar"] = df[list(ObjectiveVector.NAMES)].sum(axis=1)
    best = df.loc[df.groupby(["iteration", "generation"], sort=True)["scalar"].idxmin()]
    cols = ["iteration", "generation", "individual", *ObjectiveVector.NAMES, "scalar"]
    return best[cols].to_dict(orient="records")


def _mse(a: FloatArray, b: FloatArray) -> float:
    return float(np.mean((np.asarray(a) - np.asarray(b)) ** 2))


def _finish(report: RunReport, params: ParameterVector, arch: NetworkArchitecture, spec: ProblemSpec,
            losses: ObjectiveVector | None) -> RunReport:
    report.best_params = np.array(params, copy=True)
    report.metrics = evaluate_metrics(network_evaluator(params, arch), spec, _physics(params, arch, spec), losses=losses)
    logger.info(f"{report.model_label}: test MSE {report.metrics.mse:.4e}, MAE {report.metrics.mae:.4e}"
                + (f", {spec.physics.name} = {report.metrics.param_estimate:.5f}" if spec.is_inverse else ""))
    return report


# -----------------------------------------------
# ------------------- Drivers -------------------
# -----------------------------------------------
def run_mopinnenkf(spec: ProblemSpec, config: DriverConfig, eta: float, seed: int, *,
                   obs: ObservationSet | None = None, coll: CollocationSets | None = None,
                   arch: NetworkArchitecture | None = None) -> RunReport:
    """
    Outer loop: train the population on the current data set (raw observations first), push the
    ensemble through an EnKF analysis, and retrain on the analysis mean, warm-starting each round
    from the previous population. Stops when the selected member's predictions at the observation
    points change by less than eps_iter (mean square) or after outer_max rounds.
    """
    obs, coll, arch = _prepare(spec, eta, seed, obs, coll, arch)
    if len(obs) == 0:
        raise ValueError("The outer loop needs observations")
    report = _new_report(spec, E_Variant.MOPINNENKF, eta, seed)
    truth_obs = ground_truth(spec, obs.points[:, 0], obs.points[:, 1])
    R = ObservationErrorModel.from_observations(obs, const.OBS_VARIANCE_FLOOR)

    data = obs
    population: Population | None = None
    previous: FloatArray | None = None
    try:
        for m in range(1, config.outer_max + 1):
            population = train_nsga3(spec, coll, data, config.generations_per_outer, config.epochs_per_generation,
                                     config.population_size, seed, arch=arch, initial=population, iteration=m,
                                     workers=config.workers)
            report.fronts.extend(population.front_rows)
            population.front_rows = []

            best = population.best()
            current = predict(best.genome, arch, obs.points)
            convergence = None if previous is None else _mse(current, previous)

            ensemble = build_ensemble(population, arch, obs, config.min_ensemble)
            analysis = analyze(ensemble, obs, R, utils.draw_seed(utils.make_rng(seed, "analysis", m)))
            report.analyses.append(analysis)

            physics = _physics(best.genome, arch, spec)
            if physics is not None:
                report.physics_trajectory.append(physics)
            record = IterationRecord(
                iteration=m,
                objectives=best.objectives,
                best_scalar=best.scalar(),
                front_size=len(population.front()),
                ensemble_size=ensemble.n_members,
                analysis_error=_mse(analysis.mean, truth_obs),
                observation_error=_mse(data.targets, truth_obs),
                convergence=convergence,
                physics=physics,
                physics_spread=_front_spread(population, arch, spec),
                max_offdiag_corr=analysis.max_offdiag_corr,
                mean_gain=float(np.mean(analysis.gain_diag)),
            )
            report.iterations.append(record)
            logger.info(f"outer iteration {m}: best loss {record.best_scalar:.4e}, ensemble {ensemble.n_members}, "
                        f"analysis MSE {record.analysis_error:.4e}"
                        + (f", change {convergence:.3e}" if convergence is not None else ""))

            previous = current
            data = analysis
            if convergence is not None and convergence < config.eps_iter:
                report.converged = True
                logger.info(f"Converged after {m} outer iterations")
                break
    except (TrainingDivergedError, NonFiniteError) as e:
        report.status = "diverged"
        report.message = str(e)
        raise TrainingDivergedError(str(e), report) from e

    best = population.best()
    report.trajectory = _generation_trajectory(report.fronts)
    report.final_front = _front_table(population, arch, spec)
    return _finish(report, best.genome, arch, spec, best.objectives)


def run_baseline(spec: ProblemSpec, variant: E_Variant, eta: float, config: DriverConfig, seed: int, *,
                 obs: ObservationSet | None = None, coll: CollocationSets | None = None,
                 arch: NetworkArchitecture | None = None) -> RunReport:
    """
    One training round on the raw observations (no data term at eta = 0): ADAM for
    `adam_epochs`, or NSGA-III for `nsga_generations` × `nsga_epochs`.
    """
    if variant not in (E_Variant.ADAM, E_Variant.NSGA3):
        raise ValueError(f"Not a baseline variant: {variant}")
    obs, coll, arch = _prepare(spec, eta, seed, obs, coll, arch)
    data = obs if eta > 0 and len(obs) > 0 else None
    report = _new_report(spec, variant, eta, seed)

    try:
        if variant == E_Variant.ADAM:
            params0 = initial_genomes(arch, spec, 1, seed)[0]
            result = train_adam(params0, arch, spec, coll, data, config.adam_epochs, UNIT_WEIGHTS, seed=seed)
            params = result.params
            res_idx = residual_batch(spec, coll.n_res, utils.make_rng(seed, "evaluation", "final"))
            final = objectives(params, arch, spec, coll, data, res_idx)
            if not final.is_finite():
                raise TrainingDivergedError("ADAM training ended with non-finite objectives")
            report.trajectory = result.trajectory
            report.iterations.append(IterationRecord(iteration=1, objectives=final,
                                                     best_scalar=weighted_scalar(final, UNIT_WEIGHTS), front_size=1))
        else:
            pop = train_nsga3(spec, coll, data, config.nsga_generations, config.nsga_epochs, config.population_size,
                              seed, arch=arch, iteration=1, workers=config.workers)
            best = pop.best()
            params, final = best.genome, best.objectives
            report.fronts = pop.front_rows
            report.trajectory = _generation_trajectory(pop.front_rows)
            report.final_front = _front_table(pop, arch, spec)
            report.iterations.append(IterationRecord(iteration=1, objectives=final, best_scalar=best.scalar(),
                                                     front_size=len(pop.front()),
                                                     physics=_physics(params, arch, spec),
                                                     physics_spread=_front_spread(pop, arch, spec)))
    except (TrainingDivergedError, AdamError, NonFiniteError) as e:
        report.status = "diverged"
        report.message = str(e)
        raise TrainingDivergedError(str(e), report) from e

    physics = _physics(params, arch, spec)
    if physics is not None:
        report.physics_trajectory.append(physics)
    return _finish(report, params, arch, spec, final)


def run_variant(spec: ProblemSpec, config: DriverConfig, eta: float, seed: int, **sets) -> RunReport:
    if config.variant == E_Variant.MOPINNENKF:
        return run_mopinnenkf(spec, config, eta, seed, **sets)
    return run_baseline(spec, config.variant, eta, config, seed, **sets)
