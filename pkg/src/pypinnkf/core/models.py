"""
    Run-level models: experiment configuration, driver budgets and run reports.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

import pypinnkf.core.constants as const
import pypinnkf.core.utilities as utils
from pypinnkf.core.enums import E_Mode, E_Problem, E_Variant
from pypinnkf.core.io import (
    _parse_eta, _parse_mode, _parse_positive_float, _parse_positive_int,
    _parse_problem, _parse_seed, _parse_times, _parse_variant,
    dump_flat_toml, load_flat_toml,
)
from pypinnkf.core.structures import ConfigError, ObjectiveVector

# Row labels of the comparison tables
MODEL_LABELS = {
    E_Variant.ADAM: "ADAM-PINN",
    E_Variant.NSGA3: "NSGA-III-PINN",
    E_Variant.MOPINNENKF: "MoPINNEnKF",
}

# -----------------------------------------------
# ----------------- Dataclasses -----------------
# -----------------------------------------------
@dataclass(frozen=True)
class DriverConfig:
    """
        Training budgets of one experiment.
    """
    variant: E_Variant = E_Variant.MOPINNENKF
    outer_max: int = const.OUTER_MAX
    eps_iter: float = const.EPS_ITER
    generations_per_outer: int = const.OUTER_GENERATIONS
    epochs_per_generation: int = const.OUTER_EPOCHS["burgers"]
    ''' Memetic ADAM epochs per individual per generation inside the outer loop '''
    adam_epochs: int = const.ADAM_EPOCHS
    nsga_generations: int = const.NSGA_GENERATIONS
    nsga_epochs: int = const.NSGA_EPOCHS_PER_GEN
    population_size: int = const.POPULATION_SIZE
    min_ensemble: int = const.MIN_ENSEMBLE_SIZE
    workers: int = const.WORKERS

    def __post_init__(self):
        if not (self.eps_iter > 0):
            raise ConfigError(f"eps_iter must be > 0, got {self.eps_iter}")
        for name in ("outer_max", "generations_per_outer", "epochs_per_generation",
                     "adam_epochs", "nsga_generations", "nsga_epochs", "workers"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"'{name}' must be >= 1, got {getattr(self, name)}")
        if self.population_size < 2:
            raise ConfigError(f"population_size must be >= 2, got {self.population_size}")
        if self.min_ensemble < 2:
            raise ConfigError(f"min_ensemble must be >= 2, got {self.min_ensemble}")


@dataclass(frozen=True)
class ExperimentConfig:
    """
        Single description of one run; serialized as flat TOML in every run directory.
    """
    problem: E_Problem = E_Problem.BURGERS
    mode: E_Mode = E_Mode.FORWARD
    variant: E_Variant = E_Variant.MOPINNENKF
    eta: float = 0.2
    seed: int = 0
    out: str = "out"
    misspecified: bool = True
    ''' Forward mode only: solve with the wrong viscosity / perturbed forcing '''

    # Budgets
    adam_epochs: int = const.ADAM_EPOCHS
    nsga_generations: int = const.NSGA_GENERATIONS
    nsga_epochs: int = const.NSGA_EPOCHS_PER_GEN
    population: int = const.POPULATION_SIZE
    outer_max: int = const.OUTER_MAX
    outer_generations: int = const.OUTER_GENERATIONS
    outer_epochs: int | None = None
    ''' None resolves per problem '''
    eps_iter: float = const.EPS_ITER
    workers: int | None = None

    # Sets
    obs_nx: int = const.OBS_GRID[0]
    obs_nt: int = const.OBS_GRID[1]
    n_res: int = const.N_RES_POINTS
    slices: tuple[float, ...] = const.SLICE_TIMES

    def __post_init__(self):
        set_ = lambda k, v: object.__setattr__(self, k, v)
        set_("problem", _parse_problem(self.problem))
        set_("mode", _parse_mode(self.mode))
        set_("variant", _parse_variant(self.variant))
        set_("eta", _parse_eta(self.eta))
        set_("seed", _parse_seed(self.seed))
        set_("out", str(self.out))
        set_("misspecified", bool(self.misspecified))

        set_("adam_epochs", _parse_positive_int(self.adam_epochs, "adam_epochs"))
        set_("nsga_generations", _parse_positive_int(self.nsga_generations, "nsga_generations"))
        set_("nsga_epochs", _parse_positive_int(self.nsga_epochs, "nsga_epochs"))
        set_("population", _parse_positive_int(self.population, "population"))
        set_("outer_max", _parse_positive_int(self.outer_max, "outer_max"))
        set_("outer_generations", _parse_positive_int(self.outer_generations, "outer_generations"))
        if self.outer_epochs is not None:
            set_("outer_epochs", _parse_positive_int(self.outer_epochs, "outer_epochs"))
        set_("eps_iter", _parse_positive_float(self.eps_iter, "eps_iter"))
        if self.workers is not None:
            set_("workers", _parse_positive_int(self.workers, "workers"))

        set_("obs_nx", _parse_positive_int(self.obs_nx, "obs_nx"))
        set_("obs_nt", _parse_positive_int(self.obs_nt, "obs_nt"))
        set_("n_res", _parse_positive_int(self.n_res, "n_res"))
        t_range = const.BURGERS_DOMAIN[1] if self.problem == E_Problem.BURGERS else const.TFMDWE_DOMAIN[1]
        set_("slices", _parse_times(self.slices, t_range))

        if self.population < 2:
            raise ConfigError(f"population must be >= 2, got {self.population}")
        if self.variant == E_Variant.MOPINNENKF and self.eta == 0.0:
            raise ConfigError("MoPINNEnKF requires observations; eta = 0 is only valid for the adam/nsga3 baselines")

    # ---- derived values ----
    @property
    def resolved_outer_epochs(self) -> int:
        if self.outer_epochs is not None:
            return self.outer_epochs
        return const.OUTER_EPOCHS[self.problem.value]

    @property
    def run_name(self) -> str:
        return f"{self.problem.value}-{self.mode.value}-{self.variant.value}-eta{self.eta:g}-seed{self.seed}"

    @property
    def data_dir(self) -> Path:
        return Path(self.out) / const.DATA_DIRNAME

    @property
    def run_dir(self) -> Path:
        return Path(self.out) / const.RUNS_DIRNAME / self.run_name

    def driver_config(self) -> DriverConfig:
        return DriverConfig(
            variant=self.variant,
            outer_max=self.outer_max,
            eps_iter=self.eps_iter,
            generations_per_outer=self.outer_generations,
            epochs_per_generation=self.resolved_outer_epochs,
            adam_epochs=self.adam_epochs,
            nsga_generations=self.nsga_generations,
            nsga_epochs=self.nsga_epochs,
            population_size=self.population,
            workers=self.workers if self.workers is not None else const.WORKERS,
        )

    def replace(self, **overrides: Any) -> "ExperimentConfig":
        """Copy with overrides; None values leave the field unchanged."""
        changes = {k: v for k, v in overrides.items() if v is not None}
        unknown = set(changes) - {f.name for f in dataclasses.fields(self)}
        if unknown:
            raise ConfigError(f"Unknown config keys: {sorted(unknown)}")
        return dataclasses.replace(self, **changes)

    # ---- serialization ----
    def to_mapping(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if hasattr(v, "value"):
                v = v.value
            elif isinstance(v, tuple):
                v = list(v)
            out[f.name] = v
        return out

    @classmethod
    def from_mapping(cls, data: dict[str, Any]) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"Unknown config keys: {sorted(unknown)}. Supported: {sorted(known)}")
        return cls(**data)

    def to_toml(self) -> str:
        return dump_flat_toml(self.to_mapping())

    @classmethod
    def from_toml(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_mapping(load_flat_toml(path))


@dataclass
class MetricRecord:
    mse: float
    mae: float
    param_error: float | None = None
    ''' |p_hat - p_true| in inverse mode '''
    param_estimate: float | None = None
    losses: ObjectiveVector | None = None
    ''' Loss breakdown of the reported solution '''

    def to_dict(self) -> dict[str, Any]:
        out = {
            "mse": utils._to_float(self.mse),
            "mae": utils._to_float(self.mae),
            "param_error": utils._to_float(self.param_error),
            "param_estimate": utils._to_float(self.param_estimate),
        }
        if self.losses is not None:
            out.update(dataclasses.asdict(self.losses))
        return out


@dataclass
class IterationRecord:
    """
        Outcome of one outer iteration (or of a baseline's single training round).
    """
    iteration: int
    objectives: ObjectiveVector
    ''' Objectives of the selected (best unit-weight) individual '''
    best_scalar: float
    front_size: int
    ensemble_size: int = 0
    analysis_error: float | None = None
    ''' MSE of the analysis mean against the truth at the observation points '''
    observation_error: float | None = None
    ''' MSE of the data set used in this round against the truth '''
    convergence: float | None = None
    ''' Mean squared change of the selected member's predictions since the previous iteration '''
    physics: float | None = None
    physics_spread: dict[str, float] | None = None
    ''' min / max / std of the constrained physics value over the rank-1 front '''
    max_offdiag_corr: float | None = None
    mean_gain: float | None = None

    def to_dict(self) -> dict[str, Any]:
        out = {k: v for k, v in dataclasses.asdict(self).items() if k != "objectives"}
        out.update(dataclasses.asdict(self.objectives))
        return utils.to_native(out)


@dataclass
class RunReport:
    """
        Result of one experiment. Arrays (best parameters, per-epoch trajectory, fronts) are carried
        for the artifact writer and kept out of the JSON summary.
    """
    problem: E_Problem
    mode: E_Mode
    variant: E_Variant
    eta: float
    seed: int
    misspecified: bool = False
    status: str = "ok"
    message: str = ""
    converged: bool = False
    iterations: list[IterationRecord] = field(default_factory=list)
    metrics: MetricRecord | None = None
    physics_true: float | None = None
    physics_trajectory: list[float] = field(default_factory=list)

    best_params: np.ndarray | None = None
    trajectory: list[dict[str, float]] = field(default_factory=list)
    ''' Per-epoch (epoch, l_res, l_ic, l_bc, l_data, scalar) rows '''
    fronts: list[dict[str, float]] = field(default_factory=list)
    ''' Per-generation (iteration, generation, individual, l_res, l_ic, l_bc, l_data, rank) rows '''
    analyses: list[Any] = field(default_factory=list)
    ''' AnalysisData per outer iteration '''
    final_front: list[dict[str, float]] = field(default_factory=list)

    @property
    def model_label(self) -> str:
        return MODEL_LABELS[self.variant]

    def metrics_row(self) -> dict[str, Any]:
        row: dict[str, Any] = {
            "problem": self.problem.value,
            "mode": self.mode.value,
            "model": self.model_label,
            "eta": float(self.eta),
            "seed": int(self.seed),
            "status": self.status,
            "n_iterations": len(self.iterations),
        }
        if self.metrics is not None:
            row.update(self.metrics.to_dict())
        return row

    def to_dict(self) -> dict[str, Any]:
        return utils.to_native({
            "problem": self.problem,
            "mode": self.mode,
            "variant": self.variant,
            "model": self.model_label,
            "eta": self.eta,
            "seed": self.seed,
            "misspecified": self.misspecified,
            "status": self.status,
            "message": self.message,
            "converged": self.converged,
            "iterations": [it.to_dict() for it in self.iterations],
            "metrics": self.metrics.to_dict() if self.metrics else None,
            "metrics_row": self.metrics_row(),
            "physics_true": self.physics_true,
            "physics_trajectory": self.physics_trajectory,
            "final_front": self.final_front,
        })
