"""
    Trainers and the data they consume: collocation and observation sets, loss components,
    ADAM, memetic NSGA-III and the EnKF analysis step.
"""

from .observations import (
    collocation_from_frame, collocation_to_frame, forcing_draws, make_observations, observation_grid,
    observations_from_frame, observations_to_frame, observe, sample_collocation,
)
from .losses import UNIT_WEIGHTS, loss_and_grad, objective_nodes, objectives, residual_batch, weighted_scalar
from .adam import AdamResult, AdamState, adam_step, train_adam
from .nsga3 import (
    FrontPartition, Individual, Population, ReferencePointSet, das_dennis, dominates, fast_nondominated_sort,
    initial_genomes, make_offspring, survival_select, train_nsga3,
)
from .enkf import analyze, build_ensemble, ensemble_members, forecast_statistics

__all__ = ["collocation_from_frame", "collocation_to_frame", "forcing_draws", "make_observations", "observation_grid", "observations_from_frame",
           "observations_to_frame", "observe", "sample_collocation",
           "UNIT_WEIGHTS", "loss_and_grad", "objective_nodes", "objectives", "residual_batch", "weighted_scalar",
           "AdamResult", "AdamState", "adam_step", "train_adam",
           "FrontPartition", "Individual", "Population", "ReferencePointSet", "das_dennis", "dominates",
           "fast_nondominated_sort", "initial_genomes", "make_offspring", "survival_select", "train_nsga3",
           "analyze", "build_ensemble", "ensemble_members", "forecast_statistics"]
