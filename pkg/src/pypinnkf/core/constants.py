"""
PyPinnKF_Constants
------------------

Centralized constants for the PyPinnKF project.

This module defines the default values used across the codebase to avoid
magic numbers, improve readability, and keep experiments reproducible:
- Network architectures per benchmark problem
- Physics constants (true and misspecified coefficients, domains)
- Training budgets (ADAM epochs, NSGA-III generations, outer iterations)
- Evolutionary operator settings and EnKF safeguards
- Grids (observations, Burgers oracle cache, metric test grid)
- Worker pool limits

Anything that a run may override lives in `ExperimentConfig`; these are only
the defaults it resolves to.
"""

import math
import os

from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

# General package constants
PACKAGE_NAME = "pypinnkf"

# Memory-related constants
ONE_MB                      = (1024**2)         # One MB in bytes
ONE_GB                      = (ONE_MB * 1024)   # One GB in bytes
INSTANCE_MAX_MEMORY         = ONE_GB * 4        # Max memory for inflight population tasks
MAX_TASK_MEMORY_ALLOCATION  = ONE_MB * 400      # Max memory estimate per population task

# Network architectures (input (x, t), scalar output)
BURGERS_LAYER_WIDTHS    = (2, 20, 20, 20, 20, 20, 20, 20, 1)   # 8 layers of 20 neurons
TFMDWE_LAYER_WIDTHS     = (2, 50, 50, 1)                        # 2 hidden layers of 50 neurons

# Physics
BURGERS_NU_TRUE         = 0.01 / math.pi
BURGERS_NU_MODEL        = 0.02 / math.pi    # misspecified viscosity of the forward problem
BURGERS_DOMAIN          = ((-1.0, 1.0), (0.0, 1.0))
TFMDWE_ALPHA_TRUE       = 0.5
TFMDWE_DOMAIN           = ((0.0, math.pi), (0.0, 1.0))
TFMDWE_FORCING_NOISE    = 0.5               # relative amplitude of the forcing perturbation
PHYSICS_INIT_RANGE      = (0.0, 1.0)        # initial draw of a trainable coefficient
PHYSICS_INIT_CLIP       = 1e-4              # keeps the initial draw off the open-set boundary

# Caputo history
CAPUTO_HISTORY_STEPS    = 50

# Collocation
N_IC_POINTS             = 50
N_BC_POINTS             = 50
N_RES_POINTS            = 10_000
RES_BATCH_SIZE          = 2_000             # residual subsample per epoch / per generation (TFMDWE)

# Observations
OBS_GRID                = (20, 10)          # (n_x, n_t) -> 200 points
OBS_VARIANCE_FLOOR      = 1e-8              # lower bound on the diagonal of R

# ADAM
ADAM_LR                 = 1e-3
ADAM_BETA1              = 0.9
ADAM_BETA2              = 0.999
ADAM_EPS                = 1e-8
ADAM_EPOCHS             = 5_000

# NSGA-III
POPULATION_SIZE         = 24
REFERENCE_DIVISIONS     = 4                 # Das-Dennis divisions, 35 points for 4 objectives
N_OBJECTIVES            = 4
CROSSOVER_PROB          = 0.9
SWAP_PROB               = 0.5
MUTATION_SCALE          = 0.01
NSGA_GENERATIONS        = 4                 # NSGA-III-PINN baseline
NSGA_EPOCHS_PER_GEN     = 1_000

# Outer loop
OUTER_MAX               = 5
EPS_ITER                = 1e-4
OUTER_GENERATIONS       = 3
OUTER_EPOCHS            = {"burgers": 1_000, "tfmdwe": 2_000}

# EnKF
MIN_ENSEMBLE_SIZE       = 10

# Grids
ORACLE_GRID             = (512, 201)        # (n_x, n_t) Burgers reference table
ORACLE_QUAD_POINTS      = 4_001             # Cole-Hopf quadrature nodes
ORACLE_QUAD_HALF_WIDTH  = 30.0              # quadrature interval [-w, w] in scaled units
ORACLE_FRONT_HALF_WIDTH = 0.1               # |x| below this is evaluated by direct quadrature
TEST_GRID               = (256, 100)
SLICE_TIMES             = (0.5, 0.7, 1.0)

# Worker pool
WORKERS                 = int(os.getenv("PYPINNKF_WORKERS", str(max(1, (os.cpu_count() or 2) // 2))))
TASK_TIMEOUT_S          = float(os.getenv("PYPINNKF_TASK_TIMEOUT", "86400"))
CPU_GUARD_PERCENT       = None              # None disables the CPU soft guard

# Paths
ORACLE_CACHE_PATH       = os.getenv(
    "PYPINNKF_ORACLE_CACHE",
    os.path.join(os.getenv("XDG_CACHE_HOME", os.path.join(os.path.expanduser("~"), ".cache")),
                 "pypinnkf", "burgers_oracle.csv"),
)
DATA_DIRNAME            = "data"
RUNS_DIRNAME            = "runs"

# Run output file names
REPORT_FILE             = "report.json"
METRICS_FILE            = "metrics.csv"
TRAJECTORY_FILE         = "trajectory.csv"
FRONTS_FILE             = "fronts.csv"
GRID_FILE               = "solution_grid.csv"
SLICES_FILE             = "slices.csv"
CONFIG_FILE             = "config.toml"
MANIFEST_FILE           = "manifest.json"
