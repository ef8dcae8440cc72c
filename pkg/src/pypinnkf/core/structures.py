"""
    Core data structures used in PyPinnKF.
    This module defines the primary data structures utilized throughout PyPinnKF that don't rely on other project's modules
    (apart from the enums), plus the package exception hierarchy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt

from pypinnkf.core.enums import E_Mode, E_Problem

FloatArray = npt.NDArray[np.float64]

# -----------------------------------------------
# ------------------ Exceptions -----------------
# -----------------------------------------------
class PinnKFError(Exception):
    """Base class for all package errors."""

class ConfigError(PinnKFError):
    """Invalid experiment configuration or CLI input."""

class DomainError(PinnKFError, ValueError):
    """A point or coefficient lies outside its admissible set."""

class GraphConstructionError(PinnKFError, TypeError):
    """An autodiff graph uses an unsupported operand or contains a cycle."""

class NonFiniteError(PinnKFError, FloatingPointError):
    """A network forward pass produced a non-finite intermediate."""

    def __init__(self, layer: int, message: str = ""):
        self.layer = layer
        super().__init__(message or f"Non-finite intermediate at layer {layer}")

class AdamError(PinnKFError):
    """An ADAM step was rejected (non-finite gradient)."""

class EnKFError(PinnKFError):
    """The EnKF analysis could not be computed."""

class TrainingDivergedError(PinnKFError):
    """Every individual of a population has non-finite objectives."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report

class ArtifactError(PinnKFError, OSError):
    """Reading or writing a run artifact failed."""

    def __init__(self, path, message: str):
        self.path = str(path)
        super().__init__(f"{message}: {self.path}")


# -----------------------------------------------
# ----------------- Dataclasses -----------------
# -----------------------------------------------
@dataclass(frozen=True)
class NetworkArchitecture:
    """
        Dense tanh network mapping (x, t) to u.

        Parameter layout (the genome): for every layer l, the row-major weight matrix of shape
        (w_l, w_{l+1}) followed by the bias vector (w_{l+1},); layers in order; then `physics_slots`
        trailing raw physics scalars. Crossover relies on this layout being identical for all genomes.
    """
    layer_widths: tuple[int, ...]
    physics_slots: int = 0

    def __post_init__(self):
        widths = tuple(int(w) for w in self.layer_widths)
        object.__setattr__(self, "layer_widths", widths)

        if len(widths) < 3:
            raise ValueError(f"Need at least one hidden layer, got widths {widths}")
        if widths[0] != 2 or widths[-1] != 1:
            raise ValueError(f"Input width must be 2 and output width 1, got {widths}")
        if any(w <= 0 for w in widths):
            raise ValueError(f"Layer widths must be positive, got {widths}")
        if self.physics_slots < 0:
            raise ValueError("physics_slots must be non-negative")

    @property
    def n_layers(self) -> int:
        ''' Number of affine maps (hidden layers + output layer) '''
        return len(self.layer_widths) - 1

    @property
    def n_network_params(self) -> int:
        w = self.layer_widths
        return sum(w[i] * w[i + 1] + w[i + 1] for i in range(len(w) - 1))

    @property
    def n_params(self) -> int:
        return self.n_network_params + self.physics_slots

    def layer_slices(self) -> list[tuple[slice, slice, tuple[int, int]]]:
        """(weight slice, bias slice, weight shape) per layer in genome order."""
        out = []
        offset = 0
        w = self.layer_widths
        for i in range(len(w) - 1):
            shape = (w[i], w[i + 1])
            n_w = shape[0] * shape[1]
            w_slice = slice(offset, offset + n_w)
            b_slice = slice(offset + n_w, offset + n_w + shape[1])
            out.append((w_slice, b_slice, shape))
            offset += n_w + shape[1]
        return out

    @property
    def physics_index(self) -> int | None:
        return self.n_network_params if self.physics_slots else None


_TINY = np.finfo(np.float64).tiny
_BELOW_ONE = np.nextafter(1.0, 0.0)


def softplus(raw) -> FloatArray:
    """log(1 + e^raw), never below the smallest normal float."""
    return np.maximum(np.logaddexp(0.0, raw), _TINY)


def sigmoid(raw) -> FloatArray:
    """Logistic map held strictly inside (0, 1) where tanh saturates."""
    return np.clip(0.5 * (1.0 + np.tanh(0.5 * np.asarray(raw, dtype=np.float64))), _TINY, _BELOW_ONE)


@dataclass(frozen=True)
class PhysicsParameter:
    """
        Physics coefficient of a problem (viscosity or fractional order).

        Trainable coefficients live in raw, unconstrained space; `constrain` maps a raw value into
        the admissible set (softplus -> (0, inf) for the viscosity, sigmoid -> (0, 1) for the order).
    """
    name: str
    ''' "nu" or "alpha" '''
    true_value: float
    model_value: float
    ''' Value the PDE residual uses when the coefficient is not trained '''
    trainable: bool = False
    constraint: str = "softplus"
    init_range: tuple[float, float] = (0.0, 1.0)

    def constrain(self, raw):
        raw = np.asarray(raw, dtype=np.float64)
        if self.constraint == "softplus":
            return softplus(raw)
        if self.constraint == "sigmoid":
            return sigmoid(raw)
        raise ValueError(f"Unsupported constraint '{self.constraint}'")

    def unconstrain(self, value):
        value = np.asarray(value, dtype=np.float64)
        if self.constraint == "softplus":
            if np.any(value <= 0):
                raise DomainError(f"{self.name} must be positive, got {value}")
            return value + np.log(-np.expm1(-value))
        if self.constraint == "sigmoid":
            if np.any((value <= 0) | (value >= 1)):
                raise DomainError(f"{self.name} must lie in (0, 1), got {value}")
            return np.log(value) - np.log1p(-value)
        raise ValueError(f"Unsupported constraint '{self.constraint}'")


@dataclass(frozen=True)
class ProblemSpec:
    """
        Benchmark problem definition.
    """
    kind: E_Problem
    mode: E_Mode
    domain: tuple[tuple[float, float], tuple[float, float]]
    ''' ((x_min, x_max), (t_min, t_max)) '''
    physics: PhysicsParameter
    misspecified: bool = False
    ''' Forward problem solved with a wrong model (viscosity or forcing) '''
    forcing_noise: float = 0.0
    ''' Relative amplitude of the TFMDWE forcing perturbation when misspecified '''
    caputo_steps: int = 50

    @property
    def x_range(self) -> tuple[float, float]:
        return self.domain[0]

    @property
    def t_range(self) -> tuple[float, float]:
        return self.domain[1]

    @property
    def is_inverse(self) -> bool:
        return self.mode == E_Mode.INVERSE


@dataclass(frozen=True)
class CollocationSets:
    """
        Training point sets, each an (n, 2) array of (x, t) rows.
    """
    ic_points: FloatArray
    bc_points: FloatArray
    res_points: FloatArray
    forcing_noise: FloatArray | None = None
    ''' Multiplicative forcing factor (1 + level * xi) per residual point, xi standard normal; None for the exact model '''

    @property
    def n_res(self) -> int:
        return int(self.res_points.shape[0])


@dataclass(frozen=True)
class ObservationSet:
    """
        Noisy samples of the true field at fixed space-time points.
    """
    points: FloatArray
    ''' (N_obs, 2) array of (x, t) '''
    values: FloatArray
    ''' Noisy observations '''
    sigma_obs: FloatArray
    ''' Observation noise standard deviation per point '''
    eta: float = 0.0
    seed: int = 0

    def __len__(self) -> int:
        return int(self.points.shape[0])

    @property
    def targets(self) -> FloatArray:
        return self.values

    @classmethod
    def empty(cls) -> "ObservationSet":
        return cls(points=np.zeros((0, 2)), values=np.zeros(0), sigma_obs=np.zeros(0))


@dataclass(frozen=True)
class ObjectiveVector:
    """
        The four PINN loss components (mean squared misfits).
    """
    l_res: float
    l_ic: float
    l_bc: float
    l_data: float

    NAMES = ("l_res", "l_ic", "l_bc", "l_data")

    def as_array(self) -> FloatArray:
        return np.array([self.l_res, self.l_ic, self.l_bc, self.l_data], dtype=np.float64)

    @classmethod
    def from_array(cls, values) -> "ObjectiveVector":
        v = [float(x) for x in values]
        if len(v) != 4:
            raise ValueError(f"Expected 4 objective components, got {len(v)}")
        return cls(*v)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.as_array())))


@dataclass(frozen=True)
class LossWeights:
    """
        Scalarization weights; ordered like `ObjectiveVector` when converted to an array.
    """
    w_res: float = 1.0
    w_ic: float = 1.0
    w_bc: float = 1.0
    w_data: float = 1.0

    def __post_init__(self):
        w = self.as_array()
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError(f"Loss weights must be finite and non-negative, got {w}")
        if not np.any(w > 0):
            raise ValueError("At least one loss weight must be positive")

    def as_array(self) -> FloatArray:
        return np.array([self.w_res, self.w_ic, self.w_bc, self.w_data], dtype=np.float64)


@dataclass(frozen=True)
class EnsembleMatrix:
    """
        Member predictions at the observation points, shape (N_ens, N_obs).
    """
    values: FloatArray
    member_ids: tuple[int, ...] = ()

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[0] < 2:
            raise ValueError(f"Ensemble needs at least 2 members, got shape {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("Ensemble contains non-finite predictions")

    @property
    def n_members(self) -> int:
        return int(self.values.shape[0])

    @property
    def n_obs(self) -> int:
        return int(self.values.shape[1])


@dataclass(frozen=True)
class ObservationErrorModel:
    """
        Diagonal observation covariance R.
    """
    variances: FloatArray

    def __post_init__(self):
        if np.any(~np.isfinite(self.variances)) or np.any(self.variances <= 0):
            raise ValueError("Observation variances must be finite and strictly positive")

    @classmethod
    def from_observations(cls, obs: ObservationSet, floor: float = 1e-8) -> "ObservationErrorModel":
        return cls(np.maximum(np.asarray(obs.sigma_obs, dtype=np.float64) ** 2, floor))


@dataclass(frozen=True)
class AnalysisData:
    """
        EnKF posterior at the observation points; `mean` is the data set of the next training round.
    """
    points: FloatArray
    analysis: FloatArray
    ''' (N_ens, N_obs) analysis ensemble '''
    mean: FloatArray
    gain_diag: FloatArray = field(default_factory=lambda: np.zeros(0))
    ''' Diagonal of the Kalman gain '''
    max_offdiag_corr: float = 0.0
    ''' Largest absolute off-diagonal forecast correlation '''

    def __len__(self) -> int:
        return int(self.points.shape[0])

    @property
    def targets(self) -> FloatArray:
        return self.mean


@dataclass(frozen=True)
class TrainingContext:
    """
        Everything a population task shares: network layout, problem, point sets, current data set.
    """
    arch: NetworkArchitecture
    spec: ProblemSpec
    coll: CollocationSets
    data: ObservationSet | AnalysisData | None = None
    weights: LossWeights = field(default_factory=LossWeights)
    record: bool = False
    ''' Keep per-epoch loss rows of memetic refinements '''


@dataclass
class trainRequest:
    """
        One individual's unit of work in the population farm, filled in place by the task.
    """
    index: int
    ''' Position in the submitted batch; results are re-ordered by it '''
    genome: FloatArray
    seed: int = 0
    epochs: int = 0
    ''' ADAM epochs of a refinement; 0 for a plain evaluation '''
    res_idx: np.ndarray | None = None
    ''' Residual subset the objectives are evaluated on (None: the full set) '''

    params: FloatArray | None = None
    objectives: ObjectiveVector | None = None
    scalar: float = float("inf")
    trajectory: list[dict[str, float]] = field(default_factory=list)
    success: bool = False
    message: str = ""
    cancelled: bool = False
    ''' Set by the pool on timeout; the work stops at the next epoch and leaves the request alone '''
