"""
    Perturbed-observation ensemble Kalman filter over predictions at the observation points.

    The state is the vector of network predictions at the N_obs observation points and H is the
    identity. The forecast covariance P = A Aᵀ / (N_ens - 1) stays in factored form; the gain is
    applied through an N_ens × N_ens Cholesky solve:

        K = P (P + R)⁻¹ = S (I + Sᵀ R⁻¹ S)⁻¹ Sᵀ R⁻¹,    S = A / sqrt(N_ens - 1)
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from pypinnkf.autodiff.network import predict
from pypinnkf.core import constants as const
from pypinnkf.core import utilities as utils
from pypinnkf.core.structures import (
    AnalysisData, EnKFError, EnsembleMatrix, FloatArray, NetworkArchitecture, NonFiniteError, ObservationErrorModel,
    ObservationSet,
)
from pypinnkf.tools.logger import get_logger
from pypinnkf.training.nsga3 import Individual, Population

logger = get_logger(__name__)


def forecast_statistics(ens: EnsembleMatrix) -> tuple[FloatArray, FloatArray]:
    """Sample mean (N_obs,) and anomaly factor A (N_obs, N_ens) with P = A Aᵀ / (N_ens - 1)."""
    X = ens.values
    mean = X.mean(axis=0)
    return mean, (X - mean).T


def max_offdiag_correlation(anomalies: FloatArray) -> float:
    """Largest |corr| between two distinct observation points; points without spread count as 0."""
    norms = np.linalg.norm(anomalies, axis=1)
    live = norms > 0
    if live.sum() < 2:
        return 0.0
    unit = anomalies[live] / norms[live, None]
    corr = unit @ unit.T
    np.fill_diagonal(corr, 0.0)
    return float(np.max(np.abs(corr)))


def analyze(ens: EnsembleMatrix, obs: ObservationSet, R: ObservationErrorModel, seed: int) -> AnalysisData:
    """
    x_i^a = x_i^f + K (y + e_i - x_i^f), e_i ~ N(0, R) drawn from the seeded stream (seed, "enkf").
    """
    n_ens, n_obs = ens.values.shape
    r = np.asarray(R.variances, dtype=np.float64)
    if n_obs != len(obs) or r.shape != (n_obs,):
        raise EnKFError(f"Dimension mismatch: ensemble {ens.values.shape}, {len(obs)} observations, R {r.shape}")
    if np.any(r <= 0):
        raise EnKFError("Observation variances must be strictly positive")

    X = ens.values
    _, A = forecast_statistics(ens)
    S = A / np.sqrt(n_ens - 1)

    M = np.eye(n_ens) + S.T @ (S / r[:, None])
    try:
        factor = cho_factor(M, lower=True)
    except LinAlgError as e:
        raise EnKFError(f"Innovation covariance is not positive definite in ensemble space ({e})") from e

    rng = utils.make_rng(seed, "enkf")
    perturbed = obs.values[None, :] + rng.standard_normal((n_ens, n_obs)) * np.sqrt(r)[None, :]
    innovations = perturbed - X

    # rows: Sᵀ R⁻¹ d_i for every member
    projected = (innovations / r[None, :]) @ S
    increments = (S @ cho_solve(factor, projected.T)).T
    analysis = X + increments

    gain_diag = np.sum(S * cho_solve(factor, S.T).T, axis=1) / r
    corr = max_offdiag_correlation(A)
    if corr > 0.99:
        logger.info(f"Forecast ensemble is nearly collinear across points (max |corr| = {corr:.3f})")

    return AnalysisData(points=obs.points.copy(), analysis=analysis, mean=analysis.mean(axis=0),
                        gain_diag=gain_diag, max_offdiag_corr=corr)


def ensemble_members(pop: Population, min_size: int = const.MIN_ENSEMBLE_SIZE) -> list[Individual]:
    """
    The rank-1 front, padded up to `min_size` with later-rank members (lowest rank first, then
    smallest niche distance). Individuals with non-finite objectives never join.
    """
    finite = [ind for ind in pop.individuals if ind.is_finite]
    ordered = sorted(finite, key=lambda ind: (ind.rank if ind.rank is not None else np.inf, ind.distance))
    members = [ind for ind in ordered if ind.rank == 1]
    for ind in ordered:
        if len(members) >= min_size:
            break
        if ind.rank != 1:
            members.append(ind)
    return members


def build_ensemble(pop: Population, arch: NetworkArchitecture, obs: ObservationSet,
                   min_size: int = const.MIN_ENSEMBLE_SIZE) -> EnsembleMatrix:
    rows, ids = [], []
    for ind in ensemble_members(pop, min_size):
        try:
            rows.append(predict(ind.genome, arch, obs.points))
            ids.append(ind.uid)
        except NonFiniteError as e:
            logger.warning(f"Individual {ind.uid} dropped from the ensemble: {e}")
    if len(rows) < 2:
        raise EnKFError(f"Need at least 2 ensemble members, got {len(rows)}")
    if len(rows) < min_size:
        logger.warning(f"Ensemble has {len(rows)} members, below the minimum of {min_size}")
    return EnsembleMatrix(values=np.vstack(rows), member_ids=tuple(ids))
