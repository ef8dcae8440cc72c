"""
    Collocation sets, noisy observations and the observation operator.

    Observation noise at grid location x is Gaussian with standard deviation η · std_t(u_truth(x, ·)),
    the spread of the true field over the observed time slice at that location.
"""

from __future__ import annotations

from typing import Callable

import numpy as np
import pandas as pd
from scipy.stats import qmc

from pypinnkf.core import constants as const
from pypinnkf.core import utilities as utils
from pypinnkf.core.structures import CollocationSets, FloatArray, ObservationSet, ProblemSpec
from pypinnkf.problems import ground_truth
from pypinnkf.tools.logger import get_logger

logger = get_logger(__name__)

Evaluator = Callable[[FloatArray], FloatArray]


def sample_collocation(spec: ProblemSpec, seed: int, n_ic: int = const.N_IC_POINTS,
                       n_bc: int = const.N_BC_POINTS, n_res: int = const.N_RES_POINTS) -> CollocationSets:
    """
    IC points on a uniform x grid at t_0, BC points split evenly between the two walls on a uniform
    t grid, residual points by seeded Latin-hypercube sampling of the space-time box.
    """
    (x0, x1), (t0, t1) = spec.domain

    ic = np.column_stack([np.linspace(x0, x1, n_ic), np.full(n_ic, t0)])

    n_left = n_bc // 2
    n_right = n_bc - n_left
    bc = np.vstack([
        np.column_stack([np.full(n_left, x0), np.linspace(t0, t1, n_left)]),
        np.column_stack([np.full(n_right, x1), np.linspace(t0, t1, n_right)]),
    ])

    sampler = qmc.LatinHypercube(d=2, rng=utils.make_rng(seed, "collocation", spec.kind))
    res = qmc.scale(sampler.random(n_res), [x0, t0], [x1, t1])

    factor = None
    if spec.forcing_noise > 0:
        factor = 1.0 + spec.forcing_noise * forcing_draws(spec, seed, n_res)

    return CollocationSets(ic_points=ic, bc_points=bc, res_points=res, forcing_noise=factor)


def forcing_draws(spec: ProblemSpec, seed: int, n: int) -> FloatArray:
    """Standard normal draws behind the forcing perturbation, one per residual point."""
    return utils.make_rng(seed, "forcing", spec.kind).standard_normal(n)


def observation_grid(spec: ProblemSpec, n_x: int, n_t: int) -> tuple[FloatArray, FloatArray]:
    """
    Interior x nodes of a uniform (n_x + 2)-node partition, and t_0 + k (T - t_0) / n_t, k = 1..n_t.
    """
    (x0, x1), (t0, t1) = spec.domain
    xs = np.linspace(x0, x1, n_x + 2)[1:-1]
    ts = t0 + np.arange(1, n_t + 1) * (t1 - t0) / n_t
    return xs, ts


def make_observations(spec: ProblemSpec, eta: float, grid: tuple[int, int] = const.OBS_GRID,
                      seed: int = 0) -> ObservationSet:
    """
    Truth from `ground_truth` on the observation grid plus N(0, σ_x²), σ_x = η std_t(u_truth(x, ·)).
    The noise stream depends on (seed, problem, η) only, so every trainer variant sees the same data.
    """
    if eta < 0:
        raise ValueError(f"Noise level must be >= 0, got {eta}")
    n_x, n_t = grid
    xs, ts = observation_grid(spec, n_x, n_t)
    points = utils.tensor_grid(xs, ts)
    truth = ground_truth(spec, points[:, 0], points[:, 1])

    spread = truth.reshape(n_x, n_t).std(axis=1)
    sigma = np.repeat(eta * spread, n_t)
    noise = utils.make_rng(seed, "observations", spec.kind, eta).standard_normal(points.shape[0])
    values = truth + sigma * noise

    logger.debug(f"Generated {points.shape[0]} observations (eta={eta}, mean sigma={sigma.mean():.3g})")
    return ObservationSet(points=points, values=values, sigma_obs=sigma, eta=float(eta), seed=int(seed))


def observe(evaluator: Evaluator, obs: ObservationSet) -> FloatArray:
    """H: exact evaluation at the observation points, in the set's point order."""
    if len(obs) == 0:
        return np.zeros(0)
    values = np.asarray(evaluator(obs.points), dtype=np.float64)
    return np.broadcast_to(values, (len(obs),)).copy()


# ---- tabular forms ----
def observations_to_frame(obs: ObservationSet) -> pd.DataFrame:
    return pd.DataFrame({"x": obs.points[:, 0], "t": obs.points[:, 1], "value": obs.values, "sigma": obs.sigma_obs})


def observations_from_frame(df: pd.DataFrame, eta: float = 0.0, seed: int = 0) -> ObservationSet:
    missing = {"x", "t", "value", "sigma"} - set(df.columns)
    if missing:
        raise ValueError(f"Observation table is missing columns {sorted(missing)}")
    return ObservationSet(
        points=df[["x", "t"]].to_numpy(dtype=np.float64),
        values=df["value"].to_numpy(dtype=np.float64),
        sigma_obs=df["sigma"].to_numpy(dtype=np.float64),
        eta=float(eta),
        seed=int(seed),
    )


def collocation_to_frame(coll: CollocationSets, xi: FloatArray | None = None) -> pd.DataFrame:
    """(set, x, t, xi) rows; `xi` holds the forcing draws of the residual points (0 elsewhere)."""
    parts = []
    for name, pts in (("ic", coll.ic_points), ("bc", coll.bc_points), ("res", coll.res_points)):
        part = pd.DataFrame({"set": name, "x": pts[:, 0], "t": pts[:, 1], "xi": 0.0})
        if name == "res" and xi is not None:
            part["xi"] = xi
        parts.append(part)
    return pd.concat(parts, ignore_index=True)


def collocation_from_frame(df: pd.DataFrame, spec: ProblemSpec) -> CollocationSets:
    missing = {"set", "x", "t", "xi"} - set(df.columns)
    if missing:
        raise ValueError(f"Collocation table is missing columns {sorted(missing)}")
    pick = lambda name: df.loc[df["set"] == name, ["x", "t"]].to_numpy(dtype=np.float64)
    res_xi = df.loc[df["set"] == "res", "xi"].to_numpy(dtype=np.float64)
    factor = 1.0 + spec.forcing_noise * res_xi if spec.forcing_noise > 0 else None
    return CollocationSets(ic_points=pick("ic"), bc_points=pick("bc"), res_points=pick("res"), forcing_noise=factor)
