"""
    Viscous Burgers equation on x ∈ [-1, 1], t ∈ [0, 1]:

        u_t + u u_x - ν u_xx = 0,   u(x, 0) = -sin(πx),   u(±1, t) = 0

    The reference solution is the Cole-Hopf representation evaluated by quadrature; it is tabulated
    once on a dense grid, cached as CSV and read back through a bicubic spline. Points inside the
    steep front around x = 0 skip the spline and are evaluated by quadrature directly.
"""

from __future__ import annotations

import threading
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.interpolate import RectBivariateSpline

from pypinnkf.autodiff.graph import Node
from pypinnkf.autodiff.network import EvaluationBundle
from pypinnkf.core import constants as const
from pypinnkf.core.enums import E_Derivative
from pypinnkf.core.structures import ArtifactError, FloatArray
from pypinnkf.tools.logger import get_logger

logger = get_logger(__name__)


def residual_burgers(bundle: EvaluationBundle, nu: Node | float) -> Node:
    """u_t - ν u_xx + u u_x."""
    u = bundle.node(E_Derivative.U)
    return bundle.node(E_Derivative.U_T) - nu * bundle.node(E_Derivative.U_XX) + u * bundle.node(E_Derivative.U_X)


def initial_condition(x) -> FloatArray:
    return -np.sin(np.pi * np.asarray(x, dtype=np.float64))


def cole_hopf(x, t, nu: float = const.BURGERS_NU_TRUE,
              n_quad: int = const.ORACLE_QUAD_POINTS, half_width: float = const.ORACLE_QUAD_HALF_WIDTH) -> FloatArray:
    """
    u(x, t) = -∫ sin(π(x - s z)) w(z) dz / ∫ w(z) dz,  s = 2 sqrt(ν t),
    log w(z) = -cos(π(x - s z)) / (2πν) - z^2,  z ∈ [-half_width, half_width].

    Evaluated pointwise on matching x/t arrays; t = 0 returns the initial condition.
    """
    x, t = np.broadcast_arrays(np.asarray(x, dtype=np.float64), np.asarray(t, dtype=np.float64))
    shape = x.shape
    x, t = x.ravel(), t.ravel()
    out = np.empty_like(x)

    z = np.linspace(-half_width, half_width, n_quad)
    for tv in np.unique(t):
        mask = t == tv
        xs = x[mask]
        if tv <= 0:
            out[mask] = initial_condition(xs)
            continue
        s = 2.0 * np.sqrt(nu * tv)
        arg = np.pi * (xs[:, None] - s * z[None, :])
        log_w = -np.cos(arg) / (2.0 * np.pi * nu) - z[None, :] ** 2
        w = np.exp(log_w - log_w.max(axis=1, keepdims=True))
        num = np.trapezoid(np.sin(arg) * w, z, axis=1)
        den = np.trapezoid(w, z, axis=1)
        out[mask] = -num / den
    return out.reshape(shape)


class BurgersOracle:
    """Tabulated reference solution with bicubic interpolation."""

    def __init__(self, xs: FloatArray, ts: FloatArray, table: FloatArray, nu: float = const.BURGERS_NU_TRUE):
        if table.shape != (xs.size, ts.size):
            raise ValueError(f"Oracle table shape {table.shape} does not match grid ({xs.size}, {ts.size})")
        self.xs = np.asarray(xs, dtype=np.float64)
        self.ts = np.asarray(ts, dtype=np.float64)
        self.table = np.asarray(table, dtype=np.float64)
        self.nu = nu
        self.front_half_width = const.ORACLE_FRONT_HALF_WIDTH
        self._spline = RectBivariateSpline(self.xs, self.ts, self.table, kx=3, ky=3)

    @classmethod
    def build(cls, n_x: int = const.ORACLE_GRID[0], n_t: int = const.ORACLE_GRID[1],
              nu: float = const.BURGERS_NU_TRUE) -> "BurgersOracle":
        (x0, x1), (t0, t1) = const.BURGERS_DOMAIN
        xs = np.linspace(x0, x1, n_x)
        ts = np.linspace(t0, t1, n_t)
        logger.info(f"Building Burgers reference table on a {n_x}x{n_t} grid (nu={nu:.6g})")
        table = np.empty((n_x, n_t))
        for j, tv in enumerate(ts):
            table[:, j] = cole_hopf(xs, np.full_like(xs, tv), nu)
        # the boundary values are zero by symmetry; remove quadrature round-off
        table[0, :] = 0.0
        table[-1, :] = 0.0
        return cls(xs, ts, table, nu)

    def __call__(self, x, t) -> FloatArray:
        x, t = np.broadcast_arrays(np.asarray(x, dtype=np.float64), np.asarray(t, dtype=np.float64))
        shape = x.shape
        x, t = x.ravel(), t.ravel()
        out = self._spline.ev(x, t)
        # the front at x = 0 is a few table cells wide at late times
        front = np.abs(x) < self.front_half_width
        if front.any():
            out[front] = cole_hopf(x[front], t[front], self.nu)
        return out.reshape(shape)

    def to_frame(self) -> pd.DataFrame:
        X, T = np.meshgrid(self.xs, self.ts, indexing="ij")
        return pd.DataFrame({"x": X.ravel(), "t": T.ravel(), "u": self.table.ravel()})

    def save(self, path: str | Path) -> Path:
        p = Path(path)
        try:
            p.parent.mkdir(parents=True, exist_ok=True)
            self.to_frame().to_csv(p, index=False, float_format="%.17g")
        except OSError as e:
            raise ArtifactError(p, f"Could not write oracle cache ({e})") from e
        return p

    @classmethod
    def load(cls, path: str | Path, nu: float = const.BURGERS_NU_TRUE) -> "BurgersOracle":
        p = Path(path)
        try:
            df = pd.read_csv(p)
        except (OSError, pd.errors.ParserError) as e:
            raise ArtifactError(p, f"Could not read oracle cache ({e})") from e
        if list(df.columns) != ["x", "t", "u"]:
            raise ArtifactError(p, f"Unexpected oracle cache columns {list(df.columns)}")
        xs = np.unique(df["x"].to_numpy())
        ts = np.unique(df["t"].to_numpy())
        if xs.size * ts.size != len(df):
            raise ArtifactError(p, "Oracle cache is not a full tensor grid")
        df = df.sort_values(["x", "t"], kind="mergesort")
        return cls(xs, ts, df["u"].to_numpy().reshape(xs.size, ts.size), nu)


_ORACLE: BurgersOracle | None = None
_ORACLE_LOCK = threading.Lock()


def get_oracle(cache_path: str | Path | None = None) -> BurgersOracle:
    """
    Process-wide oracle: loaded from the CSV cache when present and of the configured size, otherwise
    built and written to the cache (a read-only cache location only logs a warning).
    """
    global _ORACLE
    with _ORACLE_LOCK:
        if _ORACLE is not None:
            return _ORACLE
        path = Path(cache_path or const.ORACLE_CACHE_PATH)
        oracle = None
        if path.exists():
            try:
                oracle = BurgersOracle.load(path)
                if (oracle.xs.size, oracle.ts.size) != tuple(const.ORACLE_GRID):
                    logger.warning(f"Oracle cache {path} has grid {oracle.table.shape}, rebuilding")
                    oracle = None
            except ArtifactError as e:
                logger.warning(f"{e}; rebuilding")
                oracle = None
        if oracle is None:
            oracle = BurgersOracle.build()
            try:
                oracle.save(path)
                logger.info(f"Burgers reference table cached at {path}")
            except ArtifactError as e:
                logger.warning(str(e))
        _ORACLE = oracle
        return oracle


def reset_oracle() -> None:
    global _ORACLE
    with _ORACLE_LOCK:
        _ORACLE = None
