from __future__ import annotations

from pathlib import Path
from typing import Iterable

import numpy as np
import pandas as pd

# ---- Package imports ----
import pypinnkf.core.constants as const
from pypinnkf.core.artifacts import ArtifactStore, read_csv, read_json
from pypinnkf.core.enums import E_Problem, E_Variant
from pypinnkf.core.models import MODEL_LABELS, ExperimentConfig, RunReport
from pypinnkf.core.structures import ArtifactError, CollocationSets, ObservationSet, TrainingDivergedError
from pypinnkf.lib.driver import network_evaluator, run_variant, solution_grid, solution_slices
from pypinnkf.problems import get_oracle, make_architecture, make_problem_spec
from pypinnkf.tools.logger import get_logger, reset_run_id, set_run_id
from pypinnkf.training.nsga3 import FRONT_COLUMNS
from pypinnkf.training.observations import (
    collocation_from_frame, collocation_to_frame, forcing_draws, make_observations, observations_from_frame,
    observations_to_frame, sample_collocation,
)

logger = get_logger(__name__)

METRIC_COLUMNS = ("mse", "mae", "param_error", "param_estimate")


def observations_name(problem: E_Problem, eta: float, seed: int, grid: tuple[int, int] = const.OBS_GRID) -> str:
    return f"observations_{problem.value}_eta{eta:g}_seed{seed}_{grid[0]}x{grid[1]}.csv"


def collocation_name(problem: E_Problem, seed: int, n_res: int) -> str:
    return f"collocation_{problem.value}_n{n_res}_seed{seed}.csv"


class experiment_manager:
    """
    Run one experiment end to end: make sure the shared data files exist, train the configured
    variant on them, and write every run artifact through an `ArtifactStore`.

    Args:
        config (ExperimentConfig): The experiment description.
    """

    def __init__(self, config: ExperimentConfig):

        self.config = config
        self.spec = make_problem_spec(config.problem, config.mode, config.misspecified)
        self.arch = make_architecture(self.spec)
        self.report: RunReport | None = None
        self.checksums: dict[str, str] = {}
        ''' data file name -> sha256 of the last generate_data() call '''

    # ---- data ----
    @property
    def observations_path(self) -> Path:
        c = self.config
        return c.data_dir / observations_name(c.problem, c.eta, c.seed, (c.obs_nx, c.obs_nt))

    @property
    def collocation_path(self) -> Path:
        c = self.config
        return c.data_dir / collocation_name(c.problem, c.seed, c.n_res)

    def generate_data(self) -> dict[str, str]:
        """
        Write the collocation table (per problem and seed), the observation table (per problem,
        eta and seed) and, for Burgers, the reference table. Returns file name -> checksum.
        """
        c = self.config
        with ArtifactStore(c.data_dir) as store:
            coll = sample_collocation(self.spec, c.seed, n_res=c.n_res)
            xi = forcing_draws(self.spec, c.seed, c.n_res)
            store.write_csv(self.collocation_path.name, collocation_to_frame(coll, xi))

            obs = make_observations(self.spec, c.eta, (c.obs_nx, c.obs_nt), c.seed)
            store.write_csv(self.observations_path.name, observations_to_frame(obs))

            if c.problem == E_Problem.BURGERS:
                store.write_csv("burgers_oracle.csv", get_oracle().to_frame())

            names = [self.collocation_path.name, self.observations_path.name]
            if c.problem == E_Problem.BURGERS:
                names.append("burgers_oracle.csv")
            self.checksums = {name: store.files[name] for name in names}

        for name, digest in self.checksums.items():
            logger.info(f"{name}: sha256 {digest}")
        return self.checksums

    def load_data(self) -> tuple[ObservationSet, CollocationSets]:
        """Read the shared data files, generating them first when absent."""
        if not (self.observations_path.exists() and self.collocation_path.exists()):
            logger.info(f"Data files for {self.config.run_name} not found, generating")
            self.generate_data()
        try:
            obs = observations_from_frame(read_csv(self.observations_path), self.config.eta, self.config.seed)
            coll = collocation_from_frame(read_csv(self.collocation_path), self.spec)
        except ValueError as e:
            raise ArtifactError(self.config.data_dir, f"Malformed data file ({e})") from e

        c = self.config
        if len(obs) != c.obs_nx * c.obs_nt:
            raise ArtifactError(self.observations_path,
                                f"Holds {len(obs)} observations, the {c.obs_nx}x{c.obs_nt} grid needs {c.obs_nx * c.obs_nt}")
        if coll.res_points.shape[0] != c.n_res:
            raise ArtifactError(self.collocation_path,
                                f"Holds {coll.res_points.shape[0]} residual points, expected {c.n_res}")
        return obs, coll

    # ---- run ----
    def managerRoutine(self) -> RunReport:
        """
        Train the configured variant and write its artifacts. A diverged run still writes its
        partial report before the error propagates.
        """
        c = self.config
        token = set_run_id(c.run_name)
        try:
            obs, coll = self.load_data()
            logger.info(f"Running {MODEL_LABELS[c.variant]} on {c.problem.value} ({c.mode.value}), "
                        f"eta={c.eta:g}, seed={c.seed}")
            try:
                self.report = run_variant(self.spec, c.driver_config(), c.eta, c.seed, obs=obs, coll=coll, arch=self.arch)
            except TrainingDivergedError as e:
                self.report = e.report
                if self.report is not None:
                    self.write_run(self.report)
                raise
            self.write_run(self.report)
            return self.report
        finally:
            reset_run_id(token)

    def write_run(self, report: RunReport) -> Path:
        c = self.config
        with ArtifactStore(c.run_dir) as store:
            store.write_text(const.CONFIG_FILE, c.to_toml())
            store.write_json(const.REPORT_FILE, report.to_dict())
            store.write_rows(const.METRICS_FILE, [report.metrics_row()])
            if report.trajectory:
                store.write_rows(const.TRAJECTORY_FILE, report.trajectory)
            if report.fronts:
                store.write_rows(const.FRONTS_FILE, report.fronts, columns=list(FRONT_COLUMNS))
            if report.final_front:
                store.write_rows("final_front.csv", report.final_front)
            for m, analysis in enumerate(report.analyses, start=1):
                store.write_csv(f"analysis_iter{m}.csv", pd.DataFrame(
                    {"x": analysis.points[:, 0], "t": analysis.points[:, 1], "value": analysis.mean}))
            if report.best_params is not None:
                evaluator = network_evaluator(report.best_params, self.arch)
                store.write_csv(const.GRID_FILE, solution_grid(evaluator, self.spec))
                store.write_csv(const.SLICES_FILE, solution_slices(evaluator, self.spec, c.slices))
                store.write_csv("best_params.csv", pd.DataFrame({"theta": report.best_params}))
        logger.info(f"Artifacts written to {c.run_dir}")
        return c.run_dir

    def getResults(self) -> RunReport | None:
        return self.report


# -----------------------------------------------
# ------------------ Sweeps ---------------------
# -----------------------------------------------
def sweep_configs(base: ExperimentConfig, variants: Iterable[E_Variant], etas: Iterable[float],
                  seeds: Iterable[int]) -> list[ExperimentConfig]:
    """Cartesian product in (seed, eta, variant) order; MoPINNEnKF at eta = 0 is skipped."""
    configs = []
    for seed in seeds:
        for eta in etas:
            for variant in variants:
                if variant == E_Variant.MOPINNENKF and eta == 0.0:
                    logger.info(f"Skipping {MODEL_LABELS[variant]} at eta = 0 (no observations)")
                    continue
                configs.append(base.replace(variant=variant, eta=eta, seed=seed))
    return configs


# -----------------------------------------------
# ----------------- Reporting -------------------
# -----------------------------------------------
def collect_reports(root: str | Path) -> tuple[pd.DataFrame, int]:
    """Metrics rows of every report.json under `root`; unreadable reports are skipped and counted."""
    rows, skipped = [], 0
    for path in sorted(Path(root).rglob(const.REPORT_FILE)):
        try:
            payload = read_json(path)
            row = dict(payload["metrics_row"])
            if row.get("mse") is None:
                raise KeyError("mse")
        except (ArtifactError, KeyError, TypeError) as e:
            logger.warning(f"Skipping report {path}: {e}")
            skipped += 1
            continue
        row["path"] = str(path.parent)
        rows.append(row)
    return pd.DataFrame(rows), skipped


def aggregate_metrics(df: pd.DataFrame) -> pd.DataFrame:
    """Mean and sample std over seeds per (problem, mode, model, eta)."""
    keys = ["problem", "mode", "model", "eta"]
    present = [c for c in METRIC_COLUMNS if c in df.columns]
    grouped = df.groupby(keys, sort=True)
    out = grouped.size().rename("n_seeds").to_frame()
    for col in present:
        values = pd.to_numeric(df[col], errors="coerce")
        g = values.groupby([df[k] for k in keys], sort=True)
        out[f"{col}_mean"] = g.mean()
        out[f"{col}_std"] = g.std(ddof=1)
    return out.reset_index()


def metric_table(summary: pd.DataFrame, metric: str = "mse") -> pd.DataFrame:
    """Model × noise-level table of '<mean> ± <std>' cells."""
    def cell(row) -> str:
        mean, std = row[f"{metric}_mean"], row[f"{metric}_std"]
        if pd.isna(mean):
            return "N/A"
        return f"{mean:.4g}" if pd.isna(std) else f"{mean:.4g} ± {std:.2g}"

    cells = summary.assign(cell=summary.apply(cell, axis=1))
    table = cells.pivot_table(index=["problem", "mode", "model"], columns="eta", values="cell", aggfunc="first")
    table.columns = [f"eta={c:g}" for c in table.columns]
    return table.reset_index()


def write_report(root: str | Path) -> tuple[pd.DataFrame, int]:
    """Aggregate every run under `root` into summary.csv and per-metric tables; returns (summary, skipped)."""
    df, skipped = collect_reports(root)
    if df.empty:
        raise ArtifactError(root, "No readable run reports found")
    summary = aggregate_metrics(df)
    with ArtifactStore(Path(root), manifest_name="report_manifest.json") as store:
        store.write_csv("summary.csv", summary)
        for metric in ("mse", "mae"):
            store.write_csv(f"table_{metric}.csv", metric_table(summary, metric))
        if "param_estimate_mean" in summary and np.any(summary["param_estimate_mean"].notna()):
            store.write_csv("table_param_estimate.csv", metric_table(summary, "param_estimate"))
    logger.info(f"Aggregated {len(df)} reports ({skipped} skipped) under {root}")
    return summary, skipped
