from pathlib import Path
from typing import Any, Iterable

import pandas as pd

# ---- Package imports ----
from pypinnkf.core.enums import E_Variant
from pypinnkf.core.io import _parse_variant
from pypinnkf.core.experiment_manager import experiment_manager, sweep_configs, write_report
from pypinnkf.core.models import ExperimentConfig, RunReport
from pypinnkf.core.structures import TrainingDivergedError
from pypinnkf.tools.logger import get_logger

logger = get_logger(__name__)


def _resolve_config(config: ExperimentConfig | str | Path | None, overrides: dict[str, Any]) -> ExperimentConfig:
    """Config object, TOML path or None (defaults), with keyword overrides applied on top."""
    if config is None:
        base = ExperimentConfig()
    elif isinstance(config, ExperimentConfig):
        base = config
    else:
        base = ExperimentConfig.from_toml(config)
    return base.replace(**overrides)


def runExperiment(config: ExperimentConfig | str | Path | None = None, **overrides: Any) -> RunReport:
    """
        Run one experiment and write its artifacts under <out>/runs/<run name>.
        Args:
            config (ExperimentConfig | str | Path | None): Config object or flat TOML file. Defaults to None.
            **overrides: Field overrides (problem, mode, variant, eta, seed, out, budgets, ...).
        Returns:
            RunReport: Metrics, per-iteration records and training trajectories.
        Raises:
            TrainingDivergedError: Every member diverged; the partial report is already written.
    """
    manager = experiment_manager(_resolve_config(config, overrides))
    manager.managerRoutine()
    return manager.getResults()


def generateData(config: ExperimentConfig | str | Path | None = None, **overrides: Any) -> dict[str, str]:
    """
        Write the observation and collocation tables of one (problem, eta, seed) under <out>/data.
        Returns:
            dict[str, str]: file name -> sha256.
    """
    manager = experiment_manager(_resolve_config(config, overrides))
    return manager.generate_data()


def runSweep(
        config: ExperimentConfig | str | Path | None = None,
        variants: Iterable[E_Variant | str] = tuple(E_Variant),
        etas: Iterable[float] = (0.0, 0.2, 0.5, 0.8),
        seeds: Iterable[int] = (0,),
        **overrides: Any,
        ) -> list[RunReport]:
    """
        Run every (seed, eta, variant) combination in turn. Diverged runs are logged and kept as
        partial reports; the sweep carries on.
    """
    base = _resolve_config(config, overrides)
    reports: list[RunReport] = []
    configs = sweep_configs(base, [_parse_variant(v) for v in variants], list(etas), list(seeds))
    for i, cfg in enumerate(configs, start=1):
        logger.info(f"Sweep run {i}/{len(configs)}: {cfg.run_name}")
        try:
            reports.append(runExperiment(cfg))
        except TrainingDivergedError as e:
            logger.error(f"{cfg.run_name} diverged: {e}")
            if e.report is not None:
                reports.append(e.report)
    return reports


def buildReport(root: str | Path) -> pd.DataFrame:
    """
        Aggregate all run reports under `root` into summary and comparison tables.
        Returns:
            pd.DataFrame: Mean and sample std per (problem, mode, model, eta).
    """
    summary, _ = write_report(root)
    return summary


def run_experiment(config: ExperimentConfig | str | Path | None = None, **overrides: Any) -> RunReport:
    """
        PEP 8 alias for runExperiment.
    """
    return runExperiment(config, **overrides)


def generate_data(config: ExperimentConfig | str | Path | None = None, **overrides: Any) -> dict[str, str]:
    """
        PEP 8 alias for generateData.
    """
    return generateData(config, **overrides)


def run_sweep(config: ExperimentConfig | str | Path | None = None, **kwargs: Any) -> list[RunReport]:
    """
        PEP 8 alias for runSweep.
    """
    return runSweep(config, **kwargs)


def build_report(root: str | Path) -> pd.DataFrame:
    """
        PEP 8 alias for buildReport.
    """
    return buildReport(root)
