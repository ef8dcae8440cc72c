"""
Tests for configuration, data files, run artifacts and report aggregation.

- ExperimentConfig parsing, aliases and the flat TOML round trip
- data generation: manifest checksums, reproducibility, shared observation files
- a tiny end-to-end run through experiment_manager and the lib wrappers
- collect / aggregate / table building over synthetic report.json files
"""

import json
import math
import sys
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

# Add src to path
sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from pypinnkf.core import constants as const
from pypinnkf.core.artifacts import read_csv, read_json
from pypinnkf.core.enums import E_Mode, E_Problem, E_Variant
from pypinnkf.core.experiment_manager import (
    aggregate_metrics, collect_reports, experiment_manager, metric_table, sweep_configs, write_report,
)
from pypinnkf.core.models import ExperimentConfig
from pypinnkf.core.structures import ArtifactError, ConfigError
from pypinnkf.core.utilities import sha256_file
from pypinnkf.lib import buildReport, generate_data, runExperiment, runSweep


def _tiny(tmp_path, **kw) -> ExperimentConfig:
    fields = dict(problem="tfmdwe", mode="forward", variant="adam", eta=0.2, seed=0, out=str(tmp_path),
                  adam_epochs=2, nsga_generations=1, nsga_epochs=1, population=3, outer_max=1,
                  outer_generations=1, outer_epochs=1, n_res=10, obs_nx=4, obs_nt=3, workers=1)
    fields.update(kw)
    return ExperimentConfig(**fields)


# ---- configuration ----
def test_config_parsing_and_aliases():
    cfg = ExperimentConfig(problem="fractional", mode="inv", variant="nsga-iii", eta="20%", seed="3")
    assert (cfg.problem, cfg.mode, cfg.variant) == (E_Problem.TFMDWE, E_Mode.INVERSE, E_Variant.NSGA3)
    assert cfg.eta == 0.2 and cfg.seed == 3
    assert cfg.run_name == "tfmdwe-inverse-nsga3-eta0.2-seed3"
    assert cfg.run_dir == Path("out") / "runs" / cfg.run_name
    assert ExperimentConfig(eta=50).eta == 0.5
    assert ExperimentConfig(problem="burgers").resolved_outer_epochs == const.OUTER_EPOCHS["burgers"]


@pytest.mark.parametrize("bad", [
    {"eta": 0.3},
    {"eta": "lots"},
    {"seed": -1},
    {"problem": "heat"},
    {"variant": "mopinnenkf", "eta": 0.0},
    {"population": 1},
    {"adam_epochs": 0},
    {"slices": (0.5, 2.0)},
])
def test_invalid_configs_are_rejected(bad):
    with pytest.raises(ConfigError):
        ExperimentConfig(**bad)


def test_config_toml_round_trip(tmp_path):
    cfg = ExperimentConfig(problem="burgers", mode="inverse", variant="mopinnenkf", eta=0.5, seed=2,
                           out=str(tmp_path), population=6, slices=(0.25, 0.75), eps_iter=1e-5)
    path = tmp_path / "config.toml"
    path.write_text(cfg.to_toml(), encoding="utf-8")
    assert ExperimentConfig.from_toml(path) == cfg
    assert "outer_epochs" not in cfg.to_toml()


def test_config_file_errors(tmp_path):
    nested = tmp_path / "nested.toml"
    nested.write_text("[budgets]\nadam_epochs = 3\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_toml(nested)
    with pytest.raises(ConfigError):
        ExperimentConfig.from_toml(tmp_path / "missing.toml")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_mapping({"learning_rate": 0.1})
    with pytest.raises(ConfigError):
        ExperimentConfig().replace(colour="red")


def test_replace_ignores_none():
    cfg = ExperimentConfig(seed=4)
    assert cfg.replace(seed=None, eta=0.5) == ExperimentConfig(seed=4, eta=0.5)


# ---- data files ----
def test_generated_data_is_reproducible_and_checksummed(tmp_path):
    cfg = _tiny(tmp_path)
    first = generate_data(cfg)
    second = generate_data(cfg)
    assert first == second
    assert set(first) == {"collocation_tfmdwe_n10_seed0.csv", "observations_tfmdwe_eta0.2_seed0_4x3.csv"}

    manifest = read_json(cfg.data_dir / const.MANIFEST_FILE)
    listed = {entry["path"]: entry["sha256"] for entry in manifest["files"]}
    for name, digest in first.items():
        assert listed[name] == digest == sha256_file(cfg.data_dir / name)

    obs = read_csv(cfg.data_dir / "observations_tfmdwe_eta0.2_seed0_4x3.csv")
    assert list(obs.columns)[:2] == ["x", "t"] and len(obs) == 12


def test_burgers_data_includes_reference_table(tmp_path):
    cfg = _tiny(tmp_path, problem="burgers")
    checksums = experiment_manager(cfg).generate_data()
    assert "burgers_oracle.csv" in checksums
    oracle = read_csv(cfg.data_dir / "burgers_oracle.csv")
    assert list(oracle.columns) == ["x", "t", "u"]
    assert len(oracle) == const.ORACLE_GRID[0] * const.ORACLE_GRID[1] == 512 * 201


def test_variants_share_observation_files(tmp_path):
    adam = experiment_manager(_tiny(tmp_path, variant="adam"))
    enkf = experiment_manager(_tiny(tmp_path, variant="mopinnenkf"))
    assert adam.observations_path == enkf.observations_path
    assert adam.collocation_path == enkf.collocation_path

    obs_a, coll_a = adam.load_data()
    obs_b, coll_b = enkf.load_data()
    assert np.array_equal(obs_a.values, obs_b.values)
    assert np.array_equal(coll_a.res_points, coll_b.res_points)


def test_observation_grid_change_gets_its_own_file(tmp_path):
    coarse = experiment_manager(_tiny(tmp_path))
    obs_coarse, _ = coarse.load_data()
    fine = experiment_manager(_tiny(tmp_path, obs_nx=6, obs_nt=5))
    obs_fine, _ = fine.load_data()

    assert coarse.observations_path != fine.observations_path
    assert len(obs_coarse) == 12 and len(obs_fine) == 30
    assert coarse.observations_path.is_file() and fine.observations_path.is_file()


def test_data_file_with_wrong_point_count_is_rejected(tmp_path):
    manager = experiment_manager(_tiny(tmp_path))
    manager.generate_data()
    obs = read_csv(manager.observations_path)
    obs.iloc[:5].to_csv(manager.observations_path, index=False)
    with pytest.raises(ArtifactError):
        manager.load_data()


def test_malformed_data_file_is_an_artifact_error(tmp_path):
    manager = experiment_manager(_tiny(tmp_path))
    manager.generate_data()
    manager.observations_path.write_text("a,b\n1,2\n", encoding="utf-8")
    with pytest.raises(ArtifactError):
        manager.load_data()


# ---- runs ----
def test_single_run_writes_its_artifacts(tmp_path):
    report = runExperiment(_tiny(tmp_path), seed=1)
    run_dir = _tiny(tmp_path, seed=1).run_dir
    assert report.status == "ok"

    for name in ("config.toml", "report.json", "metrics.csv", "trajectory.csv", "solution_grid.csv",
                 "slices.csv", "best_params.csv", "manifest.json"):
        assert (run_dir / name).is_file(), name

    payload = read_json(run_dir / "report.json")
    assert payload["metrics_row"]["model"] == "ADAM-PINN"
    assert payload["metrics_row"]["mse"] == pytest.approx(report.metrics.mse)
    assert len(read_csv(run_dir / "trajectory.csv")) == 2
    assert ExperimentConfig.from_toml(run_dir / "config.toml") == _tiny(tmp_path, seed=1)


def test_rerun_writes_byte_identical_metrics(tmp_path):
    paths = []
    for out, workers in (("first", 1), ("second", 2)):
        cfg = _tiny(tmp_path / out, variant="mopinnenkf", workers=workers)
        experiment_manager(cfg).managerRoutine()
        paths.append(cfg.run_dir)

    first, second = paths
    for name in (const.METRICS_FILE, "final_front.csv", "analysis_iter1.csv"):
        assert (first / name).read_bytes() == (second / name).read_bytes(), name


def test_sweep_order_and_skips():
    base = ExperimentConfig(variant="adam", eta=0.0)
    configs = sweep_configs(base, list(E_Variant), [0.0, 0.2], [0, 1])
    names = [c.run_name for c in configs]
    assert len(configs) == 2 * (3 + 2)
    assert not any(c.variant == E_Variant.MOPINNENKF and c.eta == 0.0 for c in configs)
    assert names[0] == "burgers-forward-adam-eta0-seed0"
    assert [c.seed for c in configs] == [0] * 5 + [1] * 5


def test_sweep_and_report_end_to_end(tmp_path):
    reports = runSweep(_tiny(tmp_path), variants=["adam"], etas=[0.0, 0.2], seeds=[0])
    assert [r.eta for r in reports] == [0.0, 0.2]
    summary = buildReport(tmp_path / "runs")
    assert len(summary) == 2
    assert set(summary["n_seeds"]) == {1}
    assert (tmp_path / "runs" / "table_mse.csv").is_file()
    assert (tmp_path / "runs" / "report_manifest.json").is_file()


# ---- reporting ----
def _write_report(root: Path, name: str, row: dict) -> None:
    d = root / name
    d.mkdir(parents=True)
    (d / "report.json").write_text(json.dumps({"metrics_row": row}), encoding="utf-8")


def _row(seed, mse, mae, eta=0.2, model="MoPINNEnKF", **extra):
    return {"problem": "burgers", "mode": "inverse", "model": model, "eta": eta, "seed": seed,
            "status": "ok", "mse": mse, "mae": mae, "param_error": None, "param_estimate": None, **extra}


def test_aggregation_matches_hand_computation(tmp_path):
    _write_report(tmp_path, "a", _row(0, 1.0, 0.5, param_estimate=0.010))
    _write_report(tmp_path, "b", _row(1, 3.0, 1.5, param_estimate=0.012))
    _write_report(tmp_path, "c", _row(0, 2.0, 2.0, model="ADAM-PINN"))
    (tmp_path / "broken").mkdir()
    (tmp_path / "broken" / "report.json").write_text("{", encoding="utf-8")
    _write_report(tmp_path, "no-metrics", {"problem": "burgers", "mode": "inverse", "model": "ADAM-PINN",
                                           "eta": 0.2, "seed": 2, "status": "diverged"})

    df, skipped = collect_reports(tmp_path)
    assert skipped == 2 and len(df) == 3

    summary = aggregate_metrics(df).set_index("model")
    enkf = summary.loc["MoPINNEnKF"]
    assert enkf["n_seeds"] == 2
    assert enkf["mse_mean"] == pytest.approx(2.0)
    assert enkf["mse_std"] == pytest.approx(math.sqrt(2.0))
    assert enkf["mae_std"] == pytest.approx(math.sqrt(0.5))
    assert enkf["param_estimate_mean"] == pytest.approx(0.011)
    assert pd.isna(summary.loc["ADAM-PINN", "mse_std"])

    table = metric_table(summary.reset_index(), "mse").set_index("model")
    assert table.loc["MoPINNEnKF", "eta=0.2"] == "2 ± 1.4"
    assert table.loc["ADAM-PINN", "eta=0.2"] == "2"


def test_write_report_tables(tmp_path):
    _write_report(tmp_path, "a", _row(0, 1.0, 0.5, param_estimate=0.01))
    _write_report(tmp_path, "b", _row(1, 3.0, 1.5, param_estimate=0.01))
    summary, skipped = write_report(tmp_path)
    assert skipped == 0 and len(summary) == 1
    for name in ("summary.csv", "table_mse.csv", "table_mae.csv", "table_param_estimate.csv"):
        assert (tmp_path / name).is_file(), name


def test_report_without_runs_is_an_artifact_error(tmp_path):
    with pytest.raises(ArtifactError):
        write_report(tmp_path)
