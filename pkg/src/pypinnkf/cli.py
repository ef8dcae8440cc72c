"""
Command-line interface for PyPinnKF.

    pypinnkf generate --problem burgers --eta 0.2 --seed 0
    pypinnkf run --problem tfmdwe --mode inverse --variant mopinnenkf --eta 0.5
    pypinnkf sweep --problem burgers --variants adam,nsga3,mopinnenkf --etas 0,0.2,0.5,0.8 --seeds 0-2
    pypinnkf report out/runs

Exit codes: 0 ok, 2 config error, 3 divergence, 4 IO.
"""

import argparse
import sys
from pathlib import Path
from typing import Any

from pypinnkf._meta import __version__
from pypinnkf.core.enums import E_ExitCode, E_Variant
from pypinnkf.core.io import _parse_eta_list, _parse_list, _parse_seed_list, _parse_variant
from pypinnkf.core.models import ExperimentConfig
from pypinnkf.core.structures import ArtifactError, ConfigError, PinnKFError, TrainingDivergedError
from pypinnkf.lib.experiments import buildReport, generateData, runExperiment, runSweep
from pypinnkf.tools.logger import get_logger, set_log_level

logger = get_logger(__name__)

# Flag -> ExperimentConfig field
_BUDGET_FLAGS = {
    "adam_epochs": int,
    "nsga_generations": int,
    "nsga_epochs": int,
    "population": int,
    "outer_max": int,
    "outer_generations": int,
    "outer_epochs": int,
    "eps_iter": float,
    "workers": int,
    "n_res": int,
}


def _add_experiment_options(p: argparse.ArgumentParser, *, single: bool = True) -> None:
    exp = p.add_argument_group("Experiment Options")
    exp.add_argument("--config", type=str, metavar="PATH", help="Flat TOML config; flags override its values")
    exp.add_argument("--problem", type=str, help="burgers | tfmdwe")
    exp.add_argument("--mode", type=str, help="forward | inverse")
    exp.add_argument("--out", type=str, metavar="DIR", help="Output root (data/ and runs/ are created below it)")
    exp.add_argument("--perfect-model", action="store_true",
                     help="Forward mode with the true coefficient instead of the misspecified one")
    exp.add_argument("--slices", type=str, metavar="T1,T2,...", help="Times of the solution slice curves")
    if single:
        exp.add_argument("--variant", type=str, help="adam | nsga3 | mopinnenkf")
        exp.add_argument("--eta", type=str, help="Noise level: 0, 0.2, 0.5, 0.8 (or 20%%)")
        exp.add_argument("--seed", type=str, help="Non-negative integer seed")

    budget = p.add_argument_group("Budget Overrides")
    for name, kind in _BUDGET_FLAGS.items():
        budget.add_argument(f"--{name.replace('_', '-')}", dest=name, type=kind, metavar="N" if kind is int else "X")


def _config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    overrides: dict[str, Any] = {name: getattr(args, name, None) for name in _BUDGET_FLAGS}
    for name in ("problem", "mode", "out", "variant", "eta", "seed"):
        overrides[name] = getattr(args, name, None)
    if args.slices is not None:
        overrides["slices"] = tuple(_parse_list(args.slices))
    if args.perfect_model:
        overrides["misspecified"] = False

    base = ExperimentConfig.from_toml(args.config) if args.config else ExperimentConfig()
    return base.replace(**overrides)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pypinnkf",
        description="PyPinnKF - multi-objective PINN ensembles with EnKF data assimilation",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"PyPinnKF {__version__}")
    parser.add_argument("--log-level", type=str, default=None, metavar="LEVEL",
                        help="DEBUG, INFO, WARNING or ERROR (default: PYPINNKF_LOG_LEVEL or INFO)")

    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="Write observation and collocation data files")
    _add_experiment_options(p_gen)

    p_run = sub.add_parser("run", help="Train one variant and write its report")
    _add_experiment_options(p_run)

    p_sweep = sub.add_parser("sweep", help="Run a grid of variants, noise levels and seeds sequentially")
    _add_experiment_options(p_sweep, single=False)
    p_sweep.add_argument("--variants", type=str, default="adam,nsga3,mopinnenkf")
    p_sweep.add_argument("--etas", type=str, default="0,0.2,0.5,0.8")
    p_sweep.add_argument("--seeds", type=str, default="0")

    p_rep = sub.add_parser("report", help="Aggregate run reports into comparison tables")
    p_rep.add_argument("directory", type=str, help="Directory searched recursively for report.json files")

    return parser


def _cmd_generate(args: argparse.Namespace) -> E_ExitCode:
    config = _config_from_args(args)
    checksums = generateData(config)
    for name, digest in checksums.items():
        print(f"{digest}  {config.data_dir / name}")
    return E_ExitCode.OK


def _cmd_run(args: argparse.Namespace) -> E_ExitCode:
    config = _config_from_args(args)
    report = runExperiment(config)
    row = report.metrics_row()
    print(f"{report.model_label} {row['problem']}/{row['mode']} eta={row['eta']:g} seed={row['seed']}: "
          f"mse={row.get('mse', float('nan')):.6g} mae={row.get('mae', float('nan')):.6g} -> {config.run_dir}")
    return E_ExitCode.OK


def _cmd_sweep(args: argparse.Namespace) -> E_ExitCode:
    # The base config only carries the shared fields; variant/eta/seed come from the lists
    config = _config_from_args(args).replace(variant=E_Variant.ADAM, eta=0.0)
    variants = [_parse_variant(v) for v in _parse_list(args.variants)]
    reports = runSweep(config, variants=variants, etas=_parse_eta_list(args.etas), seeds=_parse_seed_list(args.seeds))
    diverged = [r for r in reports if r.status != "ok"]
    print(f"{len(reports)} runs written under {Path(config.out)}; {len(diverged)} diverged")
    return E_ExitCode.DIVERGENCE if diverged else E_ExitCode.OK


def _cmd_report(args: argparse.Namespace) -> E_ExitCode:
    summary = buildReport(args.directory)
    print(summary.to_string(index=False))
    return E_ExitCode.OK


_COMMANDS = {
    "generate": _cmd_generate,
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "report": _cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    """Main CLI entry point; returns the process exit code."""
    parser = _build_parser()
    args = parser.parse_args(argv)

    try:
        if args.log_level:
            try:
                set_log_level(args.log_level)
            except ValueError:
                raise ConfigError(f"Unknown log level '{args.log_level}'") from None
        code = _COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"Config error: {e}", file=sys.stderr)
        code = E_ExitCode.CONFIG
    except TrainingDivergedError as e:
        print(f"Training diverged: {e}", file=sys.stderr)
        code = E_ExitCode.DIVERGENCE
    except ArtifactError as e:
        print(f"IO error: {e}", file=sys.stderr)
        code = E_ExitCode.IO
    except PinnKFError as e:
        # Numerical failures outside the divergence path
        logger.exception("Run failed")
        print(f"Error: {e}", file=sys.stderr)
        code = E_ExitCode.DIVERGENCE
    return int(code)


if __name__ == "__main__":
    sys.exit(main())
