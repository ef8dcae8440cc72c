from .experiments import runExperiment, run_experiment, generateData, generate_data, runSweep, run_sweep, buildReport, build_report

__all__ = ["runExperiment", "run_experiment", "generateData", "generate_data", "runSweep", "run_sweep", "buildReport", "build_report"]
