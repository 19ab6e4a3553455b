"""Experiment configuration, Monte Carlo drivers, CSV output and the CLI."""

from .config import EXPERIMENTS, ExperimentConfig, load_config, make_config
from .experiments import ResultRow, run_experiment, wilson_half_width, wilson_interval
from .report import emit_csv, parse_csv, plot_script, read_csv, rows_to_csv

__all__ = [
    "EXPERIMENTS",
    "ExperimentConfig",
    "ResultRow",
    "emit_csv",
    "load_config",
    "make_config",
    "parse_csv",
    "plot_script",
    "read_csv",
    "rows_to_csv",
    "run_experiment",
    "wilson_half_width",
    "wilson_interval",
]
