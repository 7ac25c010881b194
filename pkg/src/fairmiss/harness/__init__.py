"""Experiment orchestration: configs, the seeded grid loop, persistence and reporting."""

from .config import ConfigError, ExperimentConfig, load_config, save_config
from .plots import boxplot_data, emit_boxplots
from .report import anova_report, build_layout, emit_anova_report, render_report
from .runner import ExperimentError, RunResult, run_baseline, run_experiment, run_iteration
from .store import BaselineRecord, FairnessRecord, ResultsStore
from .summary import summarize

__all__ = [
    "BaselineRecord",
    "ConfigError",
    "ExperimentConfig",
    "ExperimentError",
    "FairnessRecord",
    "ResultsStore",
    "RunResult",
    "anova_report",
    "boxplot_data",
    "build_layout",
    "emit_anova_report",
    "emit_boxplots",
    "load_config",
    "render_report",
    "run_baseline",
    "run_experiment",
    "run_iteration",
    "save_config",
    "summarize",
]
