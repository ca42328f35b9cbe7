"""Experiment presets, seeded runner and command-line entry point."""
from .config import EXPERIMENTS, ExperimentConfig, load_config, preset
from .runner import RunResult, emit, run, run_single

__all__ = ["EXPERIMENTS", "ExperimentConfig", "RunResult", "emit", "load_config", "preset", "run", "run_single"]
