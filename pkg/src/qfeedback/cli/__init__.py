"""Command-line experiment runner."""

from .config import ExperimentConfig, SweepAxis, parse_config
from .main import main
from .runner import run_experiment

__all__ = ["ExperimentConfig", "SweepAxis", "main", "parse_config", "run_experiment"]
