"""Command-line front end: config validation, task runner and bundled presets."""
from .config import ExperimentConfig, validate_config
from .runner import run

__all__ = ["ExperimentConfig", "validate_config", "run"]
