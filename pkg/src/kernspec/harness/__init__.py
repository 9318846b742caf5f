"""Config-driven experiment harness."""

from .config import ConfigError, ExperimentConfig, build_config, load_config, validate
from .experiments import COLUMNS, plan
from .runner import run, summarize

__all__ = ["ConfigError", "ExperimentConfig", "build_config", "load_config", "validate",
           "COLUMNS", "plan", "run", "summarize"]
