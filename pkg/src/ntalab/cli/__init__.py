"""Command line interface and experiment runner."""
from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .report import RunReport, rerun, run

__all__ = ["ConfigError", "ExperimentConfig", "RunReport", "load_config", "parse_config", "rerun", "run"]
