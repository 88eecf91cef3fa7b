"""Command line harness: pipeline commands and study drivers."""

from swellrom.harness_cli.config import StudyConfig, load_config
from swellrom.harness_cli.cli import main

__all__ = ["StudyConfig", "load_config", "main"]
