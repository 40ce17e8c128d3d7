"""Configuration ingestion and dataset persistence."""

from .config import (FORMAT_VERSION, ConfigError, LabConfig, default_config,
                     load_config, parse_config, parse_sample)
from .datafile import DataFileError, load_dataset, save_dataset

__all__ = [
    "FORMAT_VERSION", "ConfigError", "LabConfig", "default_config",
    "load_config", "parse_config", "parse_sample",
    "DataFileError", "load_dataset", "save_dataset",
]
