#!/usr/bin/env python3
"""
Configuration Loader for branchcover
Resolves options from built-in defaults, config.yaml (or an options file) and the environment
"""

import os
import logging
from pathlib import Path
from typing import Dict, Any, Optional

import yaml

logger = logging.getLogger(__name__)

ENV_PREFIX = "BRANCHCOVER_"
OPTIONS_ENV = "BRANCHCOVER_OPTIONS"
DEFAULT_CONFIG_FILE = Path(__file__).parent.parent / "config.yaml"

DEFAULT_OPTIONS: Dict[str, Any] = {
    "log_level": "info",
    "cell": 0.01,
    "tol": 1e-3,
    "seed": 0,
    "max_lifts": 64,
    "window": 1.0,
    "fill_threshold": 0.99,
    "boundary_factor": 3.0,
    "workers": 4,
    "output": "out",
}

# Environment variable suffix -> (option, parser)
ENV_OPTIONS = {
    "LOG_LEVEL": ("log_level", lambda v: v.lower()),
    "CELL": ("cell", float),
    "TOL": ("tol", float),
    "SEED": ("seed", int),
    "MAX_LIFTS": ("max_lifts", int),
    "WINDOW": ("window", float),
    "WORKERS": ("workers", int),
    "OUTPUT": ("output", str),
}

LOG_LEVELS = ("trace", "debug", "info", "warning", "error", "fatal")


class ConfigLoader:
    """
    Load branchcover options.

    Layers, later ones win:
    - built-in defaults
    - the `options:` block of config.yaml, or the file named by BRANCHCOVER_OPTIONS
    - BRANCHCOVER_* environment variables
    """

    def __init__(self, config_file: Optional[Path] = None):
        override = os.environ.get(OPTIONS_ENV)
        if config_file is not None:
            self.config_file = Path(config_file)
        elif override:
            self.config_file = Path(override)
        else:
            self.config_file = DEFAULT_CONFIG_FILE
        self._options: Optional[Dict[str, Any]] = None

    def load_options(self) -> Dict[str, Any]:
        """
        Load application configuration options.

        Returns:
            Dictionary with configuration options
        """
        if self._options is not None:
            return dict(self._options)
        config = dict(DEFAULT_OPTIONS)
        config.update(self._load_file_options())
        config.update(self._load_env_options())
        self._options = config
        logger.debug(f"Loaded configuration: {config}")
        return dict(config)

    def _load_file_options(self) -> Dict[str, Any]:
        """
        Load the options block from a YAML or JSON file.

        A file with a top-level `options` key (config.yaml) contributes that
        block; any other mapping is taken as the options themselves.
        """
        if not self.config_file.exists():
            logger.debug(f"Options file {self.config_file} not found, using defaults")
            return {}

        try:
            with open(self.config_file, "r") as f:
                data = yaml.safe_load(f) or {}
        except (OSError, yaml.YAMLError) as e:
            logger.error(f"Error loading options from {self.config_file}: {e}")
            return {}

        if not isinstance(data, dict):
            logger.warning(f"Options file {self.config_file} is not a mapping, ignoring it")
            return {}
        options = data.get("options", data)
        known = {k: v for k, v in options.items() if k in DEFAULT_OPTIONS}
        unknown = sorted(set(options) - set(known))
        if unknown:
            logger.debug(f"Ignoring unknown options: {unknown}")
        return known

    def _load_env_options(self) -> Dict[str, Any]:
        """
        Load configuration from BRANCHCOVER_* environment variables.

        Invalid numeric values are logged and ignored.
        """
        options: Dict[str, Any] = {}
        for suffix, (key, parse) in ENV_OPTIONS.items():
            name = ENV_PREFIX + suffix
            if name not in os.environ:
                continue
            try:
                options[key] = parse(os.environ[name])
            except ValueError:
                logger.warning(f"Invalid {name} value: {os.environ[name]}")
        return options

    def validate_configuration(self) -> bool:
        """
        Validate option values.

        Returns:
            True if configuration is valid, False otherwise
        """
        config = self.load_options()
        valid = True

        for key in ("cell", "tol", "window", "boundary_factor"):
            try:
                if not float(config[key]) > 0:
                    logger.error(f"Option {key} must be positive, got {config[key]}")
                    valid = False
            except (TypeError, ValueError):
                logger.error(f"Option {key} is not a number: {config[key]!r}")
                valid = False

        for key in ("max_lifts", "workers"):
            if not isinstance(config[key], int) or config[key] < 1:
                logger.error(f"Option {key} must be a positive integer, got {config[key]!r}")
                valid = False

        if not isinstance(config["seed"], int) or config["seed"] < 0:
            logger.error(f"Option seed must be a nonnegative integer, got {config['seed']!r}")
            valid = False

        fill = config["fill_threshold"]
        if not isinstance(fill, (int, float)) or not 0 < fill <= 1:
            logger.error(f"Option fill_threshold must be in (0, 1], got {fill!r}")
            valid = False

        if str(config["log_level"]).lower() not in LOG_LEVELS:
            logger.error(f"Unknown log_level {config['log_level']!r}")
            valid = False

        return valid
