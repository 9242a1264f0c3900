"""
Configuration Loading
=====================

Reads config.yaml (repository root by default) and merges it over the
built-in defaults section by section. A missing file is not an error.
"""

import copy
import logging
import os
from typing import Any, Dict, Optional

import yaml

from .errors import ConfigValidationError

logger = logging.getLogger(__name__)

CONFIG_ENV_VAR = "LCSL_CONFIG"
WORKERS_ENV_VAR = "LCSL_WORKERS"

DEFAULT_CONFIG: Dict[str, Dict[str, Any]] = {
    'gp': {
        'restarts': 10,
        'bounds': [1e-6, 1e6],
        'init_range': [1e-2, 1e2],
        'jitter_ladder': [1e-10, 1e-9, 1e-8, 1e-7, 1e-6],
        'max_iter': 200,
        'gtol': 1e-6,
    },
    'policy': {
        'percentile': 95,
        'grid_size': 50,
        'refine': False,
        'seeding': 'grid',
    },
    'experiment': {
        'replications': 20,
        'n_test': 1000,
        'n_train_list': [50, 100, 200, 400],
        'base_seed': 2018,
        'workers': None,
        'full_profile': False,
    },
    'logging': {
        'level': 'INFO',
        'format': '%(asctime)s %(levelname)s %(name)s: %(message)s',
    },
}

# Full-scale protocol, enabled with experiment.full_profile or --full-profile
FULL_PROFILE = {
    'replications': 50,
    'n_train_list': [50, 100, 200, 400, 800],
}


def default_config_path() -> str:
    """Return config.yaml next to the package directory (or $LCSL_CONFIG)."""
    env_path = os.environ.get(CONFIG_ENV_VAR)
    if env_path:
        return env_path
    package_dir = os.path.dirname(os.path.abspath(__file__))
    return os.path.join(os.path.dirname(package_dir), 'config.yaml')


def load_config(config_path: Optional[str] = None) -> Dict[str, Dict[str, Any]]:
    """
    Load configuration from a YAML file.

    Args:
        config_path: Path to the YAML file (defaults to default_config_path())

    Returns:
        Configuration dict with every section of DEFAULT_CONFIG present

    Raises:
        ConfigValidationError: the file is not YAML, is not a mapping, or a
            known section is not a mapping
    """
    if config_path is None:
        config_path = default_config_path()

    config = copy.deepcopy(DEFAULT_CONFIG)

    if not os.path.exists(config_path):
        logger.warning(f"Config file not found: {config_path}, using defaults")
        return config

    with open(config_path, 'r') as f:
        try:
            loaded = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise ConfigValidationError([f"{config_path} is not valid YAML: {e}"]) from e

    if loaded is None:
        loaded = {}
    if not isinstance(loaded, dict):
        raise ConfigValidationError([f"{config_path} must contain a mapping of sections, got {type(loaded).__name__}"])

    problems = []
    for section, values in loaded.items():
        if section not in config:
            config[section] = values
        elif values is None:
            # a section with every key commented out keeps its defaults
            continue
        elif isinstance(values, dict):
            config[section].update(values)
        else:
            problems.append(f"section '{section}' must be a mapping, got {type(values).__name__}")
    if problems:
        raise ConfigValidationError(problems)

    if config['experiment'].get('full_profile'):
        config['experiment'].update(FULL_PROFILE)

    logger.debug(f"Loaded configuration from: {config_path}")
    return config


def resolve_workers(configured: Optional[int] = None) -> int:
    """Worker count: $LCSL_WORKERS, then the configured value, then CPU count."""
    env_value = os.environ.get(WORKERS_ENV_VAR)
    if env_value:
        try:
            return max(1, int(env_value))
        except ValueError:
            logger.warning(f"Ignoring non-integer {WORKERS_ENV_VAR}={env_value!r}")
    if configured:
        return max(1, int(configured))
    return os.cpu_count() or 1
