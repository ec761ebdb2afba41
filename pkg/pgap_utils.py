import json
import logging
import math
import os
from copy import deepcopy
from os.path import dirname, join

import numpy as np
import yaml

from pgap_constants import THREADS_ENV

DEFAULT_CONFIG_FILE = join(dirname(os.path.abspath(__file__)), 'default_config.yml')

logger = logging.getLogger('pgap')


class DomainError(ValueError):
    """Argument outside the domain of a comparison function."""


class DensityFormatError(ValueError):
    """Malformed density file. `line` is the 1-based file line, when known."""

    def __init__(self, message: str, line: int = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DensityValidationError(ValueError):
    """Density rejected by the MCP(K,N) check."""

    def __init__(self, message: str, report=None):
        self.report = report
        super().__init__(message)


class SolverError(RuntimeError):
    pass


def _read_config_file(path: str) -> dict:
    if path.endswith('.json'):
        with open(path, 'r') as f:
            return json.load(f) or {}
    if path.endswith('.yml') or path.endswith('.yaml'):
        with open(path, 'r') as f:
            return yaml.safe_load(f) or {}
    raise ValueError("Unsupported configuration file format. Use .json or .yml/.yaml")


def _merge(base: dict, override: dict) -> dict:
    merged = deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = deepcopy(value)
    return merged


def get_parameters(config=None) -> dict:
    """
    Load solver configuration from file or dictionary, merged over the shipped defaults.
    """
    defaults = _read_config_file(DEFAULT_CONFIG_FILE)
    if config is None:
        return defaults
    if isinstance(config, str):
        user = _read_config_file(config)
    elif isinstance(config, dict):
        user = deepcopy(config)
    else:
        raise ValueError("Unsupported configuration type. Use dict or file path")
    return _merge(defaults, user)


def set_log_path(config: dict = None, log_path: str = None):
    """
    Resolve the log directory. `log_path` overrides the config setting.
    Returns None when file logging is not configured.
    """
    if log_path:
        os.makedirs(log_path, exist_ok=True)
        return log_path

    output = (config or {}).get('Output', {}) or {}
    root = output.get('Root', '') or ''
    if not root:
        return None

    log_path = join(root, 'logs')
    try:
        os.makedirs(log_path, exist_ok=True)
    except OSError:
        log_path = './logs'
        logger.warning(f"Log path not writable; falling back to {log_path}")
        os.makedirs(log_path, exist_ok=True)
    return log_path


def setup_logging(config: dict = None, verbose: bool = False, log_path: str = None) -> logging.Logger:
    """Attach stderr and (optionally) file handlers to the package logger."""
    root_logger = logging.getLogger('pgap')
    root_logger.setLevel(logging.DEBUG if verbose else logging.INFO)
    for handler in list(root_logger.handlers):
        if getattr(handler, '_pgap_handler', False):
            root_logger.removeHandler(handler)
            handler.close()

    stream = logging.StreamHandler()
    stream.setLevel(logging.DEBUG if verbose else logging.WARNING)
    stream.setFormatter(logging.Formatter('[%(levelname)s] %(message)s'))
    stream._pgap_handler = True
    root_logger.addHandler(stream)

    path = set_log_path(config, log_path)
    if path:
        logfile = ((config or {}).get('Output', {}) or {}).get('Logfile', '') or 'pgap.log'
        file_handler = logging.FileHandler(join(path, logfile))
        file_handler.setFormatter(logging.Formatter('%(asctime)s [%(levelname)s] %(name)s: %(message)s'))
        file_handler._pgap_handler = True
        root_logger.addHandler(file_handler)
    return root_logger


def parse_float_list(text: str) -> list:
    """Parse '1.5,2,3' into floats."""
    values = []
    for item in str(text).split(','):
        item = item.strip()
        if not item:
            continue
        try:
            values.append(float(item))
        except ValueError:
            raise ValueError(f"Not a number in list: {item!r}")
    if not values:
        raise ValueError(f"Empty list: {text!r}")
    return values


def worker_count() -> int:
    raw = os.environ.get(THREADS_ENV, '')
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            logger.warning(f"Ignoring {THREADS_ENV}={raw!r}; expected an integer")
    return min(4, os.cpu_count() or 1)


def spawn_rng(seed: int, index: int = 0) -> np.random.Generator:
    """Counter-based stream `index` of the 64-bit `seed`."""
    bit_generator = np.random.Philox(key=int(seed) & 0xFFFFFFFFFFFFFFFF)
    if index:
        bit_generator = bit_generator.jumped(int(index))
    return np.random.Generator(bit_generator)


def json_ready(value):
    """Convert numpy scalars/arrays to plain Python, non-finite floats to None."""
    if isinstance(value, dict):
        return {str(k): json_ready(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_ready(v) for v in value]
    if isinstance(value, np.ndarray):
        return [json_ready(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value
