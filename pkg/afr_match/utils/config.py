"""Run configuration: CLI flags, environment variables and a dotenv-style file."""
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Union

from dotenv import dotenv_values

from afr_match.errors import AfrMatchError, ConfigError
from afr_match.utils.sweep_options import (
    DEFAULT_MODES,
    DEFAULT_THRESHOLDS,
    normalize_modes,
    normalize_thresholds,
)

DEFAULT_CONFIG_FILE = '.env'
DEFAULT_BATCH_SIZE = 32
DEFAULT_SEED = 42
EXTRACTOR_CHOICES = ('baseline', 'backbone')
FORMAT_CHOICES = ('csv', 'json')

# RunConfig field -> environment / config-file key
ENV_KEYS = {
    'model_path': 'AFRNET_MODEL_PATH',
    'embedding_output': 'AFRNET_EMBEDDING_OUTPUT',
    'jobs': 'AFRNET_JOBS',
    'dataset_root': 'AFRNET_DATASET',
    'output_root': 'AFRNET_OUT',
    'extractor': 'AFRNET_EXTRACTOR',
    'batch_size': 'AFRNET_BATCH_SIZE',
    'thresholds': 'AFRNET_THRESHOLDS',
    'modes': 'AFRNET_MODES',
    'seed': 'AFRNET_SEED',
    'split': 'AFRNET_SPLIT',
    'formats': 'AFRNET_FORMAT',
    'log_level': 'AFRNET_LOG_LEVEL',
}


def default_jobs() -> int:
    return os.cpu_count() or 1


@dataclass
class RunConfig:
    """Resolved settings for one CLI invocation."""
    dataset_root: Optional[Path] = None
    output_root: Path = Path('out')
    extractor: str = 'baseline'
    model_path: Optional[Path] = None
    embedding_output: Optional[str] = None
    batch_size: int = DEFAULT_BATCH_SIZE
    thresholds: List[float] = field(default_factory=lambda: list(DEFAULT_THRESHOLDS))
    modes: List[str] = field(default_factory=lambda: list(DEFAULT_MODES))
    seed: int = DEFAULT_SEED
    # Train fraction per altered category; sweeps and match dumps then score only the held-out part
    split: Optional[float] = None
    jobs: int = field(default_factory=default_jobs)
    formats: List[str] = field(default_factory=lambda: list(FORMAT_CHOICES))
    log_level: str = 'INFO'

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}", key='batch_size')
        if self.jobs < 1:
            raise ConfigError(f"jobs must be >= 1, got {self.jobs}", key='jobs')
        if self.extractor not in EXTRACTOR_CHOICES:
            raise ConfigError(
                f"extractor must be one of {EXTRACTOR_CHOICES}, got {self.extractor!r}", key='extractor'
            )
        bad_formats = [f for f in self.formats if f not in FORMAT_CHOICES]
        if bad_formats or not self.formats:
            raise ConfigError(f"format must be chosen from {FORMAT_CHOICES}, got {self.formats}", key='formats')
        if self.split is not None and not 0.0 < self.split < 1.0:
            raise ConfigError(f"split must be in (0, 1), got {self.split}", key='split')
        try:
            self.thresholds = normalize_thresholds(self.thresholds)
        except (AfrMatchError, ValueError) as e:
            raise ConfigError(str(e), key='thresholds') from e
        try:
            self.modes = normalize_modes(self.modes)
        except (AfrMatchError, ValueError) as e:
            raise ConfigError(str(e), key='modes') from e


def _split_list(value: Union[str, List[Any]]) -> List[str]:
    if isinstance(value, str):
        return [item.strip() for item in value.split(',') if item.strip()]
    return [str(item).strip() for item in value]


def _coerce(name: str, value: Any) -> Any:
    """Turn a raw flag/env/file value into the RunConfig field type."""
    try:
        if name in ('batch_size', 'seed', 'jobs'):
            return int(value)
        if name == 'split':
            return float(value)
        if name == 'thresholds':
            return [float(t) for t in _split_list(value)]
        if name == 'modes':
            return _split_list(value)
        if name == 'formats':
            return [f.lower() for f in _split_list(value)]
        if name in ('dataset_root', 'output_root', 'model_path'):
            return Path(value)
        if name == 'embedding_output':
            return str(value).strip()
        if name == 'extractor':
            return str(value).strip().lower()
        if name == 'log_level':
            return str(value).strip().upper()
        return value
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Invalid value for {name}: {value!r}", key=name) from e


def read_config_file(config_path: Optional[Union[str, Path]] = None) -> Dict[str, Optional[str]]:
    """
    Read a flat KEY=VALUE file.

    Args:
        config_path: Explicit file; when None, ./.env is used if present

    Raises:
        ConfigError: If an explicit config file doesn't exist
    """
    if config_path is None:
        default = Path(DEFAULT_CONFIG_FILE)
        return dict(dotenv_values(default)) if default.exists() else {}
    path = Path(config_path)
    if not path.exists():
        raise ConfigError(f"Config file not found: {config_path}", key='config')
    return dict(dotenv_values(path))


def load_run_config(
    cli_overrides: Optional[Mapping[str, Any]] = None,
    config_path: Optional[Union[str, Path]] = None,
    environ: Optional[Mapping[str, str]] = None
) -> RunConfig:
    """
    Resolve settings with precedence CLI flag > environment > config file > default.

    Args:
        cli_overrides: RunConfig field -> value; None values mean "not given"
        config_path: Optional dotenv-style file (default ./.env when present)
        environ: Environment mapping (default os.environ)

    Returns:
        Validated RunConfig

    Raises:
        ConfigError: On unreadable or invalid values
    """
    cli_overrides = cli_overrides or {}
    environ = os.environ if environ is None else environ
    file_values = read_config_file(config_path)

    resolved: Dict[str, Any] = {}
    for name, key in ENV_KEYS.items():
        for source in (cli_overrides.get(name), environ.get(key), file_values.get(key)):
            if source is not None and source != '':
                resolved[name] = _coerce(name, source)
                break

    for name, value in cli_overrides.items():
        if name not in ENV_KEYS and value is not None:
            resolved[name] = value

    try:
        return RunConfig(**resolved)
    except TypeError as e:
        raise ConfigError(f"Unknown configuration option: {e}") from e
