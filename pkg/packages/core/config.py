"""Configuration: loads from env vars first, then ~/.greenshop/config.yaml fallback."""

from __future__ import annotations

import json
import os
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any

import yaml

from .errors import ConfigError

GREENSHOP_DIR = Path(os.environ.get("GREENSHOP_HOME", Path.home() / ".greenshop"))
CONFIG_PATH = GREENSHOP_DIR / "config.yaml"

DEFAULT_ORACLE_CAP = 10**7


def _config_path() -> Path:
    home = os.environ.get("GREENSHOP_HOME")
    return Path(home) / "config.yaml" if home else CONFIG_PATH


def _load_yaml() -> dict:
    path = _config_path()
    if path.exists():
        with open(path) as f:
            return yaml.safe_load(f) or {}
    return {}


_yaml_cache: dict | None = None


def get_config() -> dict:
    global _yaml_cache
    if _yaml_cache is None:
        _yaml_cache = _load_yaml()
    return _yaml_cache


def reset_config_cache() -> None:
    global _yaml_cache
    _yaml_cache = None


def _lookup(env_var: str, section: str, key: str) -> Any:
    value = os.environ.get(env_var)
    if value not in (None, ""):
        return value
    return get_config().get(section, {}).get(key)


def get_log_level() -> str:
    return str(_lookup("GREENSHOP_LOG_LEVEL", "logging", "level") or "WARNING").upper()


def get_workers() -> int:
    raw = _lookup("GREENSHOP_WORKERS", "experiment", "workers")
    workers = int(raw) if raw is not None else 1
    if workers < 1:
        raise ConfigError(f"workers must be >= 1, got {workers}")
    return workers


def get_oracle_cap() -> int:
    raw = _lookup("GREENSHOP_ORACLE_CAP", "oracle", "cap")
    return int(raw) if raw is not None else DEFAULT_ORACLE_CAP


def get_node_limit() -> int | None:
    raw = _lookup("GREENSHOP_NODE_LIMIT", "solver", "node_limit")
    return int(raw) if raw is not None else None


def get_time_limit() -> float | None:
    raw = _lookup("GREENSHOP_TIME_LIMIT", "solver", "time_limit")
    return float(raw) if raw is not None else None


def load_config_file(path: str | Path) -> dict:
    """Read a YAML, JSON or TOML config file into a plain dict."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e

    suffix = path.suffix.lower()
    try:
        if suffix in (".yaml", ".yml"):
            data = yaml.safe_load(text)
        elif suffix == ".json":
            data = json.loads(text)
        elif suffix == ".toml":
            data = tomllib.loads(text)
        else:
            raise ConfigError(f"unsupported config format '{suffix}' ({path})")
    except (yaml.YAMLError, json.JSONDecodeError, tomllib.TOMLDecodeError) as e:
        raise ConfigError(f"cannot parse config file {path}: {e}") from e

    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must contain a mapping at the top level")
    return data
