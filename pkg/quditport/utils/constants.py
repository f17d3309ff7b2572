"""Numerical tolerances and runtime settings.

Explicit overrides win over a key=value config file, which wins over
``QUDITPORT_*`` environment variables, which win over the defaults below.
``Settings`` objects are frozen. ``default_settings`` caches the environment
view; the CLI replaces it process-wide through ``apply_settings``, which
rewrites the environment and clears that cache.
"""
import logging
import os
from functools import lru_cache
from typing import Any, Dict, Optional

from dotenv import dotenv_values
from pydantic import BaseModel, BaseSettings, conint, validator

logger = logging.getLogger(__name__)


class Tolerances(BaseModel):
    """Absolute tolerances used by invariant checks."""

    construction: float = 1e-12
    derived: float = 1e-10
    eigenvalue: float = 1e-8

    class Config:
        allow_mutation = False


class Settings(BaseSettings):
    max_dim: conint(ge=2) = 64
    oracle_max_dim: conint(ge=2) = 10
    workers: conint(ge=1) = 1
    tolerances: Tolerances = Tolerances()

    class Config:
        env_prefix = "QUDITPORT_"
        allow_mutation = False

    @validator("oracle_max_dim")
    def oracle_below_global_cap(cls, value, values):
        max_dim = values.get("max_dim")
        if max_dim is not None and value > max_dim:
            raise ValueError(
                f"oracle_max_dim ({value}) may not exceed max_dim ({max_dim})"
            )
        return value


_CONFIG_KEYS = {
    "max_dim": "max_dim",
    "oracle_max_dim": "oracle_max_dim",
    "workers": "workers",
}

_TOLERANCE_KEYS = {
    "tol_construction": "construction",
    "tol_derived": "derived",
    "tol_eigenvalue": "eigenvalue",
}


def read_config_file(config_path: str) -> Dict[str, Any]:
    """Reads a plain ``key=value`` file into settings overrides.

    Keys are case-insensitive and may carry the ``QUDITPORT_`` prefix.
    Unknown keys are kept so that commands can pick up their own defaults
    (e.g. ``seed`` or ``n_samples``).
    """
    raw = dotenv_values(config_path)
    parsed: Dict[str, Any] = {}
    for key, value in raw.items():
        if value is None:
            continue
        name = key.lower()
        if name.startswith("quditport_"):
            name = name[len("quditport_") :]
        parsed[name] = value.strip()
    logger.debug(f"Read {len(parsed)} keys from config file {config_path}")
    return parsed


def load_settings(config_path: Optional[str] = None, **overrides: Any) -> Settings:
    """Builds settings with precedence overrides > config file > env > defaults.

    Args:
        config_path: Optional path to a ``key=value`` file.
        **overrides: Explicit values, typically from CLI flags. ``None``
            values are ignored.

    Returns:
        A frozen ``Settings`` instance.
    """
    merged: Dict[str, Any] = {}
    if config_path is not None:
        if not os.path.isfile(config_path):
            raise FileNotFoundError(f"Config file not found: {config_path}")
        merged.update(read_config_file(config_path))
    merged.update({k: v for k, v in overrides.items() if v is not None})

    env_settings = Settings()
    fields = {key: merged[key] for key in _CONFIG_KEYS if key in merged}
    tolerances = env_settings.tolerances.dict()
    for key, name in _TOLERANCE_KEYS.items():
        if key in merged:
            tolerances[name] = float(merged[key])
    return Settings(**fields, tolerances=Tolerances(**tolerances))


@lru_cache(maxsize=None)
def default_settings() -> Settings:
    """Settings from the environment and defaults only, read once per process."""
    return Settings()


def apply_settings(settings: Settings) -> None:
    """Makes ``settings`` the process-wide default.

    The values are exported as ``QUDITPORT_*`` variables so that worker
    processes resolve the same settings. The worker count is left alone;
    commands pass it explicitly.
    """
    os.environ["QUDITPORT_MAX_DIM"] = str(settings.max_dim)
    os.environ["QUDITPORT_ORACLE_MAX_DIM"] = str(settings.oracle_max_dim)
    os.environ["QUDITPORT_TOLERANCES"] = settings.tolerances.json()
    default_settings.cache_clear()
