"""Experiment recipes: defaults, validation and builders."""

from .config import (
    DEFAULTS_VERSION,
    create_default_config,
    load_recipe,
    resolve_recipe,
    save_recipe,
    validate_config,
)

__all__ = [
    "DEFAULTS_VERSION",
    "create_default_config",
    "load_recipe",
    "resolve_recipe",
    "save_recipe",
    "validate_config",
]
