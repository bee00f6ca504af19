"""Packaged example scenarios (configs plus their grid files)."""

from importlib import resources
from pathlib import Path

_NAMES = ("straight", "figure8", "corridor", "corridor_blocked")


def scenario_path(name: str) -> Path:
    """Filesystem path of a packaged scenario config by short name."""
    if name not in _NAMES:
        raise KeyError(f"unknown scenario {name!r}; available: {', '.join(_NAMES)}")
    return Path(str(resources.files(__package__) / f"{name}.json"))


def available() -> tuple:
    return _NAMES
