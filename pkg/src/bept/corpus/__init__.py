"""Bundled example nets, addressable by file stem."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from ..pnml_io import ModelDocument, load_model


def path(name: str) -> Path:
    """Filesystem path of a bundled net; ``name`` may omit the ``.pnet`` suffix."""
    if "." not in name:
        name += ".pnet"
    return Path(str(resources.files(__name__) / name))


def names(suffix: str = ".pnet") -> list[str]:
    return sorted(p.name[: -len(suffix)] for p in resources.files(__name__).iterdir() if p.name.endswith(suffix))


def load(name: str) -> ModelDocument:
    return load_model(str(path(name)))
