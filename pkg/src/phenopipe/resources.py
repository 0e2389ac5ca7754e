"""Access to the bundled default resource files."""

from importlib import resources
from pathlib import Path


def data_path(*parts: str) -> Path:
    return Path(str(resources.files("phenopipe").joinpath("data", *parts)))
