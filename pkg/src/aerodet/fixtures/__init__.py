"""Bundled fixture data: canonical net configs, tiny synthetic annotation
corpora, and the golden decode/evaluate pipeline inputs and outputs."""

from importlib.resources import files
from pathlib import Path


def fixture_path(*parts: str) -> Path:
    """Absolute path of a bundled fixture file, e.g. fixture_path("yolov2-standard.cfg")."""
    path = Path(str(files(__package__).joinpath(*parts)))
    if not path.exists():
        raise FileNotFoundError(f"no bundled fixture {'/'.join(parts)!r}")
    return path
