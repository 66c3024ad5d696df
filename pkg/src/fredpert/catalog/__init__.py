"""Bundled problem files and JSON problem loading."""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

from ..exceptions import ConfigurationError
from ..series_engine import ProblemSpec


def names() -> list:
    """Names of the bundled problems."""
    return sorted(p.name[:-5] for p in resources.files(__name__).iterdir()
                  if p.name.endswith(".json"))


def _parse(text: str, source: str) -> ProblemSpec:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigurationError(f"{source}: invalid JSON ({err})") from None
    if not isinstance(data, dict):
        raise ConfigurationError(f"{source}: a problem file must hold one JSON object")
    data.setdefault("name", Path(source).stem)
    return ProblemSpec.from_dict(data)


def load(name: str) -> ProblemSpec:
    """A bundled problem by name."""
    if name not in names():
        raise ConfigurationError(f"unknown catalog problem {name!r}; available: {', '.join(names())}")
    return _parse(resources.files(__name__).joinpath(f"{name}.json").read_text(), name)


def load_problem(source) -> ProblemSpec:
    """Read a problem from a JSON file, or from the catalog when ``source``
    is a bundled name rather than an existing path."""
    path = Path(source)
    if path.is_file():
        return _parse(path.read_text(), str(path))
    if str(source) in names():
        return load(str(source))
    raise ConfigurationError(f"problem file not found: {source}")
