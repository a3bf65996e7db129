"""Bundled scenario documents, each mirroring one figure family of the testbed study.

Bundled entries are scaled down (smaller files, shorter windows, fewer
repetitions) so every one runs in well under a minute; override
``repetitions``/``duration_s`` or pass ``--reps`` for full-length runs.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import yaml


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    figure: str
    description: str
    path: Path


def _root() -> Path:
    return Path(str(resources.files(__name__)))


def catalog_path(name: str) -> Path:
    path = _root() / f"{name}.yaml"
    if not path.is_file():
        known = ", ".join(e.name for e in entries())
        raise FileNotFoundError(f"no catalog entry {name!r}; known entries: {known}")
    return path


def _natural(path: Path):
    return [int(t) if t.isdigit() else t for t in re.split(r"(\d+)", path.stem)]


def entries() -> list[CatalogEntry]:
    out = []
    for path in sorted(_root().glob("*.yaml"), key=_natural):
        with open(path) as fh:
            head = yaml.safe_load(fh) or {}
        out.append(CatalogEntry(path.stem, head.get("figure", ""), head.get("description", ""), path))
    return out
