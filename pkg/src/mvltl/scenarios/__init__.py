"""Bundled hand-built scenarios (JSON) and the random-scenario generator."""
from __future__ import annotations

from pathlib import Path

from ..workspace import Workspace

_DIR = Path(__file__).parent


def names() -> list[str]:
    return sorted(p.stem for p in _DIR.glob("*.json"))


def path(name: str) -> Path:
    p = _DIR / f"{name}.json"
    if not p.exists():
        raise FileNotFoundError(f"no bundled scenario {name!r}; available: {', '.join(names())}")
    return p


def load(name: str) -> Workspace:
    return Workspace.load(path(name))
