"""Shipped rule files and validation profiles.

The demo UAV grammar is illustrative: a fuselage is anchored at the grid
corner where rear, left, and bottom leave the grid, connectors chain off it,
rotors and wings attach to connectors, and Empty fills the rest.
"""

from __future__ import annotations

import json
from importlib import resources


def _read(name: str) -> str:
    return resources.files(__package__).joinpath(name).read_text(encoding="utf-8")


def demo_uav_text() -> str:
    """Source text of the demo UAV rule file."""
    return _read("demo_uav.json")


def demo_profile_obj() -> dict:
    """The demo validation profile as plain data."""
    return json.loads(_read("demo_profile.json"))
