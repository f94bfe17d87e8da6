"""Plain-text map fixture format.

A fixture file has three sections::

    [map]
    #######
    #..a..#
    #..#..#
    #.b.c.#
    #######
    [legend]
    a = sofa
    b = tv
    c = crate blocking
    [params]
    fov_depth = 5
    fov_width = 5
    goal_distance = 2

Inside ``[map]`` each line is one grid row, top row first (highest y).
``#`` is a wall, ``.`` a free cell, any other non-space character places an
object instance whose label comes from the legend.  A legend value may end
with the word ``blocking`` to make those instances impassable.  Labels are
indexed in sorted-name order so feature layouts are stable across fixtures
that share a vocabulary.  ``[params]`` is optional; unknown keys are
rejected.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .gridworld import ConfigError, GridMap, ObjectInstance, World

_PARAM_KEYS = {"fov_depth", "fov_width", "goal_distance"}


def parse_map_text(text: str) -> World:
    sections: dict[str, list[str]] = {}
    current = None
    for raw in text.splitlines():
        line = raw.rstrip("\n")
        stripped = line.strip()
        if stripped.startswith("[") and stripped.endswith("]"):
            current = stripped[1:-1].strip().lower()
            if current in sections:
                raise ConfigError(f"duplicate section [{current}]")
            sections[current] = []
            continue
        if current is None:
            if stripped:
                raise ConfigError(f"content before first section: {line!r}")
            continue
        if current == "map":
            if line.strip():
                sections[current].append(line.rstrip())
        else:
            if stripped and not stripped.startswith(";"):
                sections[current].append(stripped)

    if "map" not in sections or not sections["map"]:
        raise ConfigError("missing [map] section")

    rows = sections["map"]
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ConfigError("all map rows must have equal length")
    height = len(rows)

    legend: dict[str, tuple[str, bool]] = {}
    for entry in sections.get("legend", []):
        if "=" not in entry:
            raise ConfigError(f"bad legend entry: {entry!r}")
        char, value = (p.strip() for p in entry.split("=", 1))
        if len(char) != 1 or char in "#.":
            raise ConfigError(f"bad legend character: {char!r}")
        parts = value.split()
        if not parts or len(parts) > 2 or (len(parts) == 2 and parts[1] != "blocking"):
            raise ConfigError(f"bad legend value: {value!r}")
        legend[char] = (parts[0], len(parts) == 2)

    params = {"fov_depth": 5, "fov_width": 5, "goal_distance": 2}
    for entry in sections.get("params", []):
        if "=" not in entry:
            raise ConfigError(f"bad params entry: {entry!r}")
        key, value = (p.strip() for p in entry.split("=", 1))
        if key not in _PARAM_KEYS:
            raise ConfigError(f"unknown param {key!r}")
        params[key] = int(value)

    label_names = sorted({name for name, _ in legend.values()})
    label_idx = {name: i for i, name in enumerate(label_names)}

    walls = np.zeros((width, height), dtype=bool)
    objects = []
    next_id = 0
    for row_i, row in enumerate(rows):
        y = height - 1 - row_i
        for x, ch in enumerate(row):
            if ch == "#":
                walls[x, y] = True
            elif ch == ".":
                pass
            elif ch in legend:
                name, blocking = legend[ch]
                objects.append(
                    ObjectInstance(
                        object_id=next_id,
                        label=label_idx[name],
                        cell=(x, y),
                        blocking=blocking,
                    )
                )
                next_id += 1
            else:
                raise ConfigError(f"unknown map character {ch!r} at row {row_i}, col {x}")

    grid = GridMap(width=width, height=height, walls=walls)
    return World(grid=grid, objects=objects, label_names=label_names, **params)


def load_map(path: str | Path) -> World:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"map file not found: {path}")
    return parse_map_text(path.read_text())


def builtin_fixture(name: str) -> Path:
    """Path to a fixture shipped with the package (e.g. 'bench15')."""
    path = Path(__file__).parent / "fixtures" / f"{name}.map"
    if not path.exists():
        raise ConfigError(f"no builtin fixture named {name!r}")
    return path
