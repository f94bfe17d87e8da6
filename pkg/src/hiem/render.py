"""Top-down SVG rendering of an episode trajectory.

Walls, objects and start marker come from the map fixture; the trajectory
polyline is split per option, with a deterministic color per sub-goal name
(hash into a fixed qualitative palette) and a legend.
"""
from __future__ import annotations

import hashlib

from .gridworld import World

CELL = 24

PALETTE = [
    "#e41a1c",
    "#377eb8",
    "#4daf4a",
    "#984ea3",
    "#ff7f00",
    "#a65628",
    "#f781bf",
    "#17becf",
    "#bcbd22",
    "#666666",
]


def subgoal_color(name: str) -> str:
    h = int(hashlib.sha256(name.encode()).hexdigest(), 16)
    return PALETTE[h % len(PALETTE)]


def _cell_center(world: World, x: int, y: int):
    # svg y axis points down; map y points north
    cx = (x + 0.5) * CELL
    cy = (world.grid.height - 1 - y + 0.5) * CELL
    return cx, cy


def render_episode_svg(world: World, episode: dict) -> str:
    """`episode` is one parsed JSONL record (see logs.episode_to_dict)."""
    for key in ("start", "options", "atomic_steps", "goal"):
        if key not in episode:
            raise ValueError(f"episode record missing {key!r}")
    w_px = world.grid.width * CELL
    legend_w = 180
    h_px = world.grid.height * CELL + 30
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w_px + legend_w}" '
        f'height="{h_px}" font-family="monospace" font-size="12">'
    ]
    # cells
    for x in range(world.grid.width):
        for y in range(world.grid.height):
            cx = x * CELL
            cy = (world.grid.height - 1 - y) * CELL
            fill = "#333333" if world.grid.is_wall(x, y) else "#f7f7f7"
            parts.append(
                f'<rect x="{cx}" y="{cy}" width="{CELL}" height="{CELL}" '
                f'fill="{fill}" stroke="#dddddd"/>'
            )
    # objects
    goal_name = episode["goal"]
    for obj in world.objects:
        cx, cy = _cell_center(world, *obj.cell)
        name = world.label_names[obj.label]
        is_goal = name == goal_name
        fill = "#d62728" if is_goal else "#999999"
        r = 8 if is_goal else 6
        parts.append(f'<circle cx="{cx}" cy="{cy}" r="{r}" fill="{fill}"/>')
        parts.append(
            f'<text x="{cx - 4}" y="{cy + 4}" fill="white">{name[0]}</text>'
        )
    # trajectory per option
    sx, sy = episode["start"][0], episode["start"][1]
    seen_sgs: dict[str, str] = {}
    prev = (sx, sy)
    for opt in episode["options"]:
        color = subgoal_color(opt["sg"])
        seen_sgs.setdefault(opt["sg"], color)
        pts = [prev] + [tuple(p) for p in opt.get("path", [])]
        svg_pts = " ".join(
            f"{c[0]:.1f},{c[1]:.1f}"
            for c in (_cell_center(world, px, py) for px, py in pts)
        )
        parts.append(
            f'<polyline points="{svg_pts}" fill="none" stroke="{color}" '
            f'stroke-width="3" stroke-opacity="0.8"/>'
        )
        if pts:
            prev = pts[-1]
    # start marker (triangle)
    cx, cy = _cell_center(world, sx, sy)
    parts.append(
        f'<polygon points="{cx},{cy - 8} {cx - 7},{cy + 6} {cx + 7},{cy + 6}" '
        f'fill="#2ca02c"/>'
    )
    # legend
    ly = 16
    parts.append(
        f'<text x="{w_px + 10}" y="{ly}">goal: {goal_name}</text>'
    )
    for sg, color in seen_sgs.items():
        ly += 18
        parts.append(
            f'<rect x="{w_px + 10}" y="{ly - 10}" width="12" height="12" fill="{color}"/>'
        )
        parts.append(f'<text x="{w_px + 28}" y="{ly}">{sg}</text>')
    # caption
    status = "success" if episode.get("success") else "failure"
    parts.append(
        f'<text x="4" y="{world.grid.height * CELL + 20}">'
        f'{status}, {episode["atomic_steps"]} steps</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts)
