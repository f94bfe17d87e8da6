"""Deterministic grid object-search environment.

Coordinates are (x, y) with x growing east and y growing north; cell (0, 0)
is the south-west corner.  The agent occupies one free cell and faces one of
four headings.  All transitions are deterministic: moving into a wall (or a
blocking object, or out of bounds) leaves the position unchanged and flags a
collision, turns always succeed.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace
from enum import IntEnum
from typing import Callable, Iterable, Optional

import numpy as np


class ConfigError(ValueError):
    """Raised for invalid maps, poses or episode specifications."""


class Heading(IntEnum):
    NORTH = 0
    EAST = 1
    SOUTH = 2
    WEST = 3


# unit vector (dx, dy) for each heading
HEADING_VECS = {
    Heading.NORTH: (0, 1),
    Heading.EAST: (1, 0),
    Heading.SOUTH: (0, -1),
    Heading.WEST: (-1, 0),
}


class Action(IntEnum):
    MOVE_FORWARD = 0
    MOVE_BACKWARD = 1
    MOVE_LEFT = 2
    MOVE_RIGHT = 3
    TURN_LEFT = 4
    TURN_RIGHT = 5


N_ACTIONS = 6

# translation actions expressed as a rotation (in right turns) applied to the
# current heading vector
_MOVE_ROT = {
    Action.MOVE_FORWARD: 0,
    Action.MOVE_RIGHT: 1,
    Action.MOVE_BACKWARD: 2,
    Action.MOVE_LEFT: 3,
}


def _rot_vec(vec: tuple[int, int], right_turns: int) -> tuple[int, int]:
    dx, dy = vec
    for _ in range(right_turns % 4):
        dx, dy = dy, -dx
    return dx, dy


@dataclass(frozen=True)
class GridMap:
    """Occupancy grid.  `walls[x, y]` is True for wall cells."""

    width: int
    height: int
    walls: np.ndarray

    def __post_init__(self):
        if self.width < 3 or self.height < 3:
            raise ConfigError("map must be at least 3x3")
        if self.walls.shape != (self.width, self.height):
            raise ConfigError("walls array shape does not match width/height")
        border = (
            self.walls[0, :].all()
            and self.walls[-1, :].all()
            and self.walls[:, 0].all()
            and self.walls[:, -1].all()
        )
        if not border:
            raise ConfigError("map border must be walls")
        if self.walls.all():
            raise ConfigError("map has no free cell")

    def in_bounds(self, x: int, y: int) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height

    def is_wall(self, x: int, y: int) -> bool:
        if not self.in_bounds(x, y):
            return True
        return bool(self.walls[x, y])

    def is_free(self, x: int, y: int) -> bool:
        return not self.is_wall(x, y)


@dataclass(frozen=True)
class ObjectInstance:
    object_id: int
    label: int
    cell: tuple[int, int]
    blocking: bool = False


@dataclass(frozen=True)
class AgentPose:
    x: int
    y: int
    heading: Heading


@dataclass(frozen=True)
class State:
    pose: AgentPose
    steps: int = 0


@dataclass(frozen=True)
class EpisodeSpec:
    start: AgentPose
    goal_label: int
    seed: int = 0
    max_atomic_steps: int = 500

    def __post_init__(self):
        if self.max_atomic_steps <= 0:
            raise ConfigError("max_atomic_steps must be positive")


@dataclass(frozen=True)
class Observation:
    """Egocentric view: `visibility[label, d-1, o + fov_width//2]` marks an
    instance of `label` at depth d, lateral offset o, with clear line of
    sight.  `depth[o + fov_width//2]` is the distance to the first wall in
    that column (capped at the view depth)."""

    visibility: np.ndarray
    depth: np.ndarray
    visible_labels: frozenset[int]


def line_of_sight(grid: GridMap, a: tuple[int, int], b: tuple[int, int]) -> bool:
    """True when the segment between the centers of cells `a` and `b` crosses
    no wall cell interior.  Cells touched only at a corner do not block."""
    if a == b:
        return True
    ax, ay = a[0] + 0.5, a[1] + 0.5
    bx, by = b[0] + 0.5, b[1] + 0.5
    dx, dy = bx - ax, by - ay
    # parameter values where the segment crosses a gridline
    ts = [0.0, 1.0]
    if dx != 0:
        x0, x1 = sorted((ax, bx))
        gx = np.arange(np.ceil(x0), np.floor(x1) + 1)
        ts.extend((gx - ax) / dx)
    if dy != 0:
        y0, y1 = sorted((ay, by))
        gy = np.arange(np.ceil(y0), np.floor(y1) + 1)
        ts.extend((gy - ay) / dy)
    ts = sorted(t for t in ts if -1e-12 <= t <= 1 + 1e-12)
    for t0, t1 in zip(ts, ts[1:]):
        if t1 - t0 < 1e-12:
            continue
        tm = (t0 + t1) / 2
        cx, cy = int(np.floor(ax + tm * dx)), int(np.floor(ay + tm * dy))
        if (cx, cy) in (a, b):
            continue
        if grid.is_wall(cx, cy):
            return False
    return True


class World:
    """Immutable map + object layout + view parameters.

    Episode state lives in the small `State` value passed in and out of the
    step functions, so many episodes can run concurrently on one World.
    """

    def __init__(
        self,
        grid: GridMap,
        objects: Iterable[ObjectInstance],
        label_names: list[str],
        fov_depth: int = 5,
        fov_width: int = 5,
        goal_distance: int = 2,
    ):
        self.grid = grid
        self.objects = list(objects)
        self.label_names = list(label_names)
        self.fov_depth = int(fov_depth)
        self.fov_width = int(fov_width)
        self.goal_distance = int(goal_distance)
        if self.fov_width % 2 == 0:
            raise ConfigError("fov_width must be odd")
        ids = [o.object_id for o in self.objects]
        if len(ids) != len(set(ids)):
            raise ConfigError("duplicate object_id")
        self._by_cell: dict[tuple[int, int], list[ObjectInstance]] = {}
        self._cells_by_label: dict[int, list[tuple[int, int]]] = {}
        self._blocked = set()
        for o in self.objects:
            if not grid.in_bounds(*o.cell) or grid.is_wall(*o.cell):
                raise ConfigError(f"object {o.object_id} placed on wall/out of bounds")
            if not 0 <= o.label < len(label_names):
                raise ConfigError(f"object {o.object_id} has unknown label {o.label}")
            self._by_cell.setdefault(o.cell, []).append(o)
            self._cells_by_label.setdefault(o.label, []).append(o.cell)
            if o.blocking:
                self._blocked.add(o.cell)

    @property
    def n_labels(self) -> int:
        return len(self.label_names)

    def labels_present(self) -> list[int]:
        return sorted(self._cells_by_label)

    def label_cells(self, label: int) -> list[tuple[int, int]]:
        return self._cells_by_label.get(label, [])

    def passable(self, x: int, y: int) -> bool:
        return self.grid.is_free(x, y) and (x, y) not in self._blocked

    def free_cells(self) -> list[tuple[int, int]]:
        return [
            (x, y)
            for x in range(self.grid.width)
            for y in range(self.grid.height)
            if self.passable(x, y)
        ]

    # ----- episode dynamics -------------------------------------------------

    def reset(self, spec: EpisodeSpec) -> State:
        pose = spec.start
        if not self.passable(pose.x, pose.y):
            raise ConfigError(f"start cell {(pose.x, pose.y)} is not free")
        if not self.label_cells(spec.goal_label):
            name = (
                self.label_names[spec.goal_label]
                if 0 <= spec.goal_label < self.n_labels
                else spec.goal_label
            )
            raise ConfigError(f"goal label {name!r} absent from map")
        return State(pose=pose, steps=0)

    def step(self, state: State, action: Action) -> tuple[State, bool]:
        pose = state.pose
        action = Action(action)
        if action in (Action.TURN_LEFT, Action.TURN_RIGHT):
            delta = 1 if action == Action.TURN_RIGHT else -1
            heading = Heading((pose.heading + delta) % 4)
            new_pose = replace(pose, heading=heading)
            return State(pose=new_pose, steps=state.steps + 1), False
        dx, dy = _rot_vec(HEADING_VECS[pose.heading], _MOVE_ROT[action])
        nx, ny = pose.x + dx, pose.y + dy
        if self.passable(nx, ny):
            return State(pose=replace(pose, x=nx, y=ny), steps=state.steps + 1), False
        return State(pose=pose, steps=state.steps + 1), True

    # ----- observation ------------------------------------------------------

    def fov_cells(self, pose: AgentPose):
        """Yield (d, o, x, y) for the egocentric window, d in 1..fov_depth,
        o in -(fov_width//2)..fov_width//2."""
        fwd = HEADING_VECS[pose.heading]
        right = _rot_vec(fwd, 1)
        half = self.fov_width // 2
        for d in range(1, self.fov_depth + 1):
            for o in range(-half, half + 1):
                x = pose.x + d * fwd[0] + o * right[0]
                y = pose.y + d * fwd[1] + o * right[1]
                yield d, o, x, y

    def observe(self, state: State) -> Observation:
        pose = state.pose
        half = self.fov_width // 2
        vis = np.zeros((self.n_labels, self.fov_depth, self.fov_width), dtype=np.uint8)
        depth = np.full(self.fov_width, self.fov_depth, dtype=np.int64)
        fwd = HEADING_VECS[pose.heading]
        right = _rot_vec(fwd, 1)
        for o in range(-half, half + 1):
            for d in range(1, self.fov_depth + 1):
                x = pose.x + d * fwd[0] + o * right[0]
                y = pose.y + d * fwd[1] + o * right[1]
                if self.grid.is_wall(x, y):
                    depth[o + half] = d
                    break
        agent_cell = (pose.x, pose.y)
        for d, o, x, y in self.fov_cells(pose):
            if not self.grid.in_bounds(x, y):
                continue
            for obj in self._by_cell.get((x, y), []):
                if line_of_sight(self.grid, agent_cell, (x, y)):
                    vis[obj.label, d - 1, o + half] = 1
        visible = frozenset(int(l) for l in np.flatnonzero(vis.any(axis=(1, 2))))
        vis.setflags(write=False)
        depth.setflags(write=False)
        return Observation(visibility=vis, depth=depth, visible_labels=visible)

    # ----- success predicates ----------------------------------------------

    def is_goal_state(self, state: State, goal_label: int) -> bool:
        """True when an instance of the label sits in the view window within
        `goal_distance` (Chebyshev) with clear line of sight."""
        pose = state.pose
        agent_cell = (pose.x, pose.y)
        for d, o, x, y in self.fov_cells(pose):
            if max(d, abs(o)) > self.goal_distance:
                continue
            for obj in self._by_cell.get((x, y), []):
                if obj.label == goal_label and line_of_sight(self.grid, agent_cell, (x, y)):
                    return True
        return False

    # ----- exact shortest-path oracle --------------------------------------

    def shortest_path_actions(
        self, start: AgentPose, predicate: Callable[[State], bool]
    ) -> Optional[list[Action]]:
        """Minimal atomic-action sequence (BFS over pose space, unit cost)
        from `start` to any pose satisfying `predicate`, or None."""
        s0 = State(pose=start, steps=0)
        if predicate(s0):
            return []
        seen = {start}
        q = deque([(start, [])])
        while q:
            pose, path = q.popleft()
            for action in Action:
                nxt, _ = self.step(State(pose=pose, steps=0), action)
                np_ = nxt.pose
                if np_ in seen:
                    continue
                seen.add(np_)
                npath = path + [action]
                if predicate(State(pose=np_, steps=0)):
                    return npath
                q.append((np_, npath))
        return None

    def shortest_path_length(
        self, start: AgentPose, predicate: Callable[[State], bool]
    ) -> Optional[int]:
        path = self.shortest_path_actions(start, predicate)
        return None if path is None else len(path)

    def shortest_path_to_label(self, start: AgentPose, goal_label: int) -> Optional[int]:
        return self.shortest_path_length(
            start, lambda s: self.is_goal_state(s, goal_label)
        )
