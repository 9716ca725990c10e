"""Minigrid-style suite: six room tasks over one shared action set.

Actions: the four moves plus `pickup` (grabs a key or object on the agent's
cell) and `toggle` (opens an adjacent door; locked doors need a key in hand).
Lava ends the episode unsuccessfully. Playground has no goal cell: success is
collecting every spawned object.
"""

from __future__ import annotations

import numpy as np

from .base import (
    DOOR_CLOSED,
    DOOR_LOCKED,
    DOOR_OPEN,
    EMPTY,
    GOAL,
    GridEnv,
    HI,
    KEY,
    LAVA,
    LO,
    MOVE_DELTAS,
    OBJECT,
    TaskSpace,
    WALL,
    place_distinct,
)

MINIGRID_TASKS = ("empty", "crossing", "doorkey", "fourrooms", "multiroom", "playground")
MINIGRID_TIERS = {
    "empty": "easy",
    "crossing": "easy",
    "doorkey": "middle",
    "fourrooms": "middle",
    "multiroom": "hard",
    "playground": "hard",
}

PICKUP, TOGGLE = 4, 5
N_PLAYGROUND_OBJECTS = 3


def minigrid_space() -> TaskSpace:
    """Six tasks tiered easy/middle/hard; no prerequisite edges."""
    return TaskSpace(tasks=MINIGRID_TASKS, tiers=dict(MINIGRID_TIERS), deps={})


class MinigridEnv(GridEnv):
    kind = "minigrid"
    palette = (EMPTY, WALL, GOAL, LAVA, DOOR_CLOSED, DOOR_LOCKED, DOOR_OPEN, KEY, OBJECT)
    n_actions = 6

    def __init__(self, tasks=MINIGRID_TASKS, cap: int = 200, step_penalty: float = 0.001):
        space = minigrid_space().subset(tasks)
        super().__init__(space, cap=cap, step_penalty=step_penalty)
        self._tasks_arg = tuple(tasks)
        self._has_key = 0
        self._objects_left = 0

    def fresh(self) -> "MinigridEnv":
        return MinigridEnv(self._tasks_arg, cap=self.cap, step_penalty=self.step_penalty)

    # -- layout generation ----------------------------------------------------

    def _generate(self, task: str, rng: np.random.Generator) -> None:
        self._has_key = 0
        self._objects_left = 0
        build = getattr(self, f"_build_{task}")
        build(rng)

    def _free_cells(self, predicate=None) -> list[tuple[int, int]]:
        cells = []
        for r in range(LO, HI + 1):
            for c in range(LO, HI + 1):
                if self.grid[r, c] == EMPTY and (predicate is None or predicate(r, c)):
                    cells.append((r, c))
        return cells

    def _build_empty(self, rng) -> None:
        agent, goal = place_distinct(rng, 2, self._free_cells())
        self.agent = agent
        self.grid[goal] = GOAL

    def _build_crossing(self, rng) -> None:
        col = int(rng.integers(LO + 2, HI - 1))  # keep a cell of space on each side
        gap = int(rng.integers(LO, HI + 1))
        for r in range(LO, HI + 1):
            if r != gap:
                self.grid[r, col] = LAVA
        (self.agent,) = place_distinct(rng, 1, self._free_cells(lambda r, c: c < col))
        (goal,) = place_distinct(rng, 1, self._free_cells(lambda r, c: c > col))
        self.grid[goal] = GOAL

    def _build_doorkey(self, rng) -> None:
        col = int(rng.integers(LO + 2, HI - 1))
        door_row = int(rng.integers(LO, HI + 1))
        for r in range(LO, HI + 1):
            self.grid[r, col] = DOOR_LOCKED if r == door_row else WALL
        key, agent = place_distinct(rng, 2, self._free_cells(lambda r, c: c < col))
        self.grid[key] = KEY
        self.agent = agent
        (goal,) = place_distinct(rng, 1, self._free_cells(lambda r, c: c > col))
        self.grid[goal] = GOAL

    def _carve_four_rooms(self, rng) -> None:
        mid = (LO + HI) // 2
        self.grid[mid, LO : HI + 1] = WALL
        self.grid[LO : HI + 1, mid] = WALL
        # one opening per wall arm
        self.grid[mid, int(rng.integers(LO, mid))] = EMPTY
        self.grid[mid, int(rng.integers(mid + 1, HI + 1))] = EMPTY
        self.grid[int(rng.integers(LO, mid)), mid] = EMPTY
        self.grid[int(rng.integers(mid + 1, HI + 1)), mid] = EMPTY

    def _build_fourrooms(self, rng) -> None:
        self._carve_four_rooms(rng)
        agent, goal = place_distinct(rng, 2, self._free_cells())
        self.agent = agent
        self.grid[goal] = GOAL

    def _build_multiroom(self, rng) -> None:
        wall_a, wall_b = LO + 2, HI - 2
        for col in (wall_a, wall_b):
            door_row = int(rng.integers(LO, HI + 1))
            for r in range(LO, HI + 1):
                self.grid[r, col] = DOOR_CLOSED if r == door_row else WALL
        (self.agent,) = place_distinct(rng, 1, self._free_cells(lambda r, c: c < wall_a))
        (goal,) = place_distinct(rng, 1, self._free_cells(lambda r, c: c > wall_b))
        self.grid[goal] = GOAL

    def _build_playground(self, rng) -> None:
        self._carve_four_rooms(rng)
        cells = place_distinct(rng, 1 + N_PLAYGROUND_OBJECTS, self._free_cells())
        self.agent = cells[0]
        for cell in cells[1:]:
            self.grid[cell] = OBJECT
        self._objects_left = N_PLAYGROUND_OBJECTS

    # -- encoding ---------------------------------------------------------------

    def _objective_cell(self, obs) -> tuple[int, int] | None:
        """Next blocking interactable, nearest first: a key to grab, an
        object to collect, a shut door; the goal once the way is clear."""
        for codes in ((KEY,), (OBJECT,), (DOOR_CLOSED, DOOR_LOCKED)):
            cell = self._nearest_cell(obs, codes)
            if cell is not None:
                return cell
        return super()._objective_cell(obs)

    # -- dynamics ---------------------------------------------------------------

    def _apply(self, action: int) -> tuple[float, bool, bool]:
        if action in MOVE_DELTAS:
            target = self._try_move(action)
            if target is None:
                return 0.0, False, False
            self.agent = target
            code = int(self.grid[target])
            if code == LAVA:
                return 0.0, True, False
            if code == GOAL:
                return 1.0, True, True
            return 0.0, False, False
        if action == PICKUP:
            code = int(self.grid[self.agent])
            if code == KEY:
                self.grid[self.agent] = EMPTY
                self._has_key += 1
            elif code == OBJECT:
                self.grid[self.agent] = EMPTY
                self._objects_left -= 1
                if self._objects_left == 0:
                    return 1.0, True, True
            return 0.0, False, False
        # toggle: first adjacent door in N/S/W/E order
        r, c = self.agent
        for dr, dc in MOVE_DELTAS.values():
            code = int(self.grid[r + dr, c + dc])
            if code == DOOR_CLOSED:
                self.grid[r + dr, c + dc] = DOOR_OPEN
                break
            if code == DOOR_LOCKED and self._has_key > 0:
                self.grid[r + dr, c + dc] = DOOR_OPEN
                break
        return 0.0, False, False
