"""Scripted reference policies: BFS navigation and topological craft plans.

These exist to audit generated layouts (`solvable`) and to give tests a
known-good upper bound. They never learn; they read the full grid.
"""

from __future__ import annotations

from collections import deque

import numpy as np

from .base import (
    DOOR_CLOSED,
    DOOR_LOCKED,
    GOAL,
    GridEnv,
    KEY,
    LAVA,
    MOVE_DELTAS,
    OBJECT,
    SIZE,
)
from .craft import (
    BASE_RESOURCES,
    GATHER_TOOLS,
    RECIPES,
    RESOURCE_TILES,
    STATION_TILES,
    USE,
    CraftEnv,
    task_item,
)
from .minigrid import PICKUP, TOGGLE, MinigridEnv
from .nav import NavEnv

_ACTION_OF_DELTA = {delta: action for action, delta in MOVE_DELTAS.items()}


def _plan_safe(env: GridEnv, code: int) -> bool:
    return env._walkable(code) and code != LAVA


def _bfs(env: GridEnv, targets: set[tuple[int, int]]) -> list[tuple[int, int]] | None:
    """Shortest path from the agent to any target over plan-safe cells.

    Returns the cell sequence excluding the start, or None. Neighbor order is
    fixed, so plans are deterministic.
    """
    if not targets:
        return None
    start = env.agent
    if start in targets:
        return []
    parent: dict[tuple[int, int], tuple[int, int]] = {start: start}
    queue = deque([start])
    while queue:
        cell = queue.popleft()
        for dr, dc in MOVE_DELTAS.values():
            nxt = (cell[0] + dr, cell[1] + dc)
            if nxt in parent or not (0 <= nxt[0] < SIZE and 0 <= nxt[1] < SIZE):
                continue
            if not _plan_safe(env, int(env.grid[nxt])):
                continue
            parent[nxt] = cell
            if nxt in targets:
                path = [nxt]
                while parent[path[-1]] != path[-1]:
                    path.append(parent[path[-1]])
                path.reverse()
                return path[1:]
            queue.append(nxt)
    return None


def _walk(env: GridEnv, path: list[tuple[int, int]]) -> bool:
    for cell in path:
        delta = (cell[0] - env.agent[0], cell[1] - env.agent[1])
        env.step(_ACTION_OF_DELTA[delta])
        if env.done:
            return False
        if env.agent != cell:
            return False  # blocked against the plan: stale world model
    return True


def _cells_with(env: GridEnv, *codes: int) -> set[tuple[int, int]]:
    out: set[tuple[int, int]] = set()
    for code in codes:
        for r, c in zip(*np.nonzero(env.grid == code)):
            out.add((int(r), int(c)))
    return out


# ---------------------------------------------------------------------------
# per-environment oracles
# ---------------------------------------------------------------------------

def _run_nav(env: NavEnv) -> bool:
    path = _bfs(env, _cells_with(env, GOAL))
    if path is None:
        return False
    _walk(env, path)
    return env.succeeded


def _run_minigrid(env: MinigridEnv) -> bool:
    for _ in range(32):  # every iteration ends the episode or opens/collects something
        if env.done:
            break
        if env.current_task == "playground":
            targets = _cells_with(env, OBJECT)
        else:
            targets = _cells_with(env, GOAL)
        if not targets:
            return env.succeeded
        path = _bfs(env, targets)
        if path is not None:
            if not _walk(env, path):
                break
            if env.current_task == "playground" and not env.done:
                env.step(PICKUP)
            continue
        # goal unreachable: acquire a key if a locked door demands one, else toggle
        if _cells_with(env, DOOR_LOCKED) and env._has_key == 0:
            key_path = _bfs(env, _cells_with(env, KEY))
            if key_path is not None:
                if not _walk(env, key_path):
                    break
                if not env.done:
                    env.step(PICKUP)
                continue
        openable = _cells_with(env, DOOR_CLOSED)
        if env._has_key > 0:
            openable |= _cells_with(env, DOOR_LOCKED)
        adjacent = set()
        for r, c in openable:
            for dr, dc in MOVE_DELTAS.values():
                cell = (r + dr, c + dc)
                if _plan_safe(env, int(env.grid[cell])):
                    adjacent.add(cell)
        door_path = _bfs(env, adjacent)
        if door_path is None:
            return False
        if not _walk(env, door_path):
            break
        if not env.done:
            env.step(TOGGLE)
    return env.succeeded


def _craft_goto_use(env: CraftEnv, targets: set[tuple[int, int]]) -> bool:
    path = _bfs(env, targets)
    if path is None:
        return False
    if not _walk(env, path):
        return False
    if env.done:
        return env.succeeded
    env.step(USE)
    return True


def _ensure(env: CraftEnv, item: str, depth: int = 0) -> bool:
    """Puts >=1 of `item` in the inventory, recursing over prerequisites."""
    if depth > 12 or env.done:
        return False
    if env.inventory[item] > 0:
        return True
    if item in BASE_RESOURCES:
        tool = GATHER_TOOLS.get(item)
        if tool and env.inventory[tool] == 0 and not _ensure(env, tool, depth + 1):
            return False
        tile = next(code for code, name in RESOURCE_TILES.items() if name == item)
        if not _craft_goto_use(env, _cells_with(env, tile)):
            return False
        return env.inventory[item] > 0
    station, ingredients = RECIPES[item]
    # a sibling craft may consume an earlier ingredient; re-check until stable
    for _ in range(4):
        missing = [k for k, v in ingredients.items() if env.inventory[k] < v]
        if not missing:
            break
        for need in missing:
            if not _ensure(env, need, depth + 1):
                return False
    else:
        return False
    tile = next(code for code, name in STATION_TILES.items() if name == station)
    if not _craft_goto_use(env, _cells_with(env, tile)):
        return False
    return env.inventory[item] > 0


def _run_craft(env: CraftEnv) -> bool:
    _ensure(env, task_item(env.current_task))
    return env.succeeded


# ---------------------------------------------------------------------------
# public entry points
# ---------------------------------------------------------------------------

def run_oracle(env: GridEnv) -> bool:
    """Drives the already-reset env with the scripted policy; True on success."""
    if isinstance(env, NavEnv):
        return _run_nav(env)
    if isinstance(env, MinigridEnv):
        return _run_minigrid(env)
    if isinstance(env, CraftEnv):
        return _run_craft(env)
    raise TypeError(f"no oracle for {type(env).__name__}")


def solvable(env: GridEnv, task: str, seed: int) -> bool:
    """True iff the scripted oracle completes (task, seed) within the cap."""
    scratch = env.fresh()
    scratch.reset(task, seed)
    return run_oracle(scratch)
