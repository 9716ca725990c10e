"""Nav: four independent point-to-point navigation tasks on an open grid.

Difficulty is purely the start-to-goal Manhattan distance. The agent always
starts at the center; the goal lands on the ring of cells at exactly the
task's configured distance, picked by the layout seed.
"""

from __future__ import annotations

import numpy as np

from .base import EMPTY, GOAL, GridEnv, HI, LO, TaskSpace

NAV_TASKS = ("simple", "mid", "hard", "extremely_hard")
NAV_TIERS = {"simple": "easy", "mid": "middle", "hard": "hard", "extremely_hard": "hard"}
DEFAULT_DISTANCES = (2, 4, 6, 8)

CENTER = ((LO + HI) // 2, (LO + HI) // 2)


def nav_space() -> TaskSpace:
    """Four tasks, no prerequisite edges: difficulty tiers only."""
    return TaskSpace(tasks=NAV_TASKS, tiers=dict(NAV_TIERS), deps={})


def ring_cells(distance: int) -> list[tuple[int, int]]:
    """Interior cells at exactly `distance` L1 steps from the center, row-major."""
    cr, cc = CENTER
    return [
        (r, c)
        for r in range(LO, HI + 1)
        for c in range(LO, HI + 1)
        if abs(r - cr) + abs(c - cc) == distance
    ]


class NavEnv(GridEnv):
    kind = "nav"
    palette = (EMPTY, GOAL)  # interior never holds walls
    n_actions = 4

    def __init__(self, distances=DEFAULT_DISTANCES, cap: int = 200, step_penalty: float = 0.001):
        if len(distances) != len(NAV_TASKS):
            raise ValueError("need one distance per task")
        max_d = (HI - LO)  # center to a corner of the interior
        for d in distances:
            if not 1 <= d <= max_d or not ring_cells(d):
                raise ValueError(f"distance {d} has no placement on this grid")
        self.distances = tuple(int(d) for d in distances)
        super().__init__(nav_space(), cap=cap, step_penalty=step_penalty)
        self.goal = CENTER

    def fresh(self) -> "NavEnv":
        return NavEnv(self.distances, cap=self.cap, step_penalty=self.step_penalty)

    def _generate(self, task: str, rng: np.random.Generator) -> None:
        distance = self.distances[self.space.index(task)]
        ring = ring_cells(distance)
        self.goal = ring[int(rng.integers(len(ring)))]
        self.grid[self.goal] = GOAL
        self.agent = CENTER

    def _apply(self, action: int) -> tuple[float, bool, bool]:
        target = self._try_move(action)
        if target is None:
            return 0.0, False, False  # blocked: stay put, penalty still applies
        self.agent = target
        if target == self.goal:
            return 1.0, True, True
        return 0.0, False, False
