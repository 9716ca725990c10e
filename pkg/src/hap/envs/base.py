"""Shared gridworld machinery: task spaces, observations, movement, encoding.

All three environments live on an 11x11 grid with a wall border (9x9 interior).
Layouts are a pure function of (environment kind, task, seed); per-episode
randomness never leaks in from anywhere else.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..nn import one_hot

# cell codes (shared across environments; each env encodes only its own palette)
EMPTY, WALL, GOAL, LAVA, DOOR_CLOSED, DOOR_LOCKED, DOOR_OPEN, KEY, OBJECT, \
    GRASS, TREE, ROCK, IRON, GOLD, GEM, TOOLSHED, WORKBENCH, FACTORY = range(18)

CELL_CHARS = {
    EMPTY: ".", WALL: "#", GOAL: "G", LAVA: "~", DOOR_CLOSED: "+",
    DOOR_LOCKED: "L", DOOR_OPEN: "/", KEY: "k", OBJECT: "o", GRASS: '"',
    TREE: "T", ROCK: "r", IRON: "i", GOLD: "g", GEM: "*", TOOLSHED: "t",
    WORKBENCH: "b", FACTORY: "f",
}

SIZE = 11  # outer grid, including the wall border
LO, HI = 1, SIZE - 2  # interior bounds, inclusive

# action ids shared by every env; envs append their own extras after RIGHT
UP, DOWN, LEFT, RIGHT = 0, 1, 2, 3
MOVE_DELTAS = {UP: (-1, 0), DOWN: (1, 0), LEFT: (0, -1), RIGHT: (0, 1)}

_KIND_IDS = {"nav": 0, "minigrid": 1, "craft": 2}


class ContractError(RuntimeError):
    """A caller broke an environment precondition (e.g. step after done)."""


@dataclass(frozen=True)
class TaskSpace:
    """Ordered task list with tiers and prerequisite edges.

    Task order is load-bearing: it defines the index every teacher
    distribution and one-hot encoding uses.
    """

    tasks: tuple[str, ...]
    tiers: dict[str, str]
    deps: dict[str, tuple[str, ...]]

    def __post_init__(self):
        if len(set(self.tasks)) != len(self.tasks):
            raise ValueError("duplicate task ids")
        known = set(self.tasks)
        for task in self.tasks:
            if self.tiers.get(task) not in ("easy", "middle", "hard"):
                raise ValueError(f"task {task!r} missing a tier")
            for dep in self.deps.get(task, ()):
                if dep not in known:
                    raise ValueError(f"{task!r} depends on unknown {dep!r}")
        self.topo_order()  # raises on cycles

    @property
    def n(self) -> int:
        return len(self.tasks)

    def index(self, task: str) -> int:
        try:
            return self.tasks.index(task)
        except ValueError:
            raise KeyError(f"unknown task {task!r}") from None

    def prerequisites(self, task: str) -> tuple[str, ...]:
        return self.deps.get(task, ())

    def topo_order(self) -> list[str]:
        """Dependency-respecting task order; raises ValueError on a cycle."""
        order, state = [], {}  # state: 1 visiting, 2 done
        def visit(t):
            if state.get(t) == 2:
                return
            if state.get(t) == 1:
                raise ValueError(f"dependency cycle through {t!r}")
            state[t] = 1
            for dep in self.deps.get(t, ()):
                visit(dep)
            state[t] = 2
            order.append(t)
        for t in self.tasks:
            visit(t)
        return order

    def subset(self, tasks) -> "TaskSpace":
        """A restricted space (deps outside the subset are dropped)."""
        keep = tuple(tasks)
        kept = set(keep)
        return TaskSpace(
            tasks=keep,
            tiers={t: self.tiers[t] for t in keep},
            deps={t: tuple(d for d in self.deps.get(t, ()) if d in kept) for t in keep},
        )


@dataclass
class Observation:
    grid: np.ndarray  # full grid incl. border, int8 cell codes
    agent_pos: tuple[int, int]
    inventory: dict[str, int]
    task_index: int
    n_tasks: int

    def task_onehot(self) -> np.ndarray:
        return one_hot(self.task_index, self.n_tasks)


@dataclass
class TrajStep:
    obs: Observation
    action: int
    reward: float
    logp: float = 0.0
    enc: np.ndarray | None = field(default=None, repr=False)  # cached encoding


@dataclass
class Trajectory:
    task: str
    steps: list[TrajStep]
    success: bool
    discounted_return: float

    def __len__(self) -> int:
        return len(self.steps)

    def rewards(self) -> np.ndarray:
        return np.array([s.reward for s in self.steps], dtype=np.float64)

    def recompute_return(self, gamma: float) -> float:
        r = self.rewards()
        return float(r @ np.power(gamma, np.arange(len(r))))


def discounted(rewards, gamma: float) -> float:
    r = np.asarray(rewards, dtype=np.float64)
    return float(r @ np.power(gamma, np.arange(len(r))))


def layout_rng(kind: str, task_index: int, seed: int) -> np.random.Generator:
    """The generator that owns all layout randomness for (env, task, seed)."""
    seq = np.random.SeedSequence([_KIND_IDS[kind], task_index, int(seed)])
    return np.random.Generator(np.random.PCG64(seq))


class GridEnv:
    """Base class: movement, caps, penalties, encoding, layout dumps.

    Subclasses set `kind`, `palette` (the cell codes their interior can
    contain), `inventory_items`, `n_actions`, and implement `_generate`
    (fill the grid for (task, seed)) and `_apply` (env-specific action
    semantics returning (reward_bonus, done, success)).
    """

    kind: str = ""
    palette: tuple[int, ...] = ()
    inventory_items: tuple[str, ...] = ()
    n_actions: int = 4

    def __init__(self, space: TaskSpace, cap: int, step_penalty: float):
        self.space = space
        self.cap = int(cap)
        self.step_penalty = float(step_penalty)
        self.grid = np.full((SIZE, SIZE), WALL, dtype=np.int8)
        self.agent = (LO, LO)
        self.inventory: dict[str, int] = {}
        self._task_index = -1
        self._seed = -1
        self._t = 0
        self._done = True
        self._success = False
        self._code_to_plane = {code: i for i, code in enumerate(self.palette)}

    # -- episode control ----------------------------------------------------

    @property
    def current_task(self) -> str:
        return self.space.tasks[self._task_index]

    @property
    def done(self) -> bool:
        return self._done

    @property
    def succeeded(self) -> bool:
        return self._success

    @property
    def steps_taken(self) -> int:
        return self._t

    def reset(self, task: str, seed: int) -> Observation:
        self._task_index = self.space.index(task)
        self._seed = int(seed)
        self._t = 0
        self._done = False
        self._success = False
        self.grid[...] = WALL
        self.grid[LO : HI + 1, LO : HI + 1] = EMPTY
        self.inventory = {item: 0 for item in self.inventory_items}
        self._generate(task, layout_rng(self.kind, self._task_index, self._seed))
        return self.observe()

    def step(self, action: int) -> tuple[Observation, float, bool]:
        if self._done:
            raise ContractError("step after episode end")
        if not 0 <= int(action) < self.n_actions:
            raise ContractError(f"action {action} out of range 0..{self.n_actions - 1}")
        bonus, done, success = self._apply(int(action))
        self._t += 1
        if self._t >= self.cap and not done:
            done, success = True, False
        self._done, self._success = done, success
        return self.observe(), bonus - self.step_penalty, done

    def observe(self) -> Observation:
        return Observation(
            grid=self.grid.copy(),
            agent_pos=self.agent,
            inventory=dict(self.inventory),
            task_index=self._task_index,
            n_tasks=self.space.n,
        )

    # -- movement helpers ---------------------------------------------------

    def _walkable(self, code: int) -> bool:
        return code not in (WALL, DOOR_CLOSED, DOOR_LOCKED)

    def _try_move(self, action: int) -> tuple[int, int] | None:
        """Target cell if the move is legal, else None (blocked)."""
        dr, dc = MOVE_DELTAS[action]
        r, c = self.agent[0] + dr, self.agent[1] + dc
        if self._walkable(int(self.grid[r, c])):
            return (r, c)
        return None

    # -- encoding -----------------------------------------------------------

    @property
    def obs_dim(self) -> int:
        side = HI - LO + 1
        span = 2 * side - 1
        return (side * side * len(self.palette) + 2 * side + 2 * span
                + len(self.inventory_items) + self.space.n)

    def encode(self, obs: Observation) -> np.ndarray:
        """Flat float64 vector: interior cell one-hots, agent row/col one-hots,
        objective displacement one-hots (zero when no objective cell exists),
        inventory counts / 10, task one-hot (always the trailing block)."""
        side = HI - LO + 1
        interior = obs.grid[LO : HI + 1, LO : HI + 1]
        planes = np.zeros((side * side, len(self.palette)))
        idx = np.array([self._code_to_plane[int(c)] for c in interior.ravel()])
        planes[np.arange(side * side), idx] = 1.0
        parts = [planes.ravel()]
        pos = np.zeros(2 * side)
        pos[obs.agent_pos[0] - LO] = 1.0
        pos[side + obs.agent_pos[1] - LO] = 1.0
        parts.append(pos)
        span = 2 * side - 1
        delta = np.zeros(2 * span)
        cell = self._objective_cell(obs)
        if cell is not None:
            delta[cell[0] - obs.agent_pos[0] + side - 1] = 1.0
            delta[span + cell[1] - obs.agent_pos[1] + side - 1] = 1.0
        parts.append(delta)
        if self.inventory_items:
            parts.append(np.array([obs.inventory.get(k, 0) for k in self.inventory_items],
                                  dtype=np.float64) / 10.0)
        parts.append(obs.task_onehot())
        return np.concatenate(parts)

    def _objective_cell(self, obs: Observation) -> tuple[int, int] | None:
        """Displacement target for encode: the first goal cell by default."""
        goals = np.argwhere(obs.grid == GOAL)
        if len(goals):
            return int(goals[0][0]), int(goals[0][1])
        return None

    def _nearest_cell(self, obs: Observation, codes) -> tuple[int, int] | None:
        """Nearest cell (L1 from the agent) holding one of `codes`."""
        cells = np.argwhere(np.isin(obs.grid, codes))
        if not len(cells):
            return None
        dist = np.abs(cells - np.array(obs.agent_pos)).sum(axis=1)
        r, c = cells[int(np.argmin(dist))]
        return int(r), int(c)

    # -- debugging / wire ---------------------------------------------------

    def dump_layout(self) -> str:
        head = f"task: {self.current_task} seed: {self._seed} cap: {self.cap}"
        rows = []
        for r in range(SIZE):
            chars = [CELL_CHARS[int(code)] for code in self.grid[r]]
            if r == self.agent[0]:
                chars[self.agent[1]] = "A"
            rows.append("".join(chars))
        return "\n".join([head] + rows)

    # -- subclass hooks -----------------------------------------------------

    def fresh(self) -> "GridEnv":
        raise NotImplementedError

    def _generate(self, task: str, rng: np.random.Generator) -> None:
        raise NotImplementedError

    def _apply(self, action: int) -> tuple[float, bool, bool]:
        raise NotImplementedError


def interior_cells() -> list[tuple[int, int]]:
    return [(r, c) for r in range(LO, HI + 1) for c in range(LO, HI + 1)]


def place_distinct(rng: np.random.Generator, count: int,
                   cells: list[tuple[int, int]] | None = None) -> list[tuple[int, int]]:
    """`count` distinct cells drawn without replacement, deterministic in rng."""
    pool = cells if cells is not None else interior_cells()
    picks = rng.choice(len(pool), size=count, replace=False)
    return [pool[int(i)] for i in picks]
