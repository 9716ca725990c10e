"""Craft-style world: gather resources, craft items at stations, follow recipes.

The task list mirrors a classic crafting hierarchy: `get[x]` tasks want one
unit of a world resource in the inventory, `make[x]` tasks want one crafted
item. The recipe table below is the single source of truth for both the
environment dynamics and the prerequisite DAG; docs/formats.md renders it.

The one non-movement action is `use`:
  * on a resource tile, gather it (gold needs an axe in hand, gem a hammer);
  * on a station tile, craft the satisfiable recipe with the most
    ingredients (ties broken by recipe table order), consuming them.
"""

from __future__ import annotations

import numpy as np

from .base import (
    EMPTY,
    FACTORY,
    GEM,
    GOLD,
    GRASS,
    GridEnv,
    IRON,
    ROCK,
    TOOLSHED,
    TREE,
    TaskSpace,
    WORKBENCH,
    place_distinct,
)

USE = 4

BASE_RESOURCES = ("wood", "grass", "rock", "iron", "gold", "gem")

RESOURCE_TILES = {TREE: "wood", GRASS: "grass", ROCK: "rock", IRON: "iron", GOLD: "gold", GEM: "gem"}
STATION_TILES = {TOOLSHED: "toolshed", WORKBENCH: "workbench", FACTORY: "factory"}

TILE_FOR_RESOURCE = {name: code for code, name in RESOURCE_TILES.items()}
TILE_FOR_STATION = {name: code for code, name in STATION_TILES.items()}

# resource tile multiplicity per layout; enough for every single-task plan
RESOURCE_COUNTS = {TREE: 3, GRASS: 2, ROCK: 2, IRON: 2, GOLD: 1, GEM: 1}

# item -> (station, ingredients); order is the crafting tie-break order
RECIPES: dict[str, tuple[str, dict[str, int]]] = {
    "stick":     ("toolshed",  {"wood": 1}),
    "plank":     ("workbench", {"wood": 1}),
    "rope":      ("toolshed",  {"grass": 1}),
    "cloth":     ("factory",   {"grass": 1}),
    "bench":     ("factory",   {"wood": 1, "rock": 1}),
    "axe":       ("workbench", {"stick": 1, "iron": 1}),
    "arrow":     ("toolshed",  {"stick": 1, "rock": 1}),
    "knife":     ("workbench", {"iron": 1}),
    "shears":    ("factory",   {"iron": 1, "rope": 1}),
    "slingshot": ("toolshed",  {"stick": 1, "rope": 1}),
    # knife listed first: plans gather it before stick+iron coexist at the bench
    "bow":       ("workbench", {"knife": 1, "rope": 1, "stick": 1}),
    "bed":       ("factory",   {"plank": 1, "cloth": 1}),
    "bridge":    ("workbench", {"plank": 1, "iron": 1}),
    "bundle":    ("factory",   {"rope": 1, "cloth": 1}),
    "flag":      ("factory",   {"stick": 1, "cloth": 1}),
    "goldarrow": ("workbench", {"arrow": 1, "gold": 1}),
    "hammer":    ("toolshed",  {"rock": 1, "stick": 1, "iron": 1}),
    "ladder":    ("workbench", {"plank": 1, "stick": 1}),
}

# gathering these resources requires holding a crafted tool
GATHER_TOOLS = {"gold": "axe", "gem": "hammer"}

CRAFT_TIERS = {
    "get[grass]": "easy", "get[wood]": "easy", "get[rock]": "easy",
    "make[stick]": "easy", "make[plank]": "easy",
    "get[iron]": "middle", "get[gold]": "middle", "make[axe]": "middle",
    "make[bench]": "middle", "make[rope]": "middle", "make[arrow]": "middle",
    "make[knife]": "middle", "make[shears]": "middle", "make[slingshot]": "middle",
    "make[cloth]": "middle",
    "get[gem]": "hard", "make[bed]": "hard", "make[bow]": "hard",
    "make[bridge]": "hard", "make[bundle]": "hard", "make[flag]": "hard",
    "make[goldarrow]": "hard", "make[hammer]": "hard", "make[ladder]": "hard",
}

CRAFT_TASKS = tuple(CRAFT_TIERS)
SMOKE_TASKS = ("get[wood]", "make[stick]", "make[plank]")

ITEMS = BASE_RESOURCES + tuple(RECIPES)  # inventory encoding order


def task_item(task: str) -> str:
    return task[task.index("[") + 1 : -1]


def item_task(item: str) -> str:
    return f"get[{item}]" if item in BASE_RESOURCES else f"make[{item}]"


def _deps(task: str) -> tuple[str, ...]:
    item = task_item(task)
    if task.startswith("get["):
        tool = GATHER_TOOLS.get(item)
        return (item_task(tool),) if tool else ()
    _, ingredients = RECIPES[item]
    return tuple(item_task(i) for i in ingredients)


def craft_space(tasks=CRAFT_TASKS) -> TaskSpace:
    space = TaskSpace(
        tasks=tuple(tasks),
        tiers={t: CRAFT_TIERS[t] for t in tasks},
        deps={t: tuple(d for d in _deps(t) if d in set(tasks)) for t in tasks},
    )
    return space


def _check_tier_ordering() -> None:
    # every dependency sits in the same or an easier tier
    rank = {"easy": 0, "middle": 1, "hard": 2}
    for task in CRAFT_TASKS:
        for dep in _deps(task):
            if rank[CRAFT_TIERS[dep]] > rank[CRAFT_TIERS[task]]:
                raise AssertionError(f"{task} depends on harder {dep}")


_check_tier_ordering()


class CraftEnv(GridEnv):
    kind = "craft"
    palette = (EMPTY,) + tuple(RESOURCE_TILES) + tuple(STATION_TILES)
    inventory_items = ITEMS
    n_actions = 5

    def __init__(self, tasks=CRAFT_TASKS, cap: int = 1000, step_penalty: float = 0.001):
        super().__init__(craft_space(tasks), cap=cap, step_penalty=step_penalty)
        self._tasks_arg = tuple(tasks)

    def fresh(self) -> "CraftEnv":
        return CraftEnv(self._tasks_arg, cap=self.cap, step_penalty=self.step_penalty)

    def _generate(self, task: str, rng: np.random.Generator) -> None:
        tiles: list[int] = []
        for tile, count in RESOURCE_COUNTS.items():
            tiles.extend([tile] * count)
        tiles.extend(STATION_TILES)
        cells = place_distinct(rng, len(tiles) + 1)
        for tile, cell in zip(tiles, cells[:-1]):
            self.grid[cell] = tile
        self.agent = cells[-1]

    def _target_item(self) -> str:
        return task_item(self.current_task)

    def _apply(self, action: int) -> tuple[float, bool, bool]:
        if action != USE:
            target = self._try_move(action)
            if target is not None:
                self.agent = target
            return 0.0, False, False
        code = int(self.grid[self.agent])
        if code in RESOURCE_TILES:
            resource = RESOURCE_TILES[code]
            tool = GATHER_TOOLS.get(resource)
            if tool is None or self.inventory[tool] > 0:
                self.inventory[resource] += 1
                self.grid[self.agent] = EMPTY
        elif code in STATION_TILES:
            self._craft_at(STATION_TILES[code])
        if self.inventory[self._target_item()] > 0:
            return 1.0, True, True
        return 0.0, False, False

    def _objective_tile(self, item: str, inventory: dict[str, int]) -> int:
        """Tile code worth standing on next while acquiring one `item`."""
        if item in BASE_RESOURCES:
            tool = GATHER_TOOLS.get(item)
            if tool and inventory.get(tool, 0) == 0:
                return self._objective_tile(tool, inventory)
            return TILE_FOR_RESOURCE[item]
        station, ingredients = RECIPES[item]
        for k, v in ingredients.items():
            if inventory.get(k, 0) < v:
                return self._objective_tile(k, inventory)
        return TILE_FOR_STATION[station]

    def _objective_cell(self, obs) -> tuple[int, int] | None:
        """Nearest tile that advances the task: the next missing ingredient
        down the recipe chain, or the station once ingredients are in hand."""
        item = task_item(self.space.tasks[obs.task_index])
        return self._nearest_cell(obs, self._objective_tile(item, obs.inventory))

    def _craft_at(self, station: str) -> None:
        best: str | None = None
        best_size = -1
        for item, (at, ingredients) in RECIPES.items():
            if at != station:
                continue
            if all(self.inventory[k] >= v for k, v in ingredients.items()):
                size = sum(ingredients.values())
                if size > best_size:
                    best, best_size = item, size
        if best is not None:
            for k, v in RECIPES[best][1].items():
                self.inventory[k] -= v
            self.inventory[best] += 1
