"""Task environments: Nav, the Minigrid-style suite, and the Craft world."""

from .base import (
    ContractError,
    GridEnv,
    Observation,
    TaskSpace,
    Trajectory,
    TrajStep,
    discounted,
)
from .craft import CRAFT_TASKS, SMOKE_TASKS, CraftEnv, craft_space
from .minigrid import MINIGRID_TASKS, MinigridEnv, minigrid_space
from .nav import NAV_TASKS, NavEnv, nav_space
from .oracle import run_oracle, solvable

#: tasks for the three-task ablation suite (easy/middle/hard representatives)
MINIGRID_LITE_TASKS = ("empty", "doorkey", "multiroom")

ENV_KINDS = ("nav", "minigrid", "minigrid_lite", "craft", "craft_smoke")


def make_env(kind: str, **overrides) -> GridEnv:
    """Environment factory used by specs and the CLI.

    Overrides are the constructor knobs of the underlying class
    (`cap`, `step_penalty`, plus `distances` for nav).
    """
    if kind == "nav":
        return NavEnv(**overrides)
    if kind == "minigrid":
        return MinigridEnv(**overrides)
    if kind == "minigrid_lite":
        return MinigridEnv(tasks=MINIGRID_LITE_TASKS, **overrides)
    if kind == "craft":
        return CraftEnv(**overrides)
    if kind == "craft_smoke":
        return CraftEnv(tasks=SMOKE_TASKS, **overrides)
    raise ValueError(f"unknown environment kind {kind!r} (expected one of {ENV_KINDS})")


__all__ = [
    "ContractError",
    "GridEnv",
    "Observation",
    "TaskSpace",
    "Trajectory",
    "TrajStep",
    "discounted",
    "CraftEnv",
    "MinigridEnv",
    "NavEnv",
    "CRAFT_TASKS",
    "MINIGRID_TASKS",
    "MINIGRID_LITE_TASKS",
    "NAV_TASKS",
    "SMOKE_TASKS",
    "ENV_KINDS",
    "craft_space",
    "minigrid_space",
    "nav_space",
    "make_env",
    "run_oracle",
    "solvable",
]
