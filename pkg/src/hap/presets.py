"""Named experiment presets, each mirrored as a text file under configs/.

The `nav` preset is the headline recipe: adversarial logit curriculum over
four point-goal tasks, tuned so every task reaches 0.9 greedy success within
the 50k step budget on commodity hardware.  `nav_uniform` is its paired
control.  `nav_reference` keeps the large-scale hyperparameters (wide nets,
small learning rates, big batches) for completeness; at this step budget it
does not converge and is shipped for inspection, not for the test suite.
"""

from __future__ import annotations

from dataclasses import replace
from pathlib import Path

from .harness import EnvOverrides, ExperimentSpec, resolve_config
from .student import StudentConfig
from .teacher import CurriculumConfig


def _nav_curriculum(**kw) -> CurriculumConfig:
    base = dict(kind="logit", teacher_lr=0.3, entropy_weight=0.05, p_min=0.05,
                warmup_episodes_per_task=60, update_every=25)
    base.update(kw)
    return CurriculumConfig(**base)


def _nav(name: str, curriculum: CurriculumConfig) -> ExperimentSpec:
    return ExperimentSpec(
        name=name,
        env="nav",
        total_steps=50_000,
        eval_every=2_000,
        eval_episodes=20,
        batch_episodes=2,
        seeds=(0, 1, 2, 3, 4),
        env_overrides=EnvOverrides(cap=40, distances=(1, 2, 4, 6)),
        student=StudentConfig(),
        curriculum=curriculum,
    )


def _minigrid(name: str, curriculum: CurriculumConfig) -> ExperimentSpec:
    return ExperimentSpec(
        name=name,
        env="minigrid_lite",
        total_steps=60_000,
        eval_every=3_000,
        eval_episodes=10,
        batch_episodes=2,
        seeds=tuple(range(10)),
        student=StudentConfig(),
        curriculum=curriculum,
    )


def _presets() -> dict[str, ExperimentSpec]:
    return {
        "nav": _nav("nav", _nav_curriculum()),
        "nav_uniform": _nav("nav_uniform", CurriculumConfig(kind="uniform")),
        "nav_reference": ExperimentSpec(
            name="nav_reference",
            env="nav",
            total_steps=50_000,
            eval_every=2_000,
            eval_episodes=20,
            batch_episodes=32,
            seeds=(0, 1, 2, 3, 4),
            env_overrides=EnvOverrides(cap=200, distances=(2, 4, 6, 8)),
            student=StudentConfig(hidden=(256, 128), actor_lr=1e-4,
                                  critic_lr=1e-4, gamma=0.99),
            curriculum=CurriculumConfig(kind="history", hidden=(256, 128),
                                        teacher_lr=1e-4, history_window=100,
                                        task_window=4, update_every=8),
        ),
        "minigrid": _minigrid("minigrid", _nav_curriculum()),
        "minigrid_no_entropy": _minigrid(
            "minigrid_no_entropy", _nav_curriculum(entropy_weight=0.0)),
        "minigrid_no_floor": _minigrid(
            "minigrid_no_floor", _nav_curriculum(p_min=0.0)),
        "craft_smoke": ExperimentSpec(
            name="craft_smoke",
            env="craft_smoke",
            total_steps=120_000,
            eval_every=6_000,
            eval_episodes=10,
            batch_episodes=2,
            seeds=(0,),
            student=StudentConfig(),
            curriculum=_nav_curriculum(),
        ),
    }


PRESET_NAMES = tuple(_presets())


def preset(name: str) -> ExperimentSpec:
    """A fresh copy of the named preset."""
    specs = _presets()
    if name not in specs:
        raise KeyError(f"unknown preset {name!r} (expected one of {PRESET_NAMES})")
    return specs[name]


def preset_text(name: str) -> str:
    return resolve_config(preset(name))


def write_preset_files(directory) -> list[Path]:
    """Write every preset as configs/<name>.spec; returns the paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for name in PRESET_NAMES:
        path = directory / f"{name}.spec"
        path.write_text(preset_text(name))
        paths.append(path)
    return paths


def with_seeds(spec: ExperimentSpec, seeds) -> ExperimentSpec:
    return replace(spec, seeds=tuple(seeds))
