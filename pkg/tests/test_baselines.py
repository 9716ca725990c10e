"""Baseline curriculum policies: uniform, ordered, EXP3, TSCL."""

import numpy as np
import pytest

from hap.baselines import (
    Exp3Teacher,
    OrderedTeacher,
    TsclTeacher,
    UniformTeacher,
    make_teacher,
    uniform_policy,
)
from hap.envs import ContractError, minigrid_space, nav_space
from hap.nn import entropy
from hap.rng import SeedTree
from hap.teacher import CurriculumConfig, apply_floor


def cfg_now(**kw):
    kw.setdefault("warmup_episodes_per_task", 0)
    return CurriculumConfig(**kw)


# ---------------------------------------------------------------------------
# uniform
# ---------------------------------------------------------------------------

def test_uniform_policy_trivials():
    space = nav_space()
    dist = uniform_policy(space)
    assert np.allclose(dist.probs, 0.25, atol=1e-15)
    floored = apply_floor(dist, 0.05)
    assert np.allclose(floored.probs, dist.probs, atol=1e-15)
    assert entropy(dist) == pytest.approx(np.log(4), abs=1e-12)


def test_uniform_teacher_distribution():
    teacher = UniformTeacher(nav_space(), cfg_now(kind="uniform", p_min=0.05))
    assert np.allclose(teacher.distribution().probs, 0.25, atol=1e-12)


# ---------------------------------------------------------------------------
# ordered
# ---------------------------------------------------------------------------

def ordered(space=None, **kw):
    kw.setdefault("kind", "ordered")
    return OrderedTeacher(space or nav_space(), cfg_now(**kw))


def test_ordered_fresh_run_targets_first_task():
    teacher = ordered(p_min=0.05)
    probs = teacher.distribution().probs
    assert np.allclose(probs, [0.85, 0.05, 0.05, 0.05], atol=1e-12)


def test_ordered_advances_on_threshold():
    teacher = ordered()
    teacher.on_eval({"simple": 0.9})
    assert teacher.pointer == 1
    teacher.on_eval({"simple": 0.9, "mid": 0.85, "hard": 0.95})
    assert teacher.pointer == 3  # skipped straight through


def test_ordered_exhaustion_stays_on_last():
    teacher = ordered()
    rates = {t: 1.0 for t in nav_space().tasks}
    teacher.on_eval(rates)
    assert teacher.pointer == 3
    teacher.on_eval(rates)
    assert teacher.pointer == 3
    assert np.argmax(teacher.distribution().probs) == 3


def test_ordered_never_retreats():
    teacher = ordered()
    teacher.on_eval({"simple": 0.9, "mid": 0.9})
    assert teacher.pointer == 2
    teacher.on_eval({"simple": 0.1, "mid": 0.1, "hard": 0.2})
    assert teacher.pointer == 2


def test_ordered_requires_tier_sorted_tasks():
    space = nav_space().subset(("hard", "simple"))
    with pytest.raises(ValueError):
        ordered(space=space)


# ---------------------------------------------------------------------------
# EXP3
# ---------------------------------------------------------------------------

def exp3(space=None, bounds=(0.0, 1.0), **kw):
    kw.setdefault("kind", "exp3")
    return Exp3Teacher(space or nav_space(), cfg_now(**kw), None, bounds)


def test_exp3_full_exploration_is_uniform_forever():
    teacher = exp3(exp3_gamma=1.0)
    rng = np.random.default_rng(0)
    for _ in range(50):
        task = teacher.space.tasks[rng.integers(4)]
        teacher.update([(task, float(rng.uniform()))])
        assert np.allclose(teacher.distribution().probs, 0.25, atol=1e-12)


def test_exp3_two_arm_simulation_prefers_rewarding_arm():
    space = nav_space().subset(("simple", "mid"))
    teacher = exp3(space=space)
    rng = SeedTree(123).stream("exp3")
    for _ in range(500):
        probs = teacher.distribution().probs
        arm = int(rng.choice(2, p=probs))
        reward = 1.0 if arm == 0 else 0.0
        teacher.update([(space.tasks[arm], reward)])
    assert teacher.distribution().probs[0] > 0.6


def test_exp3_unselected_arm_untouched():
    teacher = exp3()
    before = teacher.log_weights.copy()
    teacher.update([("mid", 0.8)])
    changed = teacher.log_weights != before
    assert list(changed) == [False, True, False, False]


def test_exp3_rejects_out_of_bounds_reward():
    teacher = exp3(bounds=(-0.2, 1.0))
    with pytest.raises(ContractError):
        teacher.update([("simple", 1.5)])
    with pytest.raises(ContractError):
        teacher.update([("simple", -0.3)])
    teacher.update([("simple", -0.2)])  # boundary is legal, rescales to 0


def test_exp3_exploration_must_cover_floor():
    with pytest.raises(ValueError):
        exp3(exp3_gamma=0.01, p_min=0.02)  # 0.01/4 < 0.02


def test_exp3_million_rounds_stay_finite():
    space = nav_space().subset(("simple", "mid"))
    teacher = exp3(space=space)
    # adversarial extreme: one arm always pays max reward
    for i in range(1_000_000):
        teacher.update([("simple", 1.0)])
        if i % 200_000 == 0:
            probs = teacher.distribution().probs
            assert np.all(np.isfinite(probs)) and probs.min() > 0
    probs = teacher.distribution().probs
    assert np.all(np.isfinite(teacher.log_weights))
    assert np.all(np.isfinite(probs)) and abs(probs.sum() - 1.0) <= 1e-9


# ---------------------------------------------------------------------------
# TSCL
# ---------------------------------------------------------------------------

def tscl(space=None, **kw):
    kw.setdefault("kind", "tscl")
    return TsclTeacher(space or nav_space(), cfg_now(**kw))


def test_tscl_slope_closed_form():
    teacher = tscl()
    for r in (0.0, 0.1, 0.2, 0.3):
        teacher.update([("simple", r)])
    assert teacher.slope(0) == pytest.approx(0.1, abs=1e-9)


def test_tscl_fresh_tasks_have_infinite_priority():
    teacher = tscl()
    teacher.update([("simple", 0.5)])
    assert teacher.slope(0) == np.inf  # still only one return
    assert np.allclose(teacher.distribution().probs, 0.25, atol=1e-12)


def test_tscl_constant_returns_give_uniform():
    teacher = tscl()
    for task in teacher.space.tasks:
        for _ in range(5):
            teacher.update([(task, 0.4)])
    assert np.allclose(teacher.distribution().probs, 0.25, atol=1e-12)


def test_tscl_rising_task_gets_exact_greedy_mass():
    teacher = tscl(tscl_eps=0.1)
    for task in teacher.space.tasks[1:]:
        for _ in range(5):
            teacher.update([(task, 0.4)])
    for i in range(5):
        teacher.update([("simple", 0.1 * i)])
    probs = teacher.distribution().probs
    assert probs[0] == 1.0 - 0.1 + 0.1 / 4  # exactly 1 - eps + eps/n
    assert np.allclose(probs[1:], 0.1 / 4, atol=1e-15)
    assert probs.min() >= teacher.cfg.p_min


def test_tscl_exploration_must_cover_floor():
    with pytest.raises(ValueError):
        tscl(tscl_eps=0.05, p_min=0.02)  # 0.05/4 < 0.02


def test_tscl_window_limits_slope_memory():
    teacher = tscl(tscl_window=3)
    # old rising trend followed by a flat tail longer than the window
    for r in (0.0, 0.5, 1.0, 0.7, 0.7, 0.7):
        teacher.update([("simple", r)])
    assert teacher.slope(0) == pytest.approx(0.0, abs=1e-12)


# ---------------------------------------------------------------------------
# factory and shared interface
# ---------------------------------------------------------------------------

def test_make_teacher_covers_every_kind():
    space = minigrid_space()
    for kind in CurriculumConfig.KINDS:
        # bandits rely on their own exploration mass instead of the floor,
        # and on 6 tasks the default floor would exceed gamma/n
        p_min = 0.0 if kind in ("exp3", "tscl") else 0.02
        teacher = make_teacher(space, cfg_now(kind=kind, p_min=p_min),
                               SeedTree(0).stream(kind), (-0.2, 1.0))
        dist = teacher.distribution()
        assert len(dist.probs) == space.n
        assert abs(dist.probs.sum() - 1.0) <= 1e-9
        assert dist.probs.min() >= teacher.cfg.p_min - 1e-12


def test_warmup_applies_to_baselines_too():
    teacher = make_teacher(nav_space(), CurriculumConfig(
        kind="exp3", warmup_episodes_per_task=1), None)
    assert teacher.in_warmup
    dist = teacher.distribution()
    assert dist.probs.max() == 1.0  # scheduled one-hot, not bandit mixing
