"""Teacher contracts: floor, clamp, adversarial direction, features, meta."""

import numpy as np
import pytest

from hap.envs import ContractError, nav_space
from hap.envs.base import TaskSpace
from hap.nn import Categorical, softmax
from hap.rng import SeedTree
from hap.teacher import (
    RETURN_TAIL,
    CurriculumConfig,
    HistoryTeacher,
    HistoryWindow,
    LogitTeacher,
    MetaTeacher,
    apply_floor,
    apply_task_window,
    feature_length,
    task_distribution,
    teacher_reward,
    update_logit_teacher,
    warmup_schedule,
)


def two_task_space():
    return TaskSpace(tasks=("a", "b"), tiers={"a": "easy", "b": "hard"}, deps={})


def cfg_now(**kw):
    kw.setdefault("warmup_episodes_per_task", 0)
    return CurriculumConfig(**kw)


# ---------------------------------------------------------------------------
# floor projection
# ---------------------------------------------------------------------------

def test_floor_zero_is_identity():
    dist = Categorical(np.array([0.7, 0.2, 0.1]))
    out = apply_floor(dist, 0.0)
    assert np.array_equal(out.probs, dist.probs)


def test_floor_affine_example():
    # out_i = p_min + (1 - n*p_min) * dist_i with n=4, p_min=0.05
    out = apply_floor(Categorical(np.array([1.0, 0.0, 0.0, 0.0])), 0.05)
    assert np.allclose(out.probs, [0.85, 0.05, 0.05, 0.05], atol=1e-12)
    assert abs(out.probs.sum() - 1.0) <= 1e-12


def test_floor_preserves_argmax_on_random_dists():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        p = rng.dirichlet(np.ones(rng.integers(2, 8)))
        p_min = float(rng.uniform(0, 0.9 / len(p)))
        out = apply_floor(Categorical(p), p_min)
        assert np.argmax(out.probs) == np.argmax(p)
        assert out.probs.min() >= p_min - 1e-12
        assert abs(out.probs.sum() - 1.0) <= 1e-9


def test_floor_infeasible_rejected():
    with pytest.raises(ValueError):
        apply_floor(Categorical(np.full(4, 0.25)), 0.25)
    with pytest.raises(ValueError):
        CurriculumConfig(p_min=1.0)


def test_task_window_caps_boosted_mass():
    rng = np.random.default_rng(1)
    p_min, k = 0.02, 3
    for _ in range(500):
        probs = softmax(rng.normal(size=8) * 3)
        capped = apply_task_window(probs, k)
        out = apply_floor(Categorical(capped), p_min)
        assert (out.probs > 2 * p_min).sum() <= k
        dropped = np.argsort(-probs, kind="stable")[k:]
        assert np.allclose(out.probs[dropped], p_min, atol=1e-12)


def test_task_window_disabled_or_loose_is_identity():
    probs = np.array([0.5, 0.3, 0.2])
    assert np.array_equal(apply_task_window(probs, 0), probs)
    assert np.array_equal(apply_task_window(probs, 3), probs)
    assert np.array_equal(apply_task_window(probs, 99), probs)


# ---------------------------------------------------------------------------
# teacher reward clamp
# ---------------------------------------------------------------------------

def test_teacher_reward_piecewise():
    assert teacher_reward(0.4, 0.05, clamp_enabled=False) == -0.4
    assert teacher_reward(0.0, 0.05, clamp_enabled=True) == 0.0
    assert teacher_reward(0.99, 0.05, clamp_enabled=True) == -0.99
    assert teacher_reward(0.9, 0.05, clamp_enabled=True) == 0.0
    assert teacher_reward(0.96, 0.05, clamp_enabled=True) == -0.96
    with pytest.raises(ContractError):
        teacher_reward(float("nan"), 0.05, False)


# ---------------------------------------------------------------------------
# logit teacher
# ---------------------------------------------------------------------------

def test_zero_logits_give_uniform():
    teacher = LogitTeacher(nav_space(), cfg_now())
    dist = task_distribution(teacher)
    assert np.allclose(dist.probs, 0.25, atol=1e-12)


def test_distribution_respects_floor_after_updates():
    rng = np.random.default_rng(2)
    teacher = LogitTeacher(nav_space(), cfg_now(p_min=0.05, teacher_lr=0.5))
    for _ in range(200):
        batch = [(teacher.space.tasks[rng.integers(4)], float(rng.uniform(0, 1)))
                 for _ in range(4)]
        teacher.update(batch)
        assert teacher.distribution().probs.min() >= 0.05 - 1e-12


def test_two_task_direction_uniform_start():
    teacher = LogitTeacher(two_task_space(), cfg_now())
    p_before = teacher.distribution().probs.copy()
    update_logit_teacher(teacher, [("a", 1.0), ("b", 0.0)])
    p_after = teacher.distribution().probs
    assert p_after[0] < p_before[0]
    assert p_after[1] > p_before[1]


def test_two_task_direction_brute_force():
    rng = np.random.default_rng(3)
    space = two_task_space()
    for _ in range(1000):
        teacher = LogitTeacher(space, cfg_now(entropy_weight=0.0,
                                              teacher_lr=float(rng.uniform(0.01, 1.0))))
        teacher.logits = rng.normal(size=2) * 2
        ra, rb = rng.uniform(0, 1, size=2)
        if abs(ra - rb) < 1e-6:
            continue
        p_before = teacher.distribution().probs.copy()
        teacher.update([("a", float(ra)), ("b", float(rb))])
        p_after = teacher.distribution().probs
        hi = 0 if ra > rb else 1
        assert p_after[hi] < p_before[hi]


def test_equal_returns_move_only_entropy_term():
    teacher = LogitTeacher(two_task_space(), cfg_now(entropy_weight=0.0))
    teacher.logits = np.array([1.0, -0.5])
    before = teacher.logits.copy()
    teacher.update([("a", 0.7), ("b", 0.7)])
    assert np.array_equal(teacher.logits, before)


def test_entropy_dominance_converges_to_uniform():
    teacher = LogitTeacher(two_task_space(),
                           cfg_now(entropy_weight=10.0, teacher_lr=0.02))
    teacher.logits = np.array([2.0, -1.0])
    for _ in range(2000):
        teacher.update([("a", 0.0), ("b", 0.0)])
    tv = 0.5 * np.abs(teacher.distribution().probs - 0.5).sum()
    assert tv <= 1e-3


def test_clamp_zeroes_adversarial_term_keeps_entropy():
    cfg = cfg_now(clamp_enabled=True, clamp_eps=0.05, entropy_weight=0.5,
                  teacher_lr=0.1)
    teacher = LogitTeacher(two_task_space(), cfg)
    teacher.logits = np.array([1.0, 0.0])
    probs = softmax(teacher.logits)
    before = teacher.logits.copy()
    report = teacher.update([("a", 0.5), ("b", 0.3)])  # mean 0.4 <= 0.95
    assert report["teacher_reward"] == 0.0
    # movement must equal the pure entropy step
    from hap.nn import entropy_grad_wrt_logits
    want = before + 0.1 * (0.5 * entropy_grad_wrt_logits(probs))
    assert np.allclose(teacher.logits, want, atol=1e-12)


def test_empty_batch_rejected():
    teacher = LogitTeacher(nav_space(), cfg_now())
    with pytest.raises(ContractError):
        teacher.update([])


# ---------------------------------------------------------------------------
# warm-up
# ---------------------------------------------------------------------------

def test_warmup_schedule_shape():
    space = nav_space()
    assert warmup_schedule(space, 0) == []
    sched = warmup_schedule(space, 2)
    assert len(sched) == 8
    for task in space.tasks:
        assert sched.count(task) == 2
    assert sched[:4] == list(space.tasks)


def test_warmup_distribution_is_scheduled_onehot():
    space = nav_space()
    teacher = LogitTeacher(space, CurriculumConfig(warmup_episodes_per_task=2))
    seen = []
    for _ in range(8):
        dist = teacher.distribution()
        task_idx = int(np.argmax(dist.probs))
        assert dist.probs[task_idx] == 1.0
        seen.append(space.tasks[task_idx])
        teacher.on_episode(task_idx, 0.3, False)
    assert seen == warmup_schedule(space, 2)
    assert not teacher.in_warmup


def test_warmup_neutrality_and_counts():
    space = nav_space()
    teacher = LogitTeacher(space, CurriculumConfig(warmup_episodes_per_task=3))
    before = teacher.logits.copy()
    for _ in range(12):
        idx = int(np.argmax(teacher.distribution().probs))
        report = teacher.update([(space.tasks[idx], 0.5)])
        assert report == {"warmup": True}
        teacher.on_episode(idx, 0.5, True)
    assert np.array_equal(teacher.logits, before)
    assert all(c >= 3 for c in teacher.history.counts())


# ---------------------------------------------------------------------------
# history window and features
# ---------------------------------------------------------------------------

def test_history_ring_eviction_and_aggregates():
    win = HistoryWindow(3, window=5)
    for i in range(8):
        win.push(i % 3, float(i), i % 2 == 0)
    assert len(win.records) == 5
    # recompute aggregates directly from the surviving records
    recs = list(win.records)
    for t in range(3):
        rs = [r for ti, r, _ in recs if ti == t]
        wins = [s for ti, _, s in recs if ti == t]
        assert win.counts()[t] == len(rs)
        if rs:
            assert abs(win.mean_returns()[t] - np.mean(rs)) <= 1e-9
            assert abs(win.success_rates()[t] - np.mean(wins)) <= 1e-9


def test_feature_length_fixed_and_window_independent():
    for n in (2, 4, 24):
        for w in (10, 100):
            cfg = cfg_now(history_window=w)
            win = HistoryWindow(n, w)
            assert win.features(cfg).size == feature_length(n, cfg) == 3 * n + RETURN_TAIL
    masked = cfg_now(feature_returns=False)
    assert feature_length(4, masked) == 8
    assert HistoryWindow(4, 10).features(masked).size == 8


def test_return_tail_holds_most_recent():
    cfg = cfg_now()
    win = HistoryWindow(2, 100)
    for i in range(20):
        win.push(0, float(i), True)
    feats = win.features(cfg)
    tail = feats[-RETURN_TAIL:]
    assert np.array_equal(tail, np.arange(4, 20, dtype=float))


# ---------------------------------------------------------------------------
# history teacher
# ---------------------------------------------------------------------------

def test_history_zero_net_uniform_and_matches_logit_behavior():
    space = two_task_space()
    hist = HistoryTeacher(space, cfg_now())
    for i in range(6):
        hist.on_episode(i % 2, 0.5, True)
    assert np.allclose(hist.distribution().probs, 0.5, atol=1e-12)


def test_history_gradient_matches_finite_difference():
    space = two_task_space()
    cfg = cfg_now(entropy_weight=0.0, baseline="none", hidden=(8,))
    teacher = HistoryTeacher(space, cfg, SeedTree(9).stream("t"))
    rng = np.random.default_rng(4)
    for i in range(30):
        teacher.on_episode(int(rng.integers(2)), float(rng.uniform()), bool(rng.integers(2)))
    batch = [("a", 0.9), ("b", 0.2), ("a", 0.4)]

    grads = teacher.loss_gradients(batch)
    flat = np.concatenate([g.ravel() for g in grads])

    def loss(theta):
        saved = teacher.net.flat()
        teacher.net.load_flat(theta)
        feats = teacher.history.features(cfg)
        logits = teacher.net.forward(feats)
        logp = np.log(softmax(logits))
        out = np.mean([r * logp[space.index(t)] for t, r in batch])
        teacher.net.load_flat(saved)
        return out

    theta = teacher.net.flat()
    h = 1e-5
    fd = np.zeros_like(theta)
    for i in range(theta.size):
        up, down = theta.copy(), theta.copy()
        up[i] += h
        down[i] -= h
        fd[i] = (loss(up) - loss(down)) / (2 * h)
    scale = max(np.abs(fd).max(), 1e-12)
    assert np.max(np.abs(flat - fd)) / scale <= 1e-4


def test_history_update_moves_against_success():
    # task "a" keeps returning 1.0, task "b" 0.0: probability of "a" drops;
    # single-episode batches need the raw-return baseline, since centering
    # by the batch mean zeroes every one-element batch
    space = two_task_space()
    teacher = HistoryTeacher(space, cfg_now(teacher_lr=0.05, baseline="none"),
                             SeedTree(1).stream("t"))
    rng = np.random.default_rng(5)
    for i in range(200):
        dist = teacher.distribution()
        idx = int(rng.choice(2, p=dist.probs))
        ret = 1.0 if idx == 0 else 0.0
        teacher.on_episode(idx, ret, ret > 0.5)
        teacher.update([(space.tasks[idx], ret)])
    assert teacher.distribution().probs[1] > 0.6


# ---------------------------------------------------------------------------
# meta teacher
# ---------------------------------------------------------------------------

def meta_cfg(**kw):
    kw.setdefault("kind", "meta")
    kw.setdefault("meta_batch", 4)
    kw.setdefault("meta_buffer", 16)
    kw.setdefault("teacher_lr", 0.05)
    return cfg_now(**kw)


def drive_meta(teacher, rounds, ret_fn, rng):
    for i in range(rounds):
        dist = teacher.distribution()
        idx = int(rng.choice(teacher.space.n, p=dist.probs))
        ret = ret_fn(i, idx)
        teacher.on_episode(idx, ret, ret > 0.5)
        teacher.update([(teacher.space.tasks[idx], ret)])


def test_meta_first_updates_skipped_until_batch():
    teacher = MetaTeacher(two_task_space(), meta_cfg(), SeedTree(0).stream("m"))
    report = teacher.update([("a", 0.0)])
    assert report["skipped"] and report["buffer"] == 0


def test_meta_critic_td_converges_on_zero_rewards():
    teacher = MetaTeacher(two_task_space(), meta_cfg(), SeedTree(2).stream("m"))
    rng = np.random.default_rng(6)
    drive_meta(teacher, 10, lambda i, t: 0.0, rng)
    initial = teacher.td_error(list(teacher.buffer))
    drive_meta(teacher, 300, lambda i, t: 0.0, rng)
    final = teacher.td_error(list(teacher.buffer))
    assert final < 1e-2
    assert final < initial or initial < 1e-6


def test_meta_actor_frozen_under_zero_critic():
    teacher = MetaTeacher(two_task_space(), meta_cfg(), SeedTree(3).stream("m"))
    teacher.critic.load_flat(np.zeros(teacher.critic.flat().size))
    before = teacher.actor.flat()
    rng = np.random.default_rng(7)
    drive_meta(teacher, 40, lambda i, t: 0.0, rng)
    assert np.array_equal(teacher.actor.flat(), before)


def test_meta_buffer_evicts_oldest():
    teacher = MetaTeacher(two_task_space(), meta_cfg(meta_buffer=8, meta_batch=2),
                          SeedTree(4).stream("m"))
    rng = np.random.default_rng(8)
    drive_meta(teacher, 20, lambda i, t: float(i) / 100.0, rng)
    assert len(teacher.buffer) == 8
    stored_rewards = {r for _, _, r, _ in teacher.buffer}
    # rewards are negated returns, distinct per round, so eviction is visible
    assert all(r <= 0 for r in stored_rewards)
    oldest_kept = min(-r for _, _, r, _ in teacher.buffer)
    assert oldest_kept >= 0.11  # returns 0.00 .. 0.10 were evicted


def test_meta_distribution_floor_and_shape():
    teacher = MetaTeacher(nav_space(), meta_cfg(p_min=0.03), SeedTree(5).stream("m"))
    rng = np.random.default_rng(9)
    drive_meta(teacher, 60, lambda i, t: float(rng.uniform()), rng)
    dist = teacher.distribution()
    assert len(dist.probs) == 4
    assert dist.probs.min() >= 0.03 - 1e-12
