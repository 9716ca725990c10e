"""Adversarial task-selection policies.

A teacher emits a Categorical over tasks and is rewarded for LOW student
returns, so gradient ascent on its objective steers probability mass toward
whatever the student currently fails at.  An entropy bonus keeps the
distribution from collapsing, a probability floor keeps every task alive,
and an optional support cap limits how many tasks hold boosted mass at once.

Three learnable variants share the update math:
  LogitTeacher    - a bare logit vector, plain gradient steps
  HistoryTeacher  - an MLP scoring network over summary features of recent
                    episodes, Adam steps
  MetaTeacher     - deterministic actor + Q critic over the same features
                    with a replay ring, one TD step and one ascent step per
                    update
"""

from collections import deque
from dataclasses import dataclass

import numpy as np

from .envs.base import ContractError, TaskSpace
from .nn import (
    AdamState,
    Categorical,
    Mlp,
    adam_step,
    entropy_grad_wrt_logits,
    one_hot,
    softmax,
)

RETURN_TAIL = 16  # how many raw recent returns enter the feature vector


@dataclass
class CurriculumConfig:
    kind: str = "logit"
    entropy_weight: float = 0.1
    p_min: float = 0.02
    warmup_episodes_per_task: int = 50
    clamp_enabled: bool = False
    clamp_eps: float = 0.05
    teacher_lr: float = 0.1
    history_window: int = 100
    # episodes per teacher update; single-episode batches have zero advantage
    # under the batch_mean baseline, so keep this well above 1 with it
    update_every: int = 25
    task_window: int = 0  # 0 disables the support cap
    baseline: str = "batch_mean"
    feature_success: bool = True
    feature_counts: bool = True
    feature_returns: bool = True
    hidden: tuple[int, ...] = (32,)
    meta_gamma: float = 0.9
    meta_buffer: int = 512
    meta_batch: int = 32
    exp3_gamma: float = 0.1
    tscl_eps: float = 0.1
    tscl_window: int = 10
    ordered_threshold: float = 0.8

    KINDS = ("logit", "history", "meta", "uniform", "ordered", "exp3", "tscl")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown curriculum kind {self.kind!r}")
        if self.entropy_weight < 0:
            raise ValueError("entropy_weight must be >= 0")
        if not 0.0 <= self.p_min < 1.0:
            raise ValueError("p_min must lie in [0, 1)")
        if not 0.0 < self.clamp_eps <= 1.0:
            raise ValueError("clamp_eps must lie in (0, 1]")
        if self.warmup_episodes_per_task < 0:
            raise ValueError("warmup episodes must be >= 0")
        if self.update_every < 1:
            raise ValueError("update_every must be >= 1")
        if self.baseline not in ("batch_mean", "none"):
            raise ValueError(f"unknown baseline {self.baseline!r}")


def apply_floor(dist: Categorical, p_min: float) -> Categorical:
    """Affine mix toward uniform: out_i = p_min + (1 - n*p_min) * p_i.

    Order-preserving, so the argmax task survives the projection.
    """
    n = len(dist.probs)
    if p_min == 0.0:
        return dist
    if p_min * n >= 1.0:
        raise ValueError(f"p_min {p_min} infeasible for {n} tasks")
    return Categorical(p_min + (1.0 - n * p_min) * dist.probs)


def apply_task_window(probs: np.ndarray, k: int) -> np.ndarray:
    """Keep only the k most probable tasks and renormalize."""
    if k <= 0 or k >= len(probs):
        return probs
    keep = np.argsort(-probs, kind="stable")[:k]  # ties break to lower index
    out = np.zeros_like(probs)
    out[keep] = probs[keep]
    return out / out.sum()


def teacher_reward(mean_return: float, eps: float, clamp_enabled: bool) -> float:
    """Negated student return, optionally clamped to zero outside the band."""
    if not np.isfinite(mean_return):
        raise ContractError("teacher reward needs a finite return")
    if clamp_enabled and (mean_return == 0.0 or mean_return <= 1.0 - eps):
        return 0.0
    return -mean_return


def warmup_schedule(space: TaskSpace, k: int) -> list[str]:
    """Round-robin over tasks in order, k full passes."""
    if k < 0:
        raise ValueError("warmup episodes per task must be >= 0")
    return [t for _ in range(k) for t in space.tasks]


class HistoryWindow:
    """Ring of the last W (task index, return, success) records."""

    def __init__(self, n_tasks: int, window: int):
        self.n_tasks = n_tasks
        self.window = window
        self.records: deque[tuple[int, float, bool]] = deque(maxlen=window)

    def push(self, task_index: int, ret: float, success: bool):
        self.records.append((task_index, float(ret), bool(success)))

    def counts(self) -> np.ndarray:
        c = np.zeros(self.n_tasks)
        for t, _, _ in self.records:
            c[t] += 1
        return c

    def success_rates(self) -> np.ndarray:
        c, wins = self.counts(), np.zeros(self.n_tasks)
        for t, _, s in self.records:
            wins[t] += s
        return np.divide(wins, c, out=np.zeros(self.n_tasks), where=c > 0)

    def mean_returns(self) -> np.ndarray:
        c, total = self.counts(), np.zeros(self.n_tasks)
        for t, r, _ in self.records:
            total[t] += r
        return np.divide(total, c, out=np.zeros(self.n_tasks), where=c > 0)

    def features(self, cfg: CurriculumConfig) -> np.ndarray:
        """Fixed-length summary: rates, normalized counts, return statistics.

        Length depends only on the task count and the component mask, never
        on the window size.  With everything enabled: 3n + RETURN_TAIL.
        """
        parts = []
        if cfg.feature_success:
            parts.append(self.success_rates())
        if cfg.feature_counts:
            c = self.counts()
            parts.append(c / max(c.sum(), 1.0))
        if cfg.feature_returns:
            parts.append(self.mean_returns())
            tail = np.zeros(RETURN_TAIL)
            recent = [r for _, r, _ in self.records][-RETURN_TAIL:]
            if recent:
                tail[-len(recent):] = recent
            parts.append(tail)
        return np.concatenate(parts) if parts else np.zeros(0)


def feature_length(n_tasks: int, cfg: CurriculumConfig) -> int:
    n = n_tasks * (int(cfg.feature_success) + int(cfg.feature_counts)
                   + int(cfg.feature_returns))
    return n + (RETURN_TAIL if cfg.feature_returns else 0)


class TeacherBase:
    """Shared plumbing: warm-up schedule, history, floor and support cap."""

    def __init__(self, space: TaskSpace, cfg: CurriculumConfig,
                 rng: np.random.Generator | None = None):
        if cfg.p_min * space.n >= 1.0:
            raise ValueError(f"p_min {cfg.p_min} infeasible for {space.n} tasks")
        self.space = space
        self.cfg = cfg
        self.rng = rng
        self.history = HistoryWindow(space.n, cfg.history_window)
        self._warmup = warmup_schedule(space, cfg.warmup_episodes_per_task)
        self._warmup_done = 0
        self.updates = 0

    @property
    def in_warmup(self) -> bool:
        return self._warmup_done < len(self._warmup)

    def on_episode(self, task_index: int, ret: float, success: bool):
        self.history.push(task_index, ret, success)
        if self.in_warmup:
            self._warmup_done += 1

    def on_eval(self, success_rates: dict[str, float]):
        pass

    def distribution(self) -> Categorical:
        if self.in_warmup:
            task = self._warmup[self._warmup_done]
            return Categorical(one_hot(self.space.index(task), self.space.n))
        probs = apply_task_window(self._raw_probs(), self.cfg.task_window)
        return apply_floor(Categorical(probs), self.cfg.p_min)

    def _raw_probs(self) -> np.ndarray:
        raise NotImplementedError

    def update(self, batch: list[tuple[str, float]]) -> dict:
        if not batch:
            raise ContractError("teacher update needs a nonempty batch")
        if self.in_warmup:
            return {"warmup": True}
        self.updates += 1
        return self._update(batch)

    def _update(self, batch: list[tuple[str, float]]) -> dict:
        raise NotImplementedError

    def _centered(self, batch) -> tuple[np.ndarray, np.ndarray, float]:
        tasks = np.array([self.space.index(t) for t, _ in batch])
        returns = np.array([r for _, r in batch])
        mean = float(returns.mean())
        base = mean if self.cfg.baseline == "batch_mean" else 0.0
        return tasks, returns - base, mean

    def _adversarial_dlogits(self, probs, tasks, centered) -> np.ndarray:
        """Ascent direction on E[-return] w.r.t. the pre-floor logits."""
        g = np.zeros_like(probs)
        for t, c in zip(tasks, centered):
            g -= c * (one_hot(t, len(probs)) - probs)
        return g / len(tasks)


class LogitTeacher(TeacherBase):
    """Bare logit vector; one plain gradient step per update."""

    def __init__(self, space, cfg, rng=None):
        super().__init__(space, cfg, rng)
        self.logits = np.zeros(space.n)

    def _raw_probs(self):
        return softmax(self.logits)

    def _update(self, batch):
        tasks, centered, mean = self._centered(batch)
        probs = softmax(self.logits)
        reward = teacher_reward(mean, self.cfg.clamp_eps, self.cfg.clamp_enabled)
        if not self.cfg.clamp_enabled:
            assert reward == -mean  # zero-sum coupling
        ascent = np.zeros_like(probs)
        if not (self.cfg.clamp_enabled and reward == 0.0):
            ascent += self._adversarial_dlogits(probs, tasks, centered)
        ascent += self.cfg.entropy_weight * entropy_grad_wrt_logits(probs)
        self.logits += self.cfg.teacher_lr * ascent
        return {"mean_return": mean, "teacher_reward": reward,
                "grad_norm": float(np.linalg.norm(ascent))}


class HistoryTeacher(TeacherBase):
    """MLP from history features to task logits; Adam steps."""

    def __init__(self, space, cfg, rng=None):
        super().__init__(space, cfg, rng)
        self.feat_dim = feature_length(space.n, cfg)
        self.net = Mlp((self.feat_dim, *cfg.hidden, space.n), rng)
        self.opt = AdamState(lr=cfg.teacher_lr)

    def _raw_probs(self):
        return softmax(self.net.forward(self.history.features(self.cfg)))

    def loss_gradients(self, batch) -> list[np.ndarray]:
        """Descent gradients of -(teacher objective) through the net."""
        tasks, centered, mean = self._centered(batch)
        feats = self.history.features(self.cfg)
        logits, cache = self.net.forward_cache(feats)
        probs = softmax(logits)
        reward = teacher_reward(mean, self.cfg.clamp_eps, self.cfg.clamp_enabled)
        ascent = np.zeros_like(probs)
        if not (self.cfg.clamp_enabled and reward == 0.0):
            ascent += self._adversarial_dlogits(probs, tasks, centered)
        ascent += self.cfg.entropy_weight * entropy_grad_wrt_logits(probs)
        grads, _ = self.net.backward(cache, -ascent)
        return grads

    def _update(self, batch):
        _, _, mean = self._centered(batch)
        if not self.cfg.clamp_enabled:
            assert teacher_reward(mean, self.cfg.clamp_eps, False) == -mean
        grads = self.loss_gradients(batch)
        adam_step(self.net.params, grads, self.opt)
        norm = float(np.sqrt(sum(float((g * g).sum()) for g in grads)))
        return {"mean_return": mean, "grad_norm": norm}


class MetaTeacher(TeacherBase):
    """Deterministic actor + Q critic over history features with replay.

    The actor maps features to a logit vector (the continuous action); the
    critic scores (features, logits) pairs.  Each update stores one
    transition, then takes one TD step on the critic and one ascent step on
    the actor through the critic's input gradient.
    """

    def __init__(self, space, cfg, rng=None):
        super().__init__(space, cfg, rng)
        self.feat_dim = feature_length(space.n, cfg)
        self.actor = Mlp((self.feat_dim, *cfg.hidden, space.n), rng)
        self.critic = Mlp((self.feat_dim + space.n, *cfg.hidden, 1), rng)
        self.actor_opt = AdamState(lr=cfg.teacher_lr)
        self.critic_opt = AdamState(lr=cfg.teacher_lr)
        self.buffer: deque = deque(maxlen=cfg.meta_buffer)
        self._pending: tuple[np.ndarray, np.ndarray] | None = None

    def _raw_probs(self):
        return softmax(self.actor.forward(self.history.features(self.cfg)))

    def _update(self, batch):
        _, _, mean = self._centered(batch)
        reward = teacher_reward(mean, self.cfg.clamp_eps, self.cfg.clamp_enabled)
        if not self.cfg.clamp_enabled:
            assert reward == -mean
        feats = self.history.features(self.cfg)
        if self._pending is not None:
            s, c = self._pending
            self.buffer.append((s, c, reward, feats))
        self._pending = (feats, self.actor.forward(feats))
        if len(self.buffer) < self.cfg.meta_batch:
            return {"mean_return": mean, "skipped": True,
                    "buffer": len(self.buffer)}
        idx = (self.rng.choice(len(self.buffer), self.cfg.meta_batch, replace=False)
               if self.rng is not None else
               np.arange(len(self.buffer))[-self.cfg.meta_batch:])
        trans = [self.buffer[int(i)] for i in idx]
        self._critic_step(trans)
        self._actor_step(trans)
        return {"mean_return": mean, "skipped": False,
                "buffer": len(self.buffer)}

    def _critic_step(self, trans):
        states = np.stack([np.concatenate([s, c]) for s, c, _, _ in trans])
        targets = np.array([
            r + self.cfg.meta_gamma * float(self.critic.forward(
                np.concatenate([s2, self.actor.forward(s2)]))[0])
            for _, _, r, s2 in trans])
        q, cache = self.critic.forward_cache(states)
        dq = 2.0 * (q[:, 0] - targets) / len(trans)
        grads, _ = self.critic.backward(cache, dq[:, None])
        adam_step(self.critic.params, grads, self.critic_opt)

    def _actor_step(self, trans):
        n = self.space.n
        total = [np.zeros_like(p) for p in self.actor.params]
        for s, _, _, _ in trans:
            action, a_cache = self.actor.forward_cache(s)
            _, q_cache = self.critic.forward_cache(np.concatenate([s, action]))
            _, dinput = self.critic.backward(q_cache, np.array([1.0]))
            dq_daction = dinput[-n:]
            grads, _ = self.actor.backward(a_cache, -dq_daction)  # ascend Q
            for t, g in zip(total, grads):
                t += g / len(trans)
        adam_step(self.actor.params, total, self.actor_opt)

    def td_error(self, trans) -> float:
        states = np.stack([np.concatenate([s, c]) for s, c, _, _ in trans])
        targets = np.array([
            r + self.cfg.meta_gamma * float(self.critic.forward(
                np.concatenate([s2, self.actor.forward(s2)]))[0])
            for _, _, r, s2 in trans])
        q = self.critic.forward(states)[:, 0]
        return float(np.mean((q - targets) ** 2))


def update_logit_teacher(teacher: LogitTeacher, batch) -> LogitTeacher:
    teacher.update(batch)
    return teacher


def update_history_teacher(teacher: HistoryTeacher, batch) -> HistoryTeacher:
    teacher.update(batch)
    return teacher


def update_meta_teacher(teacher: MetaTeacher, batch) -> MetaTeacher:
    teacher.update(batch)
    return teacher


def task_distribution(teacher: TeacherBase) -> Categorical:
    return teacher.distribution()
